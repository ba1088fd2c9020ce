"""Codebook-based user tracking for IRS-assisted mmWave downlinks."""

from irs_tracking.geometry import Direction, PlaneFrame, BS_FRAME, IRS_FRAME
from irs_tracking.codebook import CodebookConfig, Codeword

__all__ = [
    "Direction",
    "PlaneFrame",
    "BS_FRAME",
    "IRS_FRAME",
    "CodebookConfig",
    "Codeword",
]

__version__ = "0.1.0"
