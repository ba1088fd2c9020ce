"""CSV, manifest and figure output of a :class:`~irs_tracking.simulation.RunResult`.

:func:`write_run` stages everything in a temporary sibling directory and
renames it into place, so an interrupted run never leaves partial results.
"""
from __future__ import annotations

import csv
import io
import json
import os
import shutil
import tempfile
from pathlib import Path

import numpy as np

TRACE_HEADER = (
    "drop", "scheme", "t_s", "ptx_dbm", "m_y", "m_z", "theta_true_deg", "phi_true_deg",
    "theta_pred_deg", "phi_pred_deg", "snr_db", "rate_bpshz",
)
SUMMARY_HEADER = ("scheme", "ptx_dbm", "gamma", "mean_eff_rate_bpshz", "ci95")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if np.isnan(x):
        return ""
    return repr(x)


def _snr_db(snr: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return 10 * np.log10(snr)


def trace_rows(trace, stride: int = 1):
    true = np.rad2deg(trace.true_angles)
    pred = np.rad2deg(trace.pred_angles)
    snr_db = _snr_db(trace.reported_snr)
    rate = trace.rate
    for i in range(0, len(trace), stride):
        yield (
            trace.drop, trace.scheme, trace.t[i], trace.ptx_dbm, trace.m_y[i], trace.m_z[i],
            true[i, 0], true[i, 1], pred[i, 0], pred[i, 1], snr_db[i], rate[i],
        )


def trace_csv(traces, stride: int = 1) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for tr in traces:
        for row in trace_rows(tr, stride):
            w.writerow([_fmt(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


def summary_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    for r in rows:
        w.writerow([r["scheme"]] + [_fmt(r[k]) for k in SUMMARY_HEADER[1:]])
    return buf.getvalue()


def manifest(result, extra: dict | None = None) -> str:
    data = {
        "config": result.config,
        "seed": result.config.get("seed"),
        "derived": result.derived,
        "drops": result.drops,
        "schemes": result.schemes(),
    }
    if extra:
        data.update(extra)
    return json.dumps(data, indent=2, sort_keys=True, default=float) + "\n"


def plot_rate_vs_power(rows, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for scheme in dict.fromkeys(r["scheme"] for r in rows):
        sel = sorted((r for r in rows if r["scheme"] == scheme), key=lambda r: r["ptx_dbm"])
        x = [r["ptx_dbm"] for r in sel]
        y = np.array([r["mean_eff_rate_bpshz"] for r in sel])
        ci = np.nan_to_num(np.array([r["ci95"] for r in sel]))
        ax.errorbar(x, y, yerr=ci, marker="o", capsize=3, label=scheme)
    ax.set_xlabel("BS transmit power [dBm]")
    ax.set_ylabel("effective rate [bit/s/Hz]")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_snr_traces(traces, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4))
    for tr in traces:
        if len(tr):
            ax.plot(tr.t, _snr_db(tr.reported_snr), lw=0.8, label=f"{tr.scheme} ({tr.ptx_dbm:g} dBm)")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("SNR [dB]")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_run(result, out_dir, stride: int = 1, figures: bool = True, extra: dict | None = None) -> Path:
    """Write ``trace_<scheme>.csv``, ``summary.csv``, ``manifest.json`` and figures into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}.", dir=out_dir.parent))
    try:
        for scheme in result.schemes():
            (staging / f"trace_{scheme}.csv").write_text(trace_csv(result.select(scheme), stride))
        rows = result.summary()
        (staging / "summary.csv").write_text(summary_csv(rows))
        (staging / "manifest.json").write_text(manifest(result, extra))
        if figures and rows:
            plot_rate_vs_power(rows, staging / "rate_vs_power.png")
            first = [tr for tr in result.traces if tr.drop == 0 and tr.ptx_dbm == max(r["ptx_dbm"] for r in rows)]
            plot_snr_traces(first, staging / "snr_trace_drop0.png")
        if out_dir.exists():
            backup = out_dir.with_name(out_dir.name + ".old")
            shutil.rmtree(backup, ignore_errors=True)
            os.replace(out_dir, backup)
            os.replace(staging, out_dir)
            shutil.rmtree(backup, ignore_errors=True)
        else:
            os.replace(staging, out_dir)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    return out_dir
