import numpy as np
import pytest

from irs_tracking.channel import ChannelConfig, SiteGeometry
from irs_tracking.codebook import CodebookConfig, main_lobe_table
from irs_tracking.geometry import SPEED_OF_LIGHT

LAMBDA = SPEED_OF_LIGHT / 28e9


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("mainlobe_cache")


@pytest.fixture(scope="session")
def ref_cb():
    return CodebookConfig.for_carrier(28e9)


@pytest.fixture(scope="session")
def small_cb():
    """A fast codebook for structural tests."""
    return CodebookConfig.for_carrier(28e9, M_y=12, M_z=10, Q_y=16, Q_z=12)


@pytest.fixture(scope="session")
def geometry():
    return SiteGeometry()


@pytest.fixture(scope="session")
def chan_cfg():
    return ChannelConfig()


@pytest.fixture(scope="session")
def ref_lobes(ref_cb, geometry, cache_dir):
    return main_lobe_table(ref_cb, geometry.irs_aoa_los, cache_dir=cache_dir)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_CRITERIA: list[str] = []


@pytest.fixture(scope="session")
def criterion_log():
    """Record one ``PASS``/``FAIL`` line per acceptance criterion for the terminal summary."""

    def record(name: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        _CRITERIA.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
