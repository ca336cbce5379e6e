import numpy as np
import pytest

from bcres.mapmodel import ExampleParams, ParamPlane
from bcres.shrinkfind import find_shrinking_point
from bcres.symbolic import rotational_word

REF = ExampleParams(r_L=0.2, s_R=0.95, omega_L=0.287, omega_R=0.287, mu=1.0, c=0.0)
BOX_2_7 = ((0.28, 0.30), (0.85, 0.92))
BOX_2_7_LOWER = ((0.26, 0.29), (0.30, 0.50))

ACCEPTANCE = {}


def record(criterion: int, passed: bool, detail: str):
    ACCEPTANCE[criterion] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} - {detail}")


@pytest.fixture(scope="session")
def plane_c1():
    return ParamPlane(REF.with_(c=1.0))


@pytest.fixture(scope="session")
def plane_c0():
    return ParamPlane(REF)


@pytest.fixture(scope="session")
def sp_2_7(plane_c1):
    return find_shrinking_point(plane_c1, rotational_word(2, 2, 7), BOX_2_7)


@pytest.fixture(scope="session")
def sp_2_7_linear(plane_c0):
    return find_shrinking_point(plane_c0, rotational_word(2, 2, 7), BOX_2_7)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_UNFOLD = {}


def unfold_at(plane, sp, mu):
    """Unfolding reports are shared between tests; the first call records its runtime."""
    import time

    from bcres.shrinkfind import unfold_verify

    if mu not in _UNFOLD:
        t = time.perf_counter()
        rep = unfold_verify(plane, sp, mu)
        _UNFOLD[mu] = (rep, time.perf_counter() - t)
    return _UNFOLD[mu]


@pytest.fixture(scope="session")
def unfold(plane_c1, sp_2_7):
    return lambda mu: unfold_at(plane_c1, sp_2_7, mu)[0]
