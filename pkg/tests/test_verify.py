import numpy as np

from bcres.cyclealg import adjugate
from bcres.verify import random_map, run_suites


def _sign_bug(X):
    A = adjugate(X)
    A[0, 1] = -A[0, 1]
    return A


def test_suites_pass_small():
    res = run_suites(instances=100, n_max_symbolic=20)
    assert len(res) == 9
    for r in res:
        assert r.passed, r.line()
        assert r.line().startswith("PASS")


def test_suites_are_reproducible():
    a = run_suites(instances=30, n_max_symbolic=10)
    b = run_suites(instances=30, n_max_symbolic=10)
    assert [r.max_residual for r in a] == [r.max_residual for r in b]


def test_injected_adjugate_bug_is_caught():
    res = run_suites(instances=50, adjugate=_sign_bug, n_max_symbolic=10)
    failed = [r.name for r in res if not r.passed]
    assert any("adjugate" in n for n in failed)
    assert len(failed) >= 2


def test_random_maps_are_continuous(rng):
    for _ in range(20):
        f = random_map(rng, int(rng.integers(2, 5)))
        assert np.array_equal(f.A_L[:, 1:], f.A_R[:, 1:])
