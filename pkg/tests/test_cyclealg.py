import numpy as np
import pytest
import sympy
from scipy.optimize import brentq
from hypothesis import given, settings, strategies as st

from bcres.cyclealg import (
    BcbType, ConvergenceError, SingularMatrixError, Stability, adjugate, admissibility,
    check_admissible, cycle_matrices, cyclic_det_check, feigin_classify, half_fixed_point,
    linear_cycle, newton_cycle, varrho_row,
)
from bcres.mapmodel import ExampleParams, PwsMap, build_example, evaluate
from bcres.symbolic import SymbolWord
from bcres.verify import random_map, random_word

P0 = ExampleParams(r_L=0.2, s_R=0.95, omega_L=0.287, omega_R=0.287, mu=1.0, c=0.0)
F1 = build_example(P0)


def test_adjugate_examples():
    assert np.allclose(adjugate([[1.0, 2.0], [3.0, 4.0]]), [[4.0, -2.0], [-3.0, 1.0]])
    assert np.allclose(adjugate(np.eye(3)), np.eye(3))
    assert np.allclose(adjugate([[5.0]]), [[1.0]])
    # singular input still has an adjugate
    assert np.allclose(adjugate([[1.0, 2.0], [2.0, 4.0]]), [[4.0, -2.0], [-2.0, 1.0]])


@settings(max_examples=30)
@given(st.integers(0, 10_000), st.sampled_from([2, 3, 4]))
def test_adjugate_matches_sympy(seed, N):
    X = np.random.default_rng(seed).integers(-5, 6, (N, N)).astype(float)
    ref = np.array(sympy.Matrix(X.astype(int).tolist()).adjugate(), dtype=float)
    assert np.allclose(adjugate(X), ref, atol=1e-9)


def test_adjugate_identity_random_3x3(rng):
    for _ in range(50):
        X = rng.normal(size=(3, 3))
        err = np.linalg.norm(adjugate(X) @ X - np.linalg.det(X) * np.eye(3))
        assert err <= 1e-10 * np.linalg.norm(X) ** 3


def test_varrho_row():
    assert np.allclose(varrho_row(F1), [1.0, 1.0])
    assert np.allclose(varrho_row(PwsMap([1.0], [[0.3]], [[-2.0]])), [1.0])
    bad = PwsMap([1, 0], F1.A_L, F1.A_R + [[0, 0.1], [0, 0]])
    with pytest.raises(AssertionError):
        varrho_row(bad)


def test_varrho_rows_agree_random(rng):
    for _ in range(50):
        f = random_map(rng, int(rng.integers(2, 5)))
        varrho_row(f)


def test_half_fixed_point():
    fp = half_fixed_point(F1.with_mu(0.0), "L")
    assert np.array_equal(fp.x_star, [0.0, 0.0]) and fp.s_star == 0.0
    fp = half_fixed_point(F1, "L")
    det = np.linalg.det(np.eye(2) - F1.A_L)
    assert fp.s_star == pytest.approx(1 / det, rel=1e-12)
    assert fp.s_formula == pytest.approx(fp.s_star, rel=1e-12)
    assert not fp.admissible  # det > 0 puts the left fixed point at s > 0 when mu > 0
    fp = half_fixed_point(F1.with_mu(-1.0), "L")
    assert fp.admissible
    mult = np.linalg.eigvals(F1.A_L)
    assert np.all(np.abs(mult) < 1) and np.allclose(np.abs(mult), 0.2)
    with pytest.raises(SingularMatrixError):
        half_fixed_point(PwsMap([1, 0], np.eye(2), np.eye(2)), "L")


def test_cycle_matrices_examples():
    cm = cycle_matrices(F1, "R")
    assert np.allclose(cm.M, F1.A_R) and np.allclose(cm.P, np.eye(2))
    cm = cycle_matrices(F1, "LR")
    assert np.allclose(cm.M, F1.A_R @ F1.A_L) and np.allclose(cm.P, np.eye(2) + F1.A_R)
    assert np.allclose(cycle_matrices(F1, "RR").P, cm.P)


def test_linear_cycle_reference_point():
    cyc = linear_cycle(F1, "LRRRLRR")
    assert cyc.admissible and cyc.stability is Stability.ATTRACTING
    # forward-orbit oracle: the cycle repeats under the full map
    x = cyc.points[0]
    for i in range(7):
        assert np.allclose(x, cyc.points[i], atol=1e-12)
        x = evaluate(F1, x)
    assert np.allclose(x, cyc.points[0], atol=1e-8)
    zero = linear_cycle(F1.with_mu(0.0), "LRRRLRR")
    assert np.array_equal(zero.points, np.zeros((7, 2)))


def test_two_cycle_criterion():
    """s-values of the LR and RL cycles follow det(I + A_J) / det(I - M) * varrho.b * mu, so an
    admissible 2-cycle needs det(I + A_L) and det(I + A_R) of opposite sign."""
    rng = np.random.default_rng(7)
    eye = np.eye(2)
    checked = 0
    for _ in range(200):
        f = random_map(rng, 2)
        try:
            lr, rl = linear_cycle(f, "LR"), linear_cycle(f, "RL")
        except SingularMatrixError:
            continue
        rho_b = varrho_row(f) @ f.b
        dl, dr = np.linalg.det(eye + f.A_L), np.linalg.det(eye + f.A_R)
        s_lr = dr / np.linalg.det(eye - f.A_R @ f.A_L) * rho_b * f.mu
        s_rl = dl / np.linalg.det(eye - f.A_L @ f.A_R) * rho_b * f.mu
        assert lr.s_values[0] == pytest.approx(s_lr, rel=1e-8, abs=1e-12)
        assert rl.s_values[0] == pytest.approx(s_rl, rel=1e-8, abs=1e-12)
        assert np.allclose(lr.points[::-1], rl.points)
        if lr.admissible:
            assert dl * dr <= 0
        checked += 1
    assert checked > 150


def test_newton_examples():
    lin = linear_cycle(F1, "LRRRLRR")
    nc = newton_cycle(F1, "LRRRLRR", lin.points[0] + 0.1)
    assert nc.iterations == 1 and np.allclose(nc.points, lin.points, atol=1e-12)
    g = build_example(P0.with_(c=1.0, mu=0.5))
    cyc = newton_cycle(g, "LRRRLRR")
    assert cyc.residual < 1e-12
    with pytest.raises(ConvergenceError) as exc:
        newton_cycle(g, "LRRRLRR", [30.0, 30.0], max_iter=3)
    assert exc.value.residual > 1.0


def test_newton_fails_when_only_i_minus_m_is_singular():
    # A_L = A_R with eigenvalue 1 for word "L": I - M singular while P = I is regular
    A = np.array([[1.0, 1.0], [0.0, 0.5]])
    f = PwsMap([1.0, 0.0], A, A, mu=1.0)
    with pytest.raises((ConvergenceError, SingularMatrixError)):
        newton_cycle(f, "L", [0.0, 0.0])
    with pytest.raises(SingularMatrixError) as exc:
        linear_cycle(f, "L")
    assert abs(exc.value.det) < 1e-12


def test_admissibility_examples():
    assert check_admissible("LRR", [-1.0, 2.0, 0.5]) == (True, [])
    assert check_admissible("LRR", [1e-3, 2.0, 0.5], 1e-9) == (False, [0])
    assert check_admissible("LRR", [0.0, 2.0, 0.5])[0]
    assert check_admissible("RRR", [0.0, 2.0, 0.5])[0]
    cyc = linear_cycle(F1, "RRRRLRR")
    ok, bad = admissibility(cyc)
    assert ok == cyc.admissible and bad == cyc.violations


def test_feigin_examples():
    # both determinants positive at the reference point
    assert feigin_classify(F1) is BcbType.PERSISTENCE
    A_R = np.array([[2.5, 1.0], [-1.0, 0.0]])
    assert np.linalg.det(np.eye(2) - A_R) < 0
    assert feigin_classify(PwsMap([1, 0], F1.A_L, A_R)) is BcbType.FOLD
    A = np.array([[0.3, 1.0], [-0.1, 0.0]])
    assert feigin_classify(PwsMap([1, 0], A, A)) is BcbType.PERSISTENCE
    rho = varrho_row(PwsMap([1, 0], A, A))
    b = np.array([rho[1], -rho[0]])
    assert feigin_classify(PwsMap(b, A, A)) is BcbType.DEGENERATE


def test_cyclic_det_examples():
    assert cyclic_det_check(F1, linear_cycle(F1, "LRRRLRR")) <= 1e-12
    g = build_example(P0.with_(c=1.0, mu=0.5))
    cyc = newton_cycle(g, "LRRRLRR")
    assert cyclic_det_check(g, cyc) <= 1e-9 * max(1.0, abs(cyc.det_I_minus_J))
    assert cyclic_det_check(F1, linear_cycle(F1, "R")) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_linear_cycle_properties(seed):
    rng = np.random.default_rng(seed)
    f = random_map(rng, int(rng.integers(2, 5)))
    w = random_word(rng)
    try:
        cyc = linear_cycle(f, w)
    except SingularMatrixError:
        return
    # the points form a closed orbit of the half-maps in word order
    nc = newton_cycle(f, w, cyc.points[0])
    assert np.allclose(nc.points, cyc.points, rtol=1e-8, atol=1e-8)
    assert cyclic_det_check(f, cyc) <= 1e-9 * max(1.0, abs(cyc.det_I_minus_J))
    cm = cycle_matrices(f, w)
    eye = np.eye(f.N)
    A0 = f.matrix(w[0])
    assert np.allclose((cm.P @ (eye - A0))[:, 1:], (eye - cm.M)[:, 1:], atol=1e-9 * max(1, np.abs(cm.M).max()))
    if cyc.admissible:
        x = cyc.points[0]
        for _ in range(w.n):
            x = evaluate(f, x)
        assert np.allclose(x, cyc.points[0], atol=1e-8 * max(1, np.abs(x).max()))


def test_rank_one_difference(rng):
    for _ in range(50):
        f = random_map(rng, int(rng.integers(2, 5)))
        X = rng.normal(size=(f.N, f.N))
        D = X @ f.A_R - X @ f.A_L
        assert np.allclose(D[:, 1:], 0.0, atol=1e-12)


def test_flip_on_manifold():
    """A cycle with a point exactly on s = 0 is also a cycle of the flipped word."""
    w = SymbolWord.parse("LRRRLRR")
    # move along omega until s_0 of the linear cycle crosses zero
    def s0(om):
        return linear_cycle(build_example(P0.with_(omega_L=om, omega_R=om)), w).s_values[0]

    lo, hi = 0.28, 0.30
    grid = np.linspace(lo, hi, 81)
    vals = [s0(x) for x in grid]
    k = next(i for i in range(80) if vals[i] * vals[i + 1] < 0)
    om = brentq(s0, grid[k], grid[k + 1], xtol=1e-15)
    g = build_example(P0.with_(omega_L=om, omega_R=om))
    a = newton_cycle(g, w)
    b = newton_cycle(g, w.flip(0), a.points[0])
    assert abs(a.s_values[0]) < 1e-12
    assert np.allclose(a.points, b.points, atol=1e-10)
