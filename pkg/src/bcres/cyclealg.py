"""Periodic orbits of piecewise-smooth maps with a prescribed symbol word.

Covers the product and geometric-sum matrices of a word, adjugate-based
formulas for the switching-manifold coordinate of fixed points and cycles,
closed-form cycles of piecewise-linear maps, Newton refinement of cycles of
nonlinear maps, admissibility and stability.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass

import numpy as np

from .mapmodel import PwsMap, half_evaluate, half_jacobian
from .symbolic import Symbol, SymbolWord, as_word

DEFAULT_TOL_ZERO = 1e-10
SINGULAR_RTOL = 1e-12
HYPERBOLIC_TOL = 1e-9


class SingularMatrixError(ValueError):
    """A matrix that must be inverted is singular to working precision."""

    def __init__(self, message: str, det: float):
        super().__init__(f"{message} (det = {det:.3e})")
        self.det = det


class NearFoldError(SingularMatrixError):
    """The Newton matrix ``I - D f^S`` lost rank: the cycle is close to a saddle-node."""


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual = {residual:.3e})")
        self.residual = residual


class Stability(str, enum.Enum):
    ATTRACTING = "attracting"
    SADDLE = "saddle"
    REPELLING = "repelling"
    NONHYPERBOLIC = "nonhyperbolic"


class BcbType(str, enum.Enum):
    FOLD = "fold"
    PERSISTENCE = "persistence"
    DEGENERATE = "degenerate"


def is_singular(X: np.ndarray, det: float | None = None) -> bool:
    """Scale-aware singularity test: ``|det X| < 1e-12 * max|X_ij|**N``."""
    X = np.atleast_2d(X)
    if det is None:
        det = float(np.linalg.det(X))
    scale = float(np.max(np.abs(X))) if X.size else 0.0
    return abs(det) < SINGULAR_RTOL * max(scale, 1e-300) ** X.shape[0] or scale == 0.0


def adjugate(X) -> np.ndarray:
    """Classical adjugate (transposed cofactor matrix); defined for singular ``X`` too."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N = X.shape[0]
    if N == 1:
        return np.ones((1, 1))
    keep, sign = _minor_index(N)
    minors = X[keep[:, None, :, None], keep[None, :, None, :]]
    return (sign * np.linalg.det(minors)).T


@functools.lru_cache(maxsize=None)
def _minor_index(N: int):
    keep = np.array([[r for r in range(N) if r != i] for i in range(N)])
    return keep, (-1.0) ** np.add.outer(np.arange(N), np.arange(N))


def varrho_row(fmap: PwsMap, atol: float = 1e-10) -> np.ndarray:
    """First row of ``adj(I - A_L)``, which must equal that of ``adj(I - A_R)``."""
    eye = np.eye(fmap.N)
    rl = adjugate(eye - fmap.A_L)[0]
    rr = adjugate(eye - fmap.A_R)[0]
    if not np.allclose(rl, rr, rtol=0.0, atol=atol * max(1.0, float(np.max(np.abs(rl))))):
        raise AssertionError(f"adjugate rows differ ({rl} vs {rr}); map is not continuous")
    return rl


@dataclass(frozen=True)
class FixedPointInfo:
    x_star: np.ndarray
    s_star: float
    side: Symbol
    admissible: bool
    s_formula: float


def half_fixed_point(fmap: PwsMap, side: Symbol | str) -> FixedPointInfo:
    """Fixed point of the affine part of one half-map, with its ``s`` from the adjugate formula."""
    side = Symbol(side)
    ImA = np.eye(fmap.N) - fmap.matrix(side)
    det = float(np.linalg.det(ImA))
    if is_singular(ImA, det):
        raise SingularMatrixError(f"I - A_{side.value} is singular", det)
    x = np.linalg.solve(ImA, fmap.mu * fmap.b)
    s_formula = float(varrho_row(fmap) @ fmap.b) * fmap.mu / det
    s = float(x[0])
    admissible = s <= 0.0 if side is Symbol.L else s >= 0.0
    return FixedPointInfo(x, s, side, admissible, s_formula)


@dataclass(frozen=True)
class CycleMatrices:
    M: np.ndarray
    P: np.ndarray
    detIminusM: float
    detP: float
    varrho_S: np.ndarray


def cycle_matrices(fmap: PwsMap, word: SymbolWord | str) -> CycleMatrices:
    """``M = A_{S_{n-1}} ... A_{S_0}`` and ``P = I + A_{S_{n-1}} + ... + A_{S_{n-1}} ... A_{S_1}``."""
    word = as_word(word)
    N = fmap.N
    M = np.eye(N)
    for sym in word:
        M = fmap.matrix(sym) @ M
    P = np.eye(N)
    prod = np.eye(N)
    for sym in reversed(word.symbols[1:]):
        prod = prod @ fmap.matrix(sym)
        P = P + prod
    ImM = np.eye(N) - M
    return CycleMatrices(M, P, float(np.linalg.det(ImM)), float(np.linalg.det(P)), adjugate(ImM)[0])


def classify(multipliers, tol: float = HYPERBOLIC_TOL) -> Stability:
    mods = np.abs(np.asarray(multipliers))
    inside = mods < 1.0 - tol
    outside = mods > 1.0 + tol
    if not np.all(inside | outside):
        return Stability.NONHYPERBOLIC
    if np.all(inside):
        return Stability.ATTRACTING
    if np.all(outside):
        return Stability.REPELLING
    return Stability.SADDLE


def check_admissible(word: SymbolWord | str, s_values, tol_zero: float = DEFAULT_TOL_ZERO):
    """Sign test per point: L needs ``s <= 0`` and R needs ``s >= 0``; ``|s| <= tol_zero`` is free."""
    word = as_word(word)
    violations = []
    for i, (sym, s) in enumerate(zip(word, s_values)):
        if abs(s) <= tol_zero:
            continue
        if (sym is Symbol.L and s > 0) or (sym is Symbol.R and s < 0):
            violations.append(i)
    return not violations, violations


@dataclass(frozen=True)
class Cycle:
    word: SymbolWord
    points: np.ndarray
    s_values: np.ndarray
    admissible: bool
    violations: list
    multipliers: np.ndarray
    stability: Stability
    jacobian: np.ndarray
    residual: float = 0.0
    iterations: int = 0
    tol_zero: float = DEFAULT_TOL_ZERO

    @property
    def n(self) -> int:
        return self.word.n

    @property
    def det_I_minus_J(self) -> float:
        return float(np.linalg.det(np.eye(self.jacobian.shape[0]) - self.jacobian))

    def to_json(self) -> dict:
        return {
            "word": str(self.word),
            "points": self.points.tolist(),
            "s_values": self.s_values.tolist(),
            "admissible": self.admissible,
            "violations": list(self.violations),
            "multipliers": [[float(z.real), float(z.imag)] for z in self.multipliers],
            "stability": self.stability.value,
            "det_I_minus_Df": self.det_I_minus_J,
            "residual": self.residual,
            "iterations": self.iterations,
        }


def word_orbit(fmap: PwsMap, word: SymbolWord | str, x0):
    """Iterate the half-maps in word order from ``x0``.

    Returns the ``n`` points ``x_0..x_{n-1}``, the image ``f^S(x_0)`` and the
    chain-rule product of half-Jacobians ``D f^S(x_0)``.
    """
    word = as_word(word)
    x = np.asarray(x0, dtype=float)
    pts = np.empty((word.n, fmap.N))
    J = np.eye(fmap.N)
    for i, sym in enumerate(word):
        pts[i] = x
        J = half_jacobian(fmap, sym, x) @ J
        x = half_evaluate(fmap, sym, x)
    return pts, x, J


def _assemble(fmap, word, x0, tol_zero, residual=0.0, iterations=0) -> Cycle:
    pts, _, J = word_orbit(fmap, word, x0)
    s = pts[:, 0].copy()
    admissible, violations = check_admissible(word, s, tol_zero)
    mult = np.linalg.eigvals(J)
    return Cycle(word, pts, s, admissible, violations, mult, classify(mult), J,
                 residual, iterations, tol_zero)


def linear_cycle(fmap: PwsMap, word: SymbolWord | str, tol_zero: float = DEFAULT_TOL_ZERO) -> Cycle:
    """Closed-form cycle ``x_0 = (I - M)^{-1} P b mu`` of the affine parts of ``fmap``.

    The first component is cross-checked against the determinant formula
    ``det(P)/det(I-M) * varrho.b * mu``; a disagreement raises AssertionError.
    """
    word = as_word(word)
    cm = cycle_matrices(fmap, word)
    ImM = np.eye(fmap.N) - cm.M
    if is_singular(ImM, cm.detIminusM):
        raise SingularMatrixError(f"I - M_S is singular for word {word}", cm.detIminusM)
    x0 = np.linalg.solve(ImM, cm.P @ fmap.b * fmap.mu)
    s_formula = cm.detP / cm.detIminusM * float(varrho_row(fmap) @ fmap.b) * fmap.mu
    cond = np.linalg.cond(ImM)
    tol = (1e-9 + 100 * np.finfo(float).eps * cond) * max(1.0, float(np.max(np.abs(x0))))
    if abs(x0[0] - s_formula) > tol:
        raise AssertionError(f"s_0 = {x0[0]!r} disagrees with determinant formula {s_formula!r}")
    if not fmap.is_linear:
        # affine seed only; report it through the nonlinear map's half-maps
        pts, end, _ = word_orbit(fmap, word, x0)
        return _assemble(fmap, word, x0, tol_zero, float(np.max(np.abs(end - x0))))
    return _assemble(fmap, word, x0, tol_zero)


def newton_cycle(
    fmap: PwsMap,
    word: SymbolWord | str,
    x0_guess=None,
    tol: float = 1e-12,
    max_iter: int = 50,
    tol_zero: float = DEFAULT_TOL_ZERO,
) -> Cycle:
    """Fixed point of the composed map ``f^S`` by Newton's method.

    Without a guess the closed-form cycle of the affine parts is used as the
    seed.  Raises :class:`ConvergenceError` rather than returning an
    unconverged orbit.
    """
    word = as_word(word)
    if x0_guess is None:
        x0_guess = linear_cycle(fmap.linear_part(), word).points[0]
    with np.errstate(over="ignore", invalid="ignore"):
        return _newton(fmap, word, np.array(x0_guess, dtype=float), tol, max_iter, tol_zero)


def _newton(fmap, word, x, tol, max_iter, tol_zero) -> Cycle:
    eye = np.eye(fmap.N)
    residual = np.inf
    for it in range(1, max_iter + 1):
        _, fx, J = word_orbit(fmap, word, x)
        F = fx - x
        residual = float(np.max(np.abs(F)))
        if not np.isfinite(residual):
            raise ConvergenceError(f"Newton produced a non-finite residual for word {word}", residual)
        if residual <= tol:
            return _assemble(fmap, word, x, tol_zero, residual, it - 1)
        K = eye - J
        det = float(np.linalg.det(K))
        if is_singular(K, det):
            raise NearFoldError(
                f"Newton matrix I - Df^S is rank deficient for {word}; "
                "the parameters may be close to a saddle-node (Lambda = 0)", det)
        x = x + np.linalg.solve(K, F)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > 1e12:
            raise ConvergenceError(f"Newton diverged for word {word} at iteration {it}", residual)
    _, fx, _ = word_orbit(fmap, word, x)
    final = float(np.max(np.abs(fx - x)))
    if final <= tol:
        return _assemble(fmap, word, x, tol_zero, final, max_iter)
    raise ConvergenceError(f"Newton failed for word {word} after {max_iter} iterations", final)


def admissibility(cycle: Cycle, tol_zero: float = DEFAULT_TOL_ZERO):
    return check_admissible(cycle.word, cycle.s_values, tol_zero)


def feigin_classify(fmap: PwsMap, tol: float = 1e-12) -> BcbType:
    """Border-collision fold when ``det(I-A_L)`` and ``det(I-A_R)`` differ in sign."""
    rho_b = float(varrho_row(fmap) @ fmap.b)
    scale = max(1.0, float(np.max(np.abs(fmap.A_L))), float(np.max(np.abs(fmap.A_R))))
    if abs(rho_b) < tol * scale ** fmap.N * max(1.0, float(np.max(np.abs(fmap.b)))):
        return BcbType.DEGENERATE
    eye = np.eye(fmap.N)
    dl = np.linalg.det(eye - fmap.A_L)
    dr = np.linalg.det(eye - fmap.A_R)
    return BcbType.FOLD if dl * dr < 0 else BcbType.PERSISTENCE


def shifted_jacobian(fmap: PwsMap, cycle: Cycle, j: int) -> np.ndarray:
    """``D f^{S^(j)}(x_j)``: the half-Jacobians multiplied starting from point ``j``."""
    n = cycle.n
    J = np.eye(fmap.N)
    for k in range(n):
        i = (j + k) % n
        J = half_jacobian(fmap, cycle.word[i], cycle.points[i]) @ J
    return J


def cyclic_det_check(fmap: PwsMap, cycle: Cycle) -> float:
    """Largest deviation of ``det(I - D f^{S^(j)}(x_j))`` from its value at ``j = 0``."""
    eye = np.eye(fmap.N)
    ref = float(np.linalg.det(eye - shifted_jacobian(fmap, cycle, 0)))
    worst = 0.0
    for j in range(1, cycle.n):
        worst = max(worst, abs(float(np.linalg.det(eye - shifted_jacobian(fmap, cycle, j))) - ref))
    return worst
