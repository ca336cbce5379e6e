"""Randomized property suites for the cycle algebra and the symbol identities.

Each suite draws its instances from a fixed-seed generator, so runs are
reproducible.  Residuals are relative where a natural scale exists.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cyclealg import adjugate as _adjugate
from .cyclealg import cycle_matrices, linear_cycle, varrho_row
from .mapmodel import PwsMap
from .symbolic import SymbolWord, rotational_word

SEED = 20240607


@dataclass
class SuiteResult:
    name: str
    instances: int
    failures: int
    max_residual: float
    tol: float
    seconds: float

    @property
    def passed(self) -> bool:
        return self.failures == 0 and self.instances > 0

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (f"{flag} {self.name}: {self.instances} instances, {self.failures} failures, "
                f"max residual {self.max_residual:.2e} (tol {self.tol:.0e}), {self.seconds:.2f}s")

    def to_json(self) -> dict:
        return {"name": self.name, "instances": self.instances, "failures": self.failures,
                "max_residual": self.max_residual, "tol": self.tol, "passed": self.passed}


def random_map(rng, N: int, mu: float = 1.0) -> PwsMap:
    """Continuous piecewise-linear map with spectral radius of each half near 1."""
    B = rng.normal(size=(N, N)) / math.sqrt(N)
    A_L, A_R = B.copy(), B.copy()
    A_L[:, 0] = rng.normal(size=N) / math.sqrt(N)
    A_R[:, 0] = rng.normal(size=N) / math.sqrt(N)
    return PwsMap(rng.normal(size=N), A_L, A_R, mu=mu)


def random_word(rng, n_max: int = 12) -> SymbolWord:
    n = int(rng.integers(1, n_max + 1))
    return SymbolWord.parse("".join(rng.choice(["L", "R"], size=n)))


def _rel(a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


def _run(name, tol, instances, rng, check) -> SuiteResult:
    t = time.perf_counter()
    worst, fails = 0.0, 0
    for _ in range(instances):
        r = check(rng)
        if not np.isfinite(r) or r > tol:
            fails += 1
        worst = max(worst, r if np.isfinite(r) else np.inf)
    return SuiteResult(name, instances, fails, worst, tol, time.perf_counter() - t)


def run_suites(instances: int = 1000, adjugate: Callable = _adjugate, seed: int = SEED,
               n_max_symbolic: int = 50) -> list[SuiteResult]:
    """All suites.  ``adjugate`` may be replaced to check that faults are caught."""
    rng = np.random.default_rng(seed)
    dims = lambda r: int(r.integers(2, 5))
    out = []

    def adj_identity(r):
        N = dims(r)
        X = r.normal(size=(N, N))
        return float(np.max(np.abs(adjugate(X) @ X - np.linalg.det(X) * np.eye(N)))) / max(
            1.0, float(np.max(np.abs(X)))) ** N

    out.append(_run("adjugate identity adj(X) X = det(X) I", 1e-9, instances, rng, adj_identity))

    def shared_row(r):
        f = random_map(r, dims(r))
        I = np.eye(f.N)
        return _rel(adjugate(I - f.A_L)[0], adjugate(I - f.A_R)[0])

    out.append(_run("first rows of adj(I-A_L), adj(I-A_R) agree", 1e-9, instances, rng, shared_row))

    def p_independent(r):
        f = random_map(r, dims(r))
        w = random_word(r)
        return _rel(cycle_matrices(f, w).P, cycle_matrices(f, w.flip(0)).P)

    out.append(_run("P_S independent of S_0", 1e-9, instances, rng, p_independent))

    def rank_one(r):
        f = random_map(r, dims(r))
        X = r.normal(size=(f.N, f.N))
        D = X @ f.A_R - X @ f.A_L
        return float(np.max(np.abs(D[:, 1:]))) / max(1.0, float(np.max(np.abs(D))))

    out.append(_run("X A_R - X A_L vanishes off the first column", 1e-9, instances, rng, rank_one))

    def cyclic_det(r):
        f = random_map(r, dims(r))
        w = random_word(r)
        I = np.eye(f.N)
        vals = [np.linalg.det(I - cycle_matrices(f, w.shift(j)).M) for j in range(w.n)]
        return float(np.max(np.abs(np.array(vals) - vals[0]))) / max(1.0, abs(vals[0]))

    out.append(_run("det(I - M) invariant under cyclic shifts", 1e-9, instances, rng, cyclic_det))

    def columns(r):
        f = random_map(r, dims(r))
        w = random_word(r)
        cm = cycle_matrices(f, w)
        I = np.eye(f.N)
        lhs = cm.P @ (I - f.matrix(w[0]))
        return _rel(lhs[:, 1:], (I - cm.M)[:, 1:])

    out.append(_run("P_S (I - A_S0) and I - M_S agree off the first column", 1e-9, instances, rng, columns))

    def varrho_s(r):
        f = random_map(r, dims(r))
        w = random_word(r)
        cm = cycle_matrices(f, w)
        rho = adjugate(np.eye(f.N) - cm.M)[0]
        return _rel(rho @ cm.P, cm.detP * adjugate(np.eye(f.N) - f.A_L)[0])

    out.append(_run("varrho_S^T P_S = det(P_S) varrho^T", 1e-9, instances, rng, varrho_s))

    def singular_p(r):
        # tune the first column of A_R along a direction until det P_S = 0,
        # then compare that point and a displaced one
        while True:
            N = dims(r)
            f = random_map(r, N)
            w = random_word(r)
            # P_S only involves S_1..S_{n-1}; tau must enter through an R among them
            if "R" not in str(w)[1:]:
                continue
            e = r.normal(size=N)

            def with_tau(tau):
                A_R = f.A_R.copy()
                A_R[:, 0] += tau * e
                return PwsMap(f.b, f.A_L, A_R, mu=1.0)

            taus = np.linspace(-1, 1, w.n + 1)
            dets = [cycle_matrices(with_tau(t), w).detP for t in taus]
            roots = np.roots(np.polyfit(taus, dets, w.n))
            real = [float(z.real) for z in roots if abs(z.imag) < 1e-9 and abs(z.real) < 2]
            if not real:
                continue
            tau = real[0]
            for _ in range(3):
                h = 1e-7
                d0 = cycle_matrices(with_tau(tau), w).detP
                d1 = (cycle_matrices(with_tau(tau + h), w).detP - cycle_matrices(with_tau(tau - h), w).detP) / (2 * h)
                if d1 == 0:
                    break
                tau -= d0 / d1
            g = with_tau(tau)
            rb = float(varrho_row(g) @ g.b)
            cm = cycle_matrices(g, w)
            if abs(rb) < 1e-3 or abs(cm.detIminusM) < 1e-3:
                continue
            worst = 0.0
            for offset in (0.0, 1e-3):
                gg = with_tau(tau + offset)
                cm = cycle_matrices(gg, w)
                s0 = linear_cycle(gg, w).s_values[0] * cm.detIminusM / rb
                dp = cm.detP
                scale = max(1.0, float(np.max(np.abs(cm.P)))) ** N
                small_s, small_p = abs(s0) <= 1e-9 * scale, abs(dp) <= 1e-9 * scale
                if small_s != small_p:
                    return np.inf
                worst = max(worst, abs(s0 - dp) / scale)
            return worst

    out.append(_run("s_0 = 0 exactly when P_S is singular", 1e-9, instances, rng, singular_p))

    t = time.perf_counter()
    count = fails = 0
    for n in range(4, n_max_symbolic + 1):
        for m in range(1, n):
            if math.gcd(m, n) != 1:
                continue
            for l in range(2, n - 1):
                w = rotational_word(l, m, n)
                d = w.rotation.d
                count += 1
                if w.shift((l - 1) * d).flip(0) != w.flip(0).shift(l * d):
                    fails += 1
    out.append(SuiteResult(f"shift/flip word identity, all rotational words n <= {n_max_symbolic}",
                           count, fails, float(fails), 0.0, time.perf_counter() - t))
    return out
