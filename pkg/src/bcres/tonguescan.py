"""Resonance-tongue scans: the eventual period of the forward orbit of a point,
over a two-parameter grid of the example family."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .mapmodel import ParamPlane, PwsMap, evaluate

NO_ATTRACTOR = 0
LONG_OR_APERIODIC = -1


@dataclass(frozen=True)
class ScanSettings:
    transient: int = 10_000
    max_period: int = 30
    tol: float = 1e-8
    escape_radius: float | None = None
    x0: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.transient < 0 or self.max_period < 1:
            raise ValueError("transient must be >= 0 and max_period >= 1")
        if self.tol <= 0 or (self.escape_radius is not None and self.escape_radius <= 0):
            raise ValueError("tolerances must be positive")

    def radius(self, mu: float) -> float:
        return self.escape_radius if self.escape_radius is not None else 1e6 * max(1.0, abs(mu))


@dataclass(frozen=True)
class GridSpec:
    plane: ParamPlane
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    nx: int
    ny: int

    def __post_init__(self):
        if not self.x_range[0] < self.x_range[1] or not self.y_range[0] < self.y_range[1]:
            raise ValueError("ranges must satisfy lo < hi")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("resolution must be positive")

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(*self.x_range, self.nx)

    @property
    def ys(self) -> np.ndarray:
        return np.linspace(*self.y_range, self.ny)

    def to_json(self) -> dict:
        return {"param_x": self.plane.x, "param_y": self.plane.y,
                "x_range": list(self.x_range), "y_range": list(self.y_range),
                "resolution": [self.nx, self.ny], "fixed": self.plane.to_json()["base"],
                "ties": [list(t) for t in self.plane.ties]}


@dataclass
class TongueGrid:
    """``period[j, i]`` is the result at ``(xs[i], ys[j])``."""

    spec: GridSpec
    settings: ScanSettings
    period: np.ndarray

    def cell_of(self, px: float, py: float) -> tuple[int, int]:
        i = int(np.argmin(np.abs(self.spec.xs - px)))
        j = int(np.argmin(np.abs(self.spec.ys - py)))
        return j, i

    def rows(self):
        """CSV rows ``(param_x, param_y, period)``, row-major in y then x."""
        xs, ys = self.spec.xs, self.spec.ys
        for j, y in enumerate(ys):
            for i, x in enumerate(xs):
                yield float(x), float(y), int(self.period[j, i])


def forward_period(
    fmap: PwsMap,
    x0=None,
    transient: int = 10_000,
    max_period: int = 30,
    tol: float = 1e-8,
    escape_radius: float | None = None,
) -> int:
    """Eventual period of the orbit of ``x0`` (default the origin).

    Returns the smallest ``p <= max_period`` with ``|x_{t+p+k} - x_{t+k}| <= tol``
    for ``k = 0..p``, 0 if the orbit escapes and -1 if it stays bounded
    without a detected period.
    """
    radius = escape_radius if escape_radius is not None else 1e6 * max(1.0, abs(fmap.mu))
    x = np.zeros(fmap.N) if x0 is None else np.asarray(x0, dtype=float)
    for _ in range(transient):
        x = evaluate(fmap, x)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > radius:
            return NO_ATTRACTOR
    hist = [x]
    for _ in range(2 * max_period):
        x = evaluate(fmap, x)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > radius:
            return NO_ATTRACTOR
        hist.append(x)
    H = np.array(hist)
    for p in range(1, max_period + 1):
        if np.all(np.max(np.abs(H[p:2 * p + 1] - H[: p + 1]), axis=1) <= tol):
            return p
    return LONG_OR_APERIODIC


class _Batch:
    """Stacked copies of structurally identical maps, iterated together."""

    def __init__(self, maps: list[PwsMap]):
        self.b = np.array([m.b * m.mu for m in maps])
        self.A = {side: np.array([m.matrix(side) for m in maps]) for side in "LR"}
        self.terms = {}
        for side in "LR":
            keys = sorted({(t.component, t.exps) for m in maps for t in m.terms(side)})
            coefs = []
            for key in keys:
                coefs.append(np.array([sum(t.coef for t in m.terms(side) if (t.component, t.exps) == key)
                                       for m in maps]))
            self.terms[side] = list(zip(keys, coefs))

    def step(self, x: np.ndarray) -> np.ndarray:
        left = x[:, 0] < 0
        out = np.empty_like(x)
        for side, mask in (("L", left), ("R", ~left)):
            if not mask.any():
                continue
            xm = x[mask]
            y = self.b[mask] + np.einsum("kij,kj->ki", self.A[side][mask], xm)
            for (comp, exps), coef in self.terms[side]:
                mono = np.ones(xm.shape[0])
                for k, e in enumerate(exps):
                    if e:
                        mono = mono * xm[:, k] ** e
                y[:, comp] += coef[mask] * mono
            out[mask] = y
        return out


def _periods(maps: list[PwsMap], settings: ScanSettings) -> np.ndarray:
    K, N = len(maps), maps[0].N
    batch = _Batch(maps)
    radius = np.array([settings.radius(m.mu) for m in maps])
    x = np.zeros((K, N)) if settings.x0 is None else np.tile(np.asarray(settings.x0, float), (K, 1))
    escaped = np.zeros(K, dtype=bool)

    def advance(x):
        y = batch.step(x)
        bad = ~np.all(np.isfinite(y), axis=1) | (np.max(np.abs(np.nan_to_num(y, nan=np.inf)), axis=1) > radius)
        escaped[bad] = True
        # escaped cells are parked at the origin; they are already classified
        y[escaped] = 0.0
        return y

    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(settings.transient):
            x = advance(x)
        P = settings.max_period
        hist = np.empty((2 * P + 1, K, N))
        hist[0] = x
        for t in range(1, 2 * P + 1):
            x = advance(x)
            hist[t] = x
    period = np.full(K, LONG_OR_APERIODIC, dtype=int)
    undecided = ~escaped
    for p in range(1, P + 1):
        ok = np.all(np.max(np.abs(hist[p:2 * p + 1] - hist[: p + 1]), axis=2) <= settings.tol, axis=0)
        hit = ok & undecided
        period[hit] = p
        undecided &= ~hit
    period[escaped] = NO_ATTRACTOR
    return period


def scan(spec: GridSpec, settings: ScanSettings = ScanSettings(), threads: int = 1,
         chunk: int = 2500) -> TongueGrid:
    """Period of the forward orbit from ``settings.x0`` at every grid cell.

    Cells are processed in fixed chunks written into pre-assigned slots, so
    the result does not depend on ``threads``.
    """
    xs, ys = spec.xs, spec.ys
    cells = [(x, y) for y in ys for x in xs]
    out = np.empty(len(cells), dtype=int)
    bounds = [(k, min(k + chunk, len(cells))) for k in range(0, len(cells), chunk)]

    def work(lo_hi):
        lo, hi = lo_hi
        maps = [spec.plane.map_at(px, py) for px, py in cells[lo:hi]]
        out[lo:hi] = _periods(maps, settings)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, bounds))
    else:
        for b in bounds:
            work(b)
    return TongueGrid(spec, settings, out.reshape(spec.ny, spec.nx))
