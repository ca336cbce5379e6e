"""Piecewise-smooth continuous maps with switching manifold ``s = x[0] = 0``.

Each half-map has the form ``mu*b + A x + g(x)`` where ``g`` is a sum of
polynomial terms of total degree at least two.  The two-dimensional family
with companion-form matrices (the "dns" family) is built by
:func:`build_example`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .symbolic import Symbol

# Points on the switching manifold used by continuity_residual.
_PROBE_COUNT = 16


@dataclass(frozen=True)
class PolyTerm:
    coef: float
    exps: tuple[int, ...]
    component: int

    def __post_init__(self):
        object.__setattr__(self, "exps", tuple(int(e) for e in self.exps))
        if any(e < 0 for e in self.exps):
            raise ValueError("exponents must be non-negative")
        if sum(self.exps) < 2:
            raise ValueError("polynomial terms must have total degree >= 2")

    def value(self, x: np.ndarray) -> float:
        return self.coef * float(np.prod([x[k] ** e for k, e in enumerate(self.exps) if e]))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        grad = np.zeros(len(self.exps))
        for k, e in enumerate(self.exps):
            if e == 0:
                continue
            val = self.coef * e * x[k] ** (e - 1)
            for j, ej in enumerate(self.exps):
                if j != k and ej:
                    val *= x[j] ** ej
            grad[k] = val
        return grad

    def to_json(self) -> dict:
        return {"coef": self.coef, "exp": list(self.exps), "component": self.component}

    @classmethod
    def from_json(cls, d: dict) -> "PolyTerm":
        return cls(float(d["coef"]), tuple(d["exp"]), int(d["component"]))


def _key(t: PolyTerm) -> tuple:
    return (t.component, t.exps)


def _collect(terms: Sequence[PolyTerm]) -> dict:
    out: dict = {}
    for t in terms:
        out[_key(t)] = out.get(_key(t), 0.0) + t.coef
    return out


@dataclass(frozen=True, eq=False)
class PwsMap:
    """``f(x) = mu*b + A_J x + g_J(x)`` with ``J = L`` for ``s < 0`` and ``J = R`` for ``s >= 0``."""

    b: np.ndarray
    A_L: np.ndarray
    A_R: np.ndarray
    g_L: tuple[PolyTerm, ...] = ()
    g_R: tuple[PolyTerm, ...] = ()
    mu: float = 0.0

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float).reshape(-1)
        N = b.size
        A_L = np.asarray(self.A_L, dtype=float).reshape(N, N)
        A_R = np.asarray(self.A_R, dtype=float).reshape(N, N)
        for a in (b, A_L, A_R):
            a.setflags(write=False)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "A_L", A_L)
        object.__setattr__(self, "A_R", A_R)
        object.__setattr__(self, "g_L", tuple(self.g_L))
        object.__setattr__(self, "g_R", tuple(self.g_R))
        object.__setattr__(self, "mu", float(self.mu))
        for t in self.g_L + self.g_R:
            if len(t.exps) != N or not 0 <= t.component < N:
                raise ValueError(f"term {t} does not fit dimension {N}")
        left, right = _collect(self.g_L), _collect(self.g_R)
        for k in set(left) | set(right):
            if left.get(k, 0.0) != right.get(k, 0.0) and k[1][0] < 1:
                raise ValueError(
                    f"nonlinear term {k} differs between halves but has no factor of s; "
                    "the map would be discontinuous"
                )

    @property
    def N(self) -> int:
        return self.b.size

    @property
    def is_linear(self) -> bool:
        return not self.g_L and not self.g_R

    def with_mu(self, mu: float) -> "PwsMap":
        return replace(self, mu=mu)

    def linear_part(self) -> "PwsMap":
        return replace(self, g_L=(), g_R=())

    def matrix(self, side: Symbol | str) -> np.ndarray:
        return self.A_L if Symbol(side) is Symbol.L else self.A_R

    def terms(self, side: Symbol | str) -> tuple[PolyTerm, ...]:
        return self.g_L if Symbol(side) is Symbol.L else self.g_R

    def side_of(self, x: np.ndarray) -> Symbol:
        # s == 0 goes right; both halves agree there
        return Symbol.L if x[0] < 0 else Symbol.R

    def to_json(self) -> dict:
        return {
            "N": self.N,
            "b": self.b.tolist(),
            "A_L": self.A_L.tolist(),
            "A_R": self.A_R.tolist(),
            "g_L": [t.to_json() for t in self.g_L],
            "g_R": [t.to_json() for t in self.g_R],
            "mu": self.mu,
        }


def half_evaluate(fmap: PwsMap, side: Symbol | str, x) -> np.ndarray:
    """Apply the chosen half-map whatever the sign of ``s``."""
    x = np.asarray(x, dtype=float)
    y = fmap.mu * fmap.b + fmap.matrix(side) @ x
    for t in fmap.terms(side):
        y[t.component] += t.value(x)
    return y


def half_jacobian(fmap: PwsMap, side: Symbol | str, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    J = fmap.matrix(side).copy()
    for t in fmap.terms(side):
        J[t.component] += t.gradient(x)
    return J


def evaluate(fmap: PwsMap, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return half_evaluate(fmap, fmap.side_of(x), x)


def continuity_residual(fmap: PwsMap, scale: float = 1.0) -> tuple[float, bool]:
    """Largest ``|f_L(x) - f_R(x)|`` over a fixed probe set on ``s = 0``, and whether the
    linear parts agree off the first column."""
    N = fmap.N
    rng = np.random.default_rng(12345)
    probes = rng.uniform(-scale, scale, size=(_PROBE_COUNT, N))
    probes[:, 0] = 0.0
    if N > 1:
        probes[0, 1:] = scale
    worst = 0.0
    for x in probes:
        d = half_evaluate(fmap, Symbol.L, x) - half_evaluate(fmap, Symbol.R, x)
        worst = max(worst, float(np.max(np.abs(d))))
    columns_agree = bool(np.array_equal(fmap.A_L[:, 1:], fmap.A_R[:, 1:]))
    return worst, columns_agree


@dataclass(frozen=True)
class ExampleParams:
    """Parameters of the two-dimensional normal-form family.

    ``c`` multiplies an ``s**2`` term in the first component of the left
    half-map; ``c = 0`` gives the piecewise-linear map.
    """

    r_L: float = 0.2
    s_R: float = 0.95
    omega_L: float = 0.287
    omega_R: float = 0.287
    mu: float = 1.0
    c: float = 0.0

    def __post_init__(self):
        for name in ("r_L", "s_R"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name}={v} must lie in (0, 1)")
        for name in ("omega_L", "omega_R"):
            v = getattr(self, name)
            if not 0.0 < v < 0.5:
                raise ValueError(f"{name}={v} must lie in (0, 1/2)")

    def with_(self, **kw) -> "ExampleParams":
        return replace(self, **kw)


FIELDS = ("r_L", "s_R", "omega_L", "omega_R", "mu", "c")


def example_matrices(r_L: float, s_R: float, omega_L: float, omega_R: float):
    A_L = np.array([[2.0 * r_L * math.cos(2.0 * math.pi * omega_L), 1.0], [-r_L**2, 0.0]])
    A_R = np.array([[2.0 / s_R * math.cos(2.0 * math.pi * omega_R), 1.0], [-1.0 / s_R**2, 0.0]])
    return A_L, A_R


def build_example(p: ExampleParams) -> PwsMap:
    A_L, A_R = example_matrices(p.r_L, p.s_R, p.omega_L, p.omega_R)
    g_L = (PolyTerm(p.c, (2, 0), 0),) if p.c != 0.0 else ()
    return PwsMap(b=np.array([1.0, 0.0]), A_L=A_L, A_R=A_R, g_L=g_L, g_R=(), mu=p.mu)


def map_from_json(d: dict) -> PwsMap:
    """Build a map from either the raw schema or the ``{"family": "dns", ...}`` shorthand."""
    d = dict(d)
    if "family" in d:
        family = d.pop("family")
        if family != "dns":
            raise ValueError(f"unknown family {family!r}")
        unknown = set(d) - set(FIELDS)
        if unknown:
            raise ValueError(f"unknown key(s) in family description: {sorted(unknown)}")
        return build_example(ExampleParams(**{k: float(v) for k, v in d.items()}))
    allowed = {"N", "b", "A_L", "A_R", "g_L", "g_R", "mu"}
    unknown = set(d) - allowed
    if unknown:
        raise ValueError(f"unknown key(s) in map description: {sorted(unknown)}")
    fmap = PwsMap(
        b=np.array(d["b"], dtype=float),
        A_L=np.array(d["A_L"], dtype=float),
        A_R=np.array(d["A_R"], dtype=float),
        g_L=tuple(PolyTerm.from_json(t) for t in d.get("g_L", [])),
        g_R=tuple(PolyTerm.from_json(t) for t in d.get("g_R", [])),
        mu=float(d.get("mu", 0.0)),
    )
    if "N" in d and int(d["N"]) != fmap.N:
        raise ValueError(f"N={d['N']} does not match b of length {fmap.N}")
    return fmap


@dataclass(frozen=True)
class ParamPlane:
    """A two-parameter slice of the example family.

    ``x`` and ``y`` name the free :class:`ExampleParams` fields; ``ties`` maps
    further fields to the free field they copy (``{"omega_L": "omega_R"}``
    keeps the two rotation parameters equal).
    """

    base: ExampleParams = field(default_factory=ExampleParams)
    x: str = "omega_R"
    y: str = "s_R"
    ties: tuple[tuple[str, str], ...] = (("omega_L", "omega_R"),)

    def __post_init__(self):
        for name in (self.x, self.y):
            if name not in FIELDS or name == "mu":
                raise ValueError(f"cannot use {name!r} as a plane coordinate")
        for dst, src in self.ties:
            if dst not in FIELDS or src not in (self.x, self.y):
                raise ValueError(f"bad tie {dst!r} <- {src!r}")

    def params(self, px: float, py: float, mu: float | None = None) -> ExampleParams:
        vals = {self.x: px, self.y: py}
        for dst, src in self.ties:
            vals[dst] = vals[src]
        if mu is not None:
            vals["mu"] = mu
        return replace(self.base, **vals)

    def map_at(self, px: float, py: float, mu: float | None = None) -> PwsMap:
        """Build the map without the open-interval checks, so finite-difference
        probes may step just outside the nominal parameter box."""
        p = self.params_unchecked(px, py, mu)
        A_L, A_R = example_matrices(p["r_L"], p["s_R"], p["omega_L"], p["omega_R"])
        g_L = (PolyTerm(p["c"], (2, 0), 0),) if p["c"] != 0.0 else ()
        return PwsMap(np.array([1.0, 0.0]), A_L, A_R, g_L, (), p["mu"])

    def params_unchecked(self, px: float, py: float, mu: float | None = None) -> dict:
        vals = {k: getattr(self.base, k) for k in FIELDS}
        vals[self.x], vals[self.y] = float(px), float(py)
        for dst, src in self.ties:
            vals[dst] = vals[src]
        if mu is not None:
            vals["mu"] = float(mu)
        return vals

    @property
    def mu(self) -> float:
        return self.base.mu

    def with_base(self, **kw) -> "ParamPlane":
        return replace(self, base=replace(self.base, **kw))

    def to_json(self) -> dict:
        return {"base": {k: getattr(self.base, k) for k in FIELDS}, "x": self.x, "y": self.y,
                "ties": [list(t) for t in self.ties]}
