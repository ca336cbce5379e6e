"""Shrinking points of resonance tongues and the unfolding of their
nonlinear (codimension-three) versions in a two-parameter slice.

Coordinates throughout are the natural parameters of a :class:`ParamPlane`
(by default ``omega_R`` horizontally and ``s_R`` vertically).  Word variants
are ``S_check = flip(S, 0)`` and ``S_hat = flip(S, l*d)``.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import root
from scipy.spatial.distance import pdist

from .continuation import ArcSettings, Branch, ContinuationError, fd_jacobian, tangent, trace
from .cyclealg import (
    ConvergenceError,
    SingularMatrixError,
    check_admissible,
    cycle_matrices,
    is_singular,
    linear_cycle,
    newton_cycle,
    word_orbit,
)
from .mapmodel import ParamPlane
from .symbolic import SymbolWord, as_word

log = logging.getLogger(__name__)


class ShrinkError(RuntimeError):
    pass


class NoRootError(ShrinkError):
    pass


class HypothesisError(ShrinkError):
    pass


class NoLocusError(ShrinkError):
    pass


def _rot(word: SymbolWord):
    rp = word.rotation
    if rp is None:
        raise ValueError(f"{word} is not a rotational word; build it with rotational_word")
    if not 2 <= rp.l <= rp.n - 2:
        raise ValueError("shrinking points need 2 <= l <= n-2")
    return rp.l, rp.m, rp.n, rp.d


def variants(word: SymbolWord) -> dict[str, SymbolWord]:
    l, _, n, d = _rot(word)
    return {"S": word, "check": word.flip(0), "hat": word.flip(l * d % n)}


def _scaled_det(X: np.ndarray) -> float:
    return float(np.linalg.det(X)) / max(1.0, float(np.max(np.abs(X)))) ** X.shape[0]


def shrink_residual(plane: ParamPlane, word, px: float, py: float) -> tuple[float, float]:
    """``(det P_S, det P_{S^((l-1)d)})`` of the affine parts at ``(px, py)``."""
    word = as_word(word)
    l, _, n, d = _rot(word)
    fmap = plane.map_at(px, py, 0.0)
    return (cycle_matrices(fmap, word).detP,
            cycle_matrices(fmap, word.shift((l - 1) * d)).detP)


def _solve(F, u0, tol: float = 1e-12, what: str = "system") -> np.ndarray:
    """hybr root followed by a few plain Newton polishing steps."""
    with np.errstate(over="ignore", invalid="ignore"):
        return _solve_quiet(F, np.asarray(u0, dtype=float), tol, what)


def _solve_quiet(F, u0, tol, what):
    try:
        sol = root(F, u0, method="hybr", options={"xtol": 1e-14})
        u = sol.x
    except (ConvergenceError, SingularMatrixError, ValueError, np.linalg.LinAlgError) as exc:
        raise ShrinkError(f"{what}: {exc}") from exc
    for _ in range(4):
        r = np.asarray(F(u))
        if not np.all(np.isfinite(r)):
            break
        if np.max(np.abs(r)) <= tol * 1e-2:
            break
        try:
            u = u - np.linalg.solve(fd_jacobian(F, u, 1e-7), r)
        except np.linalg.LinAlgError:
            break
    r = np.asarray(F(u))
    res = float(np.max(np.abs(r))) if np.all(np.isfinite(r)) else np.inf
    if res > tol:
        raise ShrinkError(f"{what} did not converge (residual {res:.2e})")
    return u


# ---------------------------------------------------------------------------
# shrinking point


@dataclass
class ShrinkingPointReport:
    word: SymbolWord
    plane: ParamPlane
    location: tuple[float, float]
    y_points: np.ndarray
    t_all: np.ndarray
    delta_check: float
    delta_hat: float
    k0: float
    k0_tilde: float
    k0_pinned: float
    k0_richardson_rel: float
    residuals: dict
    sign_pattern: bool
    min_distance: float
    admissible: bool

    @property
    def rot(self):
        return _rot(self.word)

    @property
    def ld(self) -> int:
        l, _, n, d = self.rot
        return l * d % n

    def t(self, key: str) -> float:
        l, _, n, d = self.rot
        idx = {"0": 0, "d": d, "(l-1)d": (l - 1) * d, "ld": l * d,
               "(l+1)d": (l + 1) * d, "-d": -d}[key]
        return float(self.t_all[idx % n])

    @property
    def t_values(self) -> dict[str, float]:
        return {k: self.t(k) for k in ("0", "d", "(l-1)d", "ld", "(l+1)d", "-d")}

    @property
    def sign_convention_holds(self) -> bool:
        """Whether ``sgn k0 = sgn delta_check`` (resonance for mu > 0 in the
        standard arrangement)."""
        return bool(np.sign(self.k0) == np.sign(self.delta_check))

    @property
    def orientation(self) -> str:
        if self.k0 == 0.0:
            return "linear"
        return "standard" if self.sign_convention_holds else "mirrored"

    def to_json(self) -> dict:
        l, m, n, d = self.rot
        return {
            "word": str(self.word), "l": l, "m": m, "n": n, "d": d,
            "plane": self.plane.to_json(),
            "location": {self.plane.x: self.location[0], self.plane.y: self.location[1]},
            "y_points": self.y_points.tolist(),
            "t_all": self.t_all.tolist(),
            "t_values": self.t_values,
            "delta_check": self.delta_check,
            "delta_hat": self.delta_hat,
            "k0": self.k0,
            "k0_tilde": self.k0_tilde,
            "k0_pinned": self.k0_pinned,
            "k0_richardson_rel": self.k0_richardson_rel,
            "sign_convention_holds": self.sign_convention_holds,
            "orientation": self.orientation,
            "residuals": self.residuals,
            "sign_pattern": self.sign_pattern,
            "min_distance": self.min_distance,
            "admissible": self.admissible,
            "delta_ratio_residual": delta_ratio_residual(self),
        }


def _on_domain_edge(plane: ParamPlane, px: float, py: float, eps: float = 1e-6) -> bool:
    vals = plane.params_unchecked(px, py)
    for name in ("r_L", "s_R"):
        if not eps < vals[name] < 1 - eps:
            return True
    for name in ("omega_L", "omega_R"):
        if not eps < vals[name] < 0.5 - eps:
            return True
    return False


def _axis_point(plane: ParamPlane, word: SymbolWord, p0, mu: float, x_seed=None):
    """Parameters where the check-cycle has points 0 and ld on the switching
    manifold, i.e. the common point of the four boundaries, at this ``mu``.
    Returns ``(u, params)`` with ``u = (x_check_0, px, py)``."""
    var = variants(word)
    l, _, n, d = _rot(word)
    ld = l * d % n
    N = 2 if x_seed is None else len(x_seed)
    if x_seed is None:
        lin = plane.map_at(p0[0], p0[1], 1.0).linear_part()
        x_seed = mu * linear_cycle(lin, var["check"]).points[0]
        N = len(x_seed)
    scale = 1.0 / max(abs(mu), 1e-300)

    def F(u):
        x, px, py = u[:N], u[N], u[N + 1]
        pts, end, _ = word_orbit(plane.map_at(px, py, mu), var["check"], x)
        return np.concatenate([end - x, [pts[0, 0], pts[ld, 0]]]) * scale

    u = _solve(F, np.concatenate([x_seed, p0]), tol=1e-11, what=f"common point at mu={mu}")
    return u, (float(u[N]), float(u[N + 1]))


def _fold_det(plane, word, px, py, mu, x):
    _, _, J = word_orbit(plane.map_at(px, py, mu), word, x)
    return float(np.linalg.det(np.eye(len(x)) - J))


def _k0_along_axis(plane, word, p0, h):
    """Centered differences in mu of det(I - Df^S) at the check-cycle points 0
    and d, following the common boundary point as mu varies."""
    _, _, n, d = _rot(word)
    var = variants(word)
    vals = {}
    for mu in (h, -h):
        u, (px, py) = _axis_point(plane, word, p0, mu)
        N = len(u) - 2
        pts, _, _ = word_orbit(plane.map_at(px, py, mu), var["check"], u[:N])
        vals[mu] = (_fold_det(plane, word, px, py, mu, pts[0]),
                    _fold_det(plane, word, px, py, mu, pts[d % n]))
    return ((vals[h][0] - vals[-h][0]) / (2 * h), (vals[h][1] - vals[-h][1]) / (2 * h))


def build_report(plane: ParamPlane, word, p, k0_step: float = 1e-4) -> ShrinkingPointReport:
    """Assemble the report at a root ``p`` of :func:`shrink_residual`."""
    word = as_word(word)
    l, m, n, d = _rot(word)
    ld = l * d % n
    var = variants(word)
    px, py = float(p[0]), float(p[1])
    lin = plane.map_at(px, py, 1.0).linear_part()
    try:
        cyc = linear_cycle(lin, var["check"])
    except SingularMatrixError as exc:
        raise HypothesisError(f"I - M of {var['check']} is singular: {exc}") from exc
    y, t = cyc.points, cyc.s_values
    eye = np.eye(lin.N)
    cm = {k: cycle_matrices(lin, w) for k, w in var.items()}
    d_check = cm["check"].detIminusM
    d_hat = cm["hat"].detIminusM
    for name, val, key in (("delta_check", d_check, "check"), ("delta_hat", d_hat, "hat")):
        if is_singular(eye - cm[key].M, val):
            raise HypothesisError(f"{name} = {val:.3e} is singular")
    detP = [abs(_scaled_det(cycle_matrices(lin, word.shift(i)).P)) for i in range(n)]
    resid = {
        "det_P_S": abs(_scaled_det(cm["S"].P)),
        "det_P_S_shift": abs(_scaled_det(cycle_matrices(lin, word.shift((l - 1) * d)).P)),
        "t_0": abs(float(t[0])),
        "t_ld": abs(float(t[ld])),
        "det_I_minus_M_S": abs(_scaled_det(eye - cm["S"].M)),
        "max_det_P_cyclic": max(detP),
    }
    adm, _ = check_admissible(word, t, tol_zero=1e-8)
    others = [i for i in range(n) if i not in (0, ld)]
    adm = adm and all(abs(t[i]) > 1e-8 for i in others)
    dist = min(np.linalg.norm(y[i] - y[j]) for i, j in itertools.combinations(range(n), 2))
    tv = lambda i: float(t[i % n])
    sign_ok = tv(d) < 0 and tv((l - 1) * d) < 0 and tv(-d) > 0 and tv((l + 1) * d) > 0

    k0 = k0_tilde = k0_pinned = 0.0
    rich = 0.0
    if not plane.map_at(px, py).is_linear:
        a, at = _k0_along_axis(plane, word, (px, py), k0_step)
        b, bt = _k0_along_axis(plane, word, (px, py), k0_step / 2)
        rich = abs(a - b) / max(abs(b), 1e-300)
        k0, k0_tilde = (4 * b - a) / 3, (4 * bt - at) / 3
        h = k0_step
        dets = []
        for mu in (h, -h):
            f = plane.map_at(px, py, mu)
            x = newton_cycle(f, var["check"], mu * y[0]).points[0]
            dets.append(_fold_det(plane, word, px, py, mu, x))
        k0_pinned = (dets[0] - dets[1]) / (2 * h)
    return ShrinkingPointReport(word, plane, (px, py), y, t, d_check, d_hat, k0, k0_tilde,
                                k0_pinned, rich, resid, sign_ok, float(dist), adm)


def find_shrinking_point(
    plane: ParamPlane,
    word,
    box: tuple[tuple[float, float], tuple[float, float]],
    grid: int = 5,
    tol: float = 1e-12,
) -> ShrinkingPointReport:
    """Root of :func:`shrink_residual` inside ``box`` whose cycle is admissible.

    Newton (hybr) is started from the box centre and then from a ``grid x grid``
    lattice of seeds.  Roots on the edge of the parameter domain (terminating
    shrinking points, e.g. ``s_R -> 1``) are discarded, as are roots whose
    renormalized cycle is not admissible.
    """
    word = as_word(word)
    _rot(word)
    (x0, x1), (y0, y1) = box
    centre = np.array([(x0 + x1) / 2, (y0 + y1) / 2])
    span = np.array([x1 - x0, y1 - y0])

    def F(p):
        a, b = shrink_residual(plane, word, p[0], p[1])
        return [a, b]

    seeds = [centre] + [np.array([x0 + span[0] * (i + 0.5) / grid, y0 + span[1] * (j + 0.5) / grid])
                        for j in range(grid) for i in range(grid)]
    roots, rejected = [], []
    for s in seeds:
        try:
            p = _solve(F, s, tol=tol, what="shrinking point")
        except ShrinkError:
            continue
        if not (x0 <= p[0] <= x1 and y0 <= p[1] <= y1):
            continue
        if any(np.max(np.abs(p - q)) < 1e-8 for q in roots + rejected):
            continue
        if _on_domain_edge(plane, *p):
            log.info("discarding terminating root at %s", p)
            rejected.append(p)
            continue
        roots.append(p)
    if not roots:
        raise NoRootError(f"no non-terminating shrinking point for {word} in box {box}")
    roots.sort(key=lambda p: float(np.linalg.norm((p - centre) / span)))
    failures = []
    for p in roots:
        try:
            rep = build_report(plane, word, p)
        except HypothesisError as exc:
            failures.append(str(exc))
            continue
        if rep.admissible:
            return rep
        failures.append(f"cycle at {p.tolist()} is not admissible")
    raise HypothesisError("; ".join(failures))


def delta_ratio_residual(report: ShrinkingPointReport) -> float:
    """Relative defect of ``d_check/d_hat = -t_d t_(l-1)d / (t_-d t_(l+1)d)``."""
    tv = report.t_values
    den = tv["-d"] * tv["(l+1)d"]
    for k in ("d", "(l-1)d", "-d", "(l+1)d"):
        if abs(tv[k]) < 1e-12:
            raise ZeroDivisionError(f"t_{k} = {tv[k]:.3e} is too small")
    lhs = report.delta_check / report.delta_hat
    return abs(lhs + tv["d"] * tv["(l-1)d"] / den) / abs(lhs)


# ---------------------------------------------------------------------------
# unfolding at fixed mu > 0

CURVES = {
    # curve id: (word variant, designated point key)
    "check_0": ("check", "0"),
    "check_ld": ("check", "ld"),
    "hat_ld": ("hat", "ld"),
    "hat_0": ("hat", "0"),
}


@dataclass
class UnfoldSettings:
    arc: ArcSettings = field(default_factory=ArcSettings)
    mu_start: float = 1.0 / 64
    radius_factor: float = 1.5
    probe_fracs: tuple[float, ...] = (0.3, 0.5, 0.7)
    # midpoints of the O-A and O-B boundary segments at these fractions; the
    # saddle-node arc comes closest to O near the fraction 1/2
    psi3_fracs: tuple[float, ...] = (0.15, 0.25, 0.35)
    tol_zero: float = 1e-10
    tangency_tol: float = 1e-3
    common_point_tol: float = 1e-6
    fit_points: int = 10


class _Systems:
    """Extended systems in the unknowns ``u = (x, px, py)`` at fixed mu."""

    def __init__(self, plane: ParamPlane, word: SymbolWord, mu: float):
        self.plane, self.mu = plane, mu
        self.var = variants(word)
        l, _, n, d = _rot(word)
        self.n, self.d, self.l = n, d, l
        self.idx = {"0": 0, "d": d, "ld": l * d % n, "(l-1)d": (l - 1) * d % n, "-d": (-d) % n}
        self.N = 2
        self.scale = 1.0 / mu

    def orbit(self, key, u):
        N = self.N
        return word_orbit(self.plane.map_at(u[N], u[N + 1], self.mu), self.var[key], u[:N])

    def boundary(self, curve: str):
        key, pt = CURVES[curve]
        j = self.idx[pt]

        def F(u):
            pts, end, _ = self.orbit(key, u)
            return np.concatenate([end - u[: self.N], [pts[j, 0]]]) * self.scale
        return F

    def fold(self):
        def F(u):
            _, end, J = self.orbit("S", u)
            return np.concatenate([(end - u[: self.N]) * self.scale,
                                   [np.linalg.det(np.eye(self.N) - J)]])
        return F

    def fold_on(self, curve: str, start: str):
        """Fold of the S-cycle whose start is point ``start`` of the variant
        cycle, on the boundary ``curve``."""
        key, pt = CURVES[curve]
        j, k = self.idx[pt], self.idx[start]

        def F(u):
            pts, end, _ = self.orbit(key, u)
            _, _, J = self.orbit("S", np.concatenate([pts[k], u[self.N:]]))
            return np.concatenate([(end - u[: self.N]) * self.scale, [pts[j, 0] * self.scale,
                                   np.linalg.det(np.eye(self.N) - J)]])
        return F

    def common(self):
        F0 = self.boundary("check_0")
        j = self.idx["ld"]

        def F(u):
            pts, _, _ = self.orbit("check", u)
            return np.append(F0(u), pts[j, 0] * self.scale)
        return F


def _mu_path(F_of_mu, u_start, mu_start, mu_target, what, scale_x=2):
    """Continue a root in mu from ``mu_start`` to ``mu_target``; the state part
    ``u[:scale_x]`` scales with mu and the rest is extrapolated linearly."""
    mu, u = mu_start, np.asarray(u_start, float)
    prev = None
    ratio = 2.0
    while mu < mu_target * (1 - 1e-14):
        new_mu = min(mu * ratio, mu_target)
        pred = u.copy()
        pred[:scale_x] *= new_mu / mu
        if prev is not None:
            pm, pu = prev
            pred[scale_x:] = u[scale_x:] + (u[scale_x:] - pu[scale_x:]) * (new_mu - mu) / (mu - pm)
        try:
            nu = _solve(F_of_mu(new_mu), pred, tol=1e-11, what=what)
        except ShrinkError:
            ratio = 1 + (ratio - 1) / 2
            if ratio < 1.01:
                raise
            continue
        prev, mu, u = (mu, u), new_mu, nu
    return u


@dataclass
class Probe:
    region: str
    point: tuple[float, float]
    tag_ok: bool
    check_admissible: bool
    hat_admissible: bool
    s_cycles: list  # (admissible, det(I - Df^S), x0) for distinct nearby S-cycles
    ok: bool

    def to_json(self) -> dict:
        return {"region": self.region, "point": list(self.point), "tag_ok": self.tag_ok,
                "check_admissible": self.check_admissible, "hat_admissible": self.hat_admissible,
                "s_cycles": [{"admissible": a, "det_I_minus_Df": dt, "x0": list(map(float, x))}
                             for a, dt, x in self.s_cycles],
                "ok": self.ok}


@dataclass
class UnfoldingReport:
    mu: float
    shrinking_point: ShrinkingPointReport
    orientation: str
    boundary_curves: dict
    sn_curve: np.ndarray
    sn_residuals: np.ndarray
    intersection_O: tuple
    O_spread: float
    point_A: tuple
    point_B: tuple
    A_curve: str
    B_curve: str
    tangency_angles: dict
    closest_approach: dict
    theta1: float
    theta2: float
    theta_exact: dict
    region_samples: list
    persistence_checks: list
    sn_checks: list
    coefficient_fits: dict
    diameter: float
    settings: UnfoldSettings

    @property
    def probes_ok(self) -> bool:
        return all(p.ok for p in self.region_samples) and all(c["ok"] for c in self.persistence_checks)

    @property
    def ok(self) -> bool:
        return (self.O_spread <= self.settings.common_point_tol
                and max(self.tangency_angles.values()) <= self.settings.tangency_tol
                and self.theta1 < self.theta2 and self.probes_ok
                and all(c["ok"] for c in self.sn_checks))

    def curve_rows(self):
        """``(curve_id, param_x, param_y, residual)`` rows for CSV output."""
        for cid, (pts, res) in self.boundary_curves.items():
            for p, r in zip(pts, res):
                yield cid, float(p[0]), float(p[1]), float(r)
        for p, r in zip(self.sn_curve, self.sn_residuals):
            yield "saddle_node", float(p[0]), float(p[1]), float(r)

    def to_json(self) -> dict:
        return {
            "mu": self.mu,
            "shrinking_point": self.shrinking_point.to_json(),
            "orientation": self.orientation,
            "intersection_O": list(self.intersection_O),
            "O_spread": self.O_spread,
            "A": {"point": list(self.point_A), "curve": self.A_curve},
            "B": {"point": list(self.point_B), "curve": self.B_curve},
            "tangency_angles": self.tangency_angles,
            "closest_approach": self.closest_approach,
            "theta1": self.theta1,
            "theta2": self.theta2,
            "theta_exact": self.theta_exact,
            "diameter": self.diameter,
            "boundary_curves": {k: {"points": v[0].tolist(), "residuals": v[1].tolist()}
                                for k, v in self.boundary_curves.items()},
            "sn_curve": {"points": self.sn_curve.tolist(), "residuals": self.sn_residuals.tolist()},
            "region_samples": [p.to_json() for p in self.region_samples],
            "persistence_checks": self.persistence_checks,
            "sn_checks": self.sn_checks,
            "coefficient_fits": self.coefficient_fits,
            "probes_ok": self.probes_ok,
            "ok": self.ok,
        }


def _inside(poly: np.ndarray, p) -> bool:
    """Even-odd rule point-in-polygon test."""
    x, y = p
    inside = False
    for (x1, y1), (x2, y2) in zip(poly, np.roll(poly, -1, axis=0)):
        if (y1 > y) != (y2 > y) and x < x1 + (y - y1) * (x2 - x1) / (y2 - y1):
            inside = not inside
    return inside


def _ray_angle(a, b) -> float:
    """Angle in [0, pi] between two planar directions."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(abs(np.arctan2(a[0] * b[1] - a[1] * b[0], a @ b)))


def _line_angle(a, b) -> float:
    """Angle in [0, pi/2] between two undirected lines."""
    t = _ray_angle(a, b)
    return min(t, np.pi - t)


def _at_distance(poly: np.ndarray, O, r: float) -> np.ndarray:
    """First point of a polyline leaving ``O`` at distance ``r`` (interpolated)."""
    dist = np.linalg.norm(poly - O, axis=1)
    k = int(np.argmax(dist >= r))
    if dist[k] < r:
        raise ShrinkError("polyline too short for the requested probe distance")
    if k == 0:
        return poly[0]
    w = (r - dist[k - 1]) / (dist[k] - dist[k - 1])
    return poly[k - 1] + w * (poly[k] - poly[k - 1])


def intersection_point(plane: ParamPlane, report: ShrinkingPointReport, mu: float,
                       settings: UnfoldSettings = UnfoldSettings()) -> dict:
    """Common point O of the four boundaries at this ``mu``.

    For a nonlinear family the root is continued in mu from
    ``settings.mu_start``; a piecewise-linear family has O at the shrinking
    point for every mu > 0.
    """
    if mu <= 0:
        raise ValueError("the unfolding is computed for mu > 0")
    sysm = _Systems(plane, report.word, mu)
    p0 = np.array(report.location)
    if plane.map_at(*p0).is_linear or mu <= settings.mu_start:
        u, _ = _axis_point(plane, report.word, p0, mu)
    else:
        u0, _ = _axis_point(plane, report.word, p0, settings.mu_start)
        u = _mu_path(lambda m: _Systems(plane, report.word, m).common(), u0,
                     settings.mu_start, mu, "common point")
    N = sysm.N
    pts, _, _ = sysm.orbit("check", u)
    # at O the check- and hat-cycles coincide (both collision points are on s = 0)
    return {"u_check": u, "u_hat": u.copy(), "point": u[N:].copy(), "sys": sysm}


def _pair_intersections(sysm: _Systems, O: dict, offset: float) -> list:
    """Pairwise intersections of the four boundary curves.

    Each pair is solved from a seed displaced from O by ``offset`` in
    parameter space, so agreement of the six roots is a real check.
    """
    N = sysm.N
    out = []
    angles = np.linspace(0.0, 2 * np.pi, 7)[:-1] + 0.3
    for (c1, c2), ang in zip(itertools.combinations(CURVES, 2), angles):
        F1, F2 = sysm.boundary(c1), sysm.boundary(c2)
        u1 = O["u_check"] if CURVES[c1][0] == "check" else O["u_hat"]
        u2 = O["u_check"] if CURVES[c2][0] == "check" else O["u_hat"]

        def F(v, F1=F1, F2=F2):
            p = v[2 * N:]
            return np.concatenate([F1(np.concatenate([v[:N], p])), F2(np.concatenate([v[N:2 * N], p]))])

        shift = offset * np.array([np.cos(ang), np.sin(ang)])
        v = _solve(F, np.concatenate([u1[:N], u2[:N], u1[N:] + shift]), tol=1e-11,
                   what=f"intersection {c1}/{c2}")
        out.append(((c1, c2), v[2 * N:]))
    return out


def border_collision_trace(plane: ParamPlane, report: ShrinkingPointReport, curve: str, mu: float,
                           settings: UnfoldSettings = UnfoldSettings(), O: dict | None = None,
                           radius: float = 0.05):
    """Continue the boundary ``curve`` from O in both directions.

    ``curve`` is one of ``check_0`` (eta = 0), ``check_ld`` (nu = 0),
    ``hat_ld`` (eta = phi_1) and ``hat_0`` (nu = phi_2).  Each half stops
    once it is ``radius`` away from O.  Returns ``(halves, tangent_at_O)``,
    the halves being :class:`Branch` objects of ``u = (x, px, py)``.
    """
    if O is None:
        O = intersection_point(plane, report, mu, settings)
    sysm = O["sys"]
    N = sysm.N
    F = sysm.boundary(curve)
    u0 = O["u_check"] if CURVES[curve][0] == "check" else O["u_hat"]
    t0 = tangent(fd_jacobian(F, u0, settings.arc.fd_step))
    p_O = u0[N:]
    halves = []
    for sgn in (1.0, -1.0):
        br = trace(F, u0, sgn * t0, settings.arc,
                   stop=lambda u: np.linalg.norm(u[N:] - p_O) > radius)
        if br.stopped_by != "stop condition":
            raise ContinuationError(f"trace of {curve} ended early: {br.stopped_by}")
        halves.append(br)
    tp = t0[N:] / np.linalg.norm(t0[N:])
    return halves, tp


def _tangency_points(plane, report, mu, settings):
    """Points where the saddle-node locus touches the two boundaries adjacent
    to it, each as ``(curve, u_variant, u_S)``."""
    if report.orientation == "standard":
        spec = {"A": ("check_0", "0"), "B": ("hat_0", "d")}
    else:
        spec = {"A": ("check_ld", "d"), "B": ("hat_ld", "0")}
    p0 = np.array(report.location)
    y0 = report.y_points[0]
    out = {}
    for name, (curve, start) in spec.items():
        u0 = np.concatenate([settings.mu_start * y0, p0])
        F_of = lambda m, c=curve, s=start: _Systems(plane, report.word, m).fold_on(c, s)
        u0 = _solve(F_of(settings.mu_start), u0, tol=1e-11, what=f"tangency {name}")
        u = u0 if mu <= settings.mu_start else _mu_path(F_of, u0, settings.mu_start, mu,
                                                         f"tangency {name}")
        sysm = _Systems(plane, report.word, mu)
        pts, _, _ = sysm.orbit(CURVES[curve][0], u)
        uS = np.concatenate([pts[sysm.idx[start]], u[sysm.N:]])
        out[name] = (curve, u, uS)
    return out


def saddle_node_trace(plane: ParamPlane, report: ShrinkingPointReport, mu: float,
                      settings: UnfoldSettings = UnfoldSettings(), tangency=None) -> Branch:
    """The admissible saddle-node arc of S-cycles, continued from A to B."""
    if plane.map_at(*report.location).is_linear:
        raise NoLocusError("a piecewise-linear family has no saddle-node locus; "
                           "it collapses onto the shrinking point")
    if tangency is None:
        tangency = _tangency_points(plane, report, mu, settings)
    sysm = _Systems(plane, report.word, mu)
    N = sysm.N
    F = sysm.fold()
    _, _, uA = tangency["A"]
    _, _, uB = tangency["B"]
    pA, pB = uA[N:], uB[N:]
    AB = float(np.linalg.norm(pB - pA))
    if AB == 0.0:
        raise NoLocusError("A and B coincide")
    jB = sysm.idx["-d"] if report.orientation == "standard" else sysm.idx["ld"]
    t = tangent(fd_jacobian(F, uA, settings.arc.fd_step))
    if t[N:] @ (pB - pA) < 0:
        t = -t
    arc = ArcSettings(**{**settings.arc.__dict__, "max_step": min(settings.arc.max_step, AB / 40)})
    ref = {}

    def stop(u):
        pts, _, _ = sysm.orbit("S", u)
        s = pts[jB, 0]
        if "sign" not in ref:
            ref["sign"] = np.sign(s)
            return False
        return np.sign(s) != ref["sign"] or np.linalg.norm(u[N:] - pA) > 4 * AB

    br = trace(F, uA, t, arc, stop=stop)
    if br.stopped_by != "stop condition" or np.linalg.norm(br.points[-1][N:] - pB) > 0.1 * AB:
        raise NoLocusError(f"saddle-node trace did not reach B ({br.stopped_by})")
    br.points[-1] = uB.copy()
    br.tangents[-1] = tangent(fd_jacobian(F, uB, settings.arc.fd_step), br.tangents[-2])
    return br


def _lsq_direction(points: np.ndarray, O: np.ndarray, k: int) -> np.ndarray:
    """Least-squares direction, through O, of the ``k`` samples nearest O."""
    v = points - O
    dist = np.linalg.norm(v, axis=1)
    sel = v[np.argsort(dist)[1:k + 1]]
    _, _, vt = np.linalg.svd(sel)
    t = vt[0]
    return t if t @ sel.mean(axis=0) > 0 else -t


class _Prober:
    """Cycles of the three word variants at arbitrary parameters, seeded from
    the nearest traced boundary samples."""

    def __init__(self, sysm: _Systems, seeds_check: np.ndarray, seeds_hat: np.ndarray):
        self.sysm = sysm
        self.seeds = {"check": seeds_check, "hat": seeds_hat}

    def _map(self, p):
        return self.sysm.plane.map_at(p[0], p[1], self.sysm.mu)

    def variant(self, key: str, p):
        N = self.sysm.N
        S = self.seeds[key]
        order = np.argsort(np.linalg.norm(S[:, N:] - np.asarray(p), axis=1))
        for k in order[:5]:
            try:
                return newton_cycle(self._map(p), self.sysm.var[key], S[k, :N])
            except (ConvergenceError, SingularMatrixError):
                continue
        raise ShrinkError(f"no {key}-cycle found at {p}")

    def s_cycles(self, p, chk=None, extra_seeds=(), radius=None):
        """Distinct S-cycles found from seeds along the line through the
        check-cycle points 0 and d (the approximate fold direction)."""
        if chk is None:
            chk = self.variant("check", p)
        x0, xd = chk.points[0], chk.points[self.sysm.idx["d"]]
        span = np.linalg.norm(xd - x0)
        radius = 3 * span if radius is None else radius
        seeds = [x0 + lam * (xd - x0) for lam in np.linspace(-0.5, 1.5, 9)] + list(extra_seeds)
        fmap = self._map(p)
        found = []
        for s in seeds:
            try:
                c = newton_cycle(fmap, self.sysm.var["S"], s)
            except (ConvergenceError, SingularMatrixError):
                continue
            if np.linalg.norm(c.points[0] - x0) > radius:
                continue
            if all(np.linalg.norm(c.points[0] - f.points[0]) > 1e-8 * max(span, 1e-12) for f in found):
                found.append(c)
        if len(found) < 2:
            found += self._deflated(fmap, seeds, found, x0, radius, span)
        return found

    def _deflated(self, fmap, seeds, found, x0, radius, span):
        word = self.sysm.var["S"]
        roots = [f.points[0] for f in found]
        if not roots:
            return []

        def G(x):
            _, end, _ = word_orbit(fmap, word, x)
            m = 1.0
            for r in roots:
                m *= 1.0 + span ** 2 / max(float(np.sum((x - r) ** 2)), 1e-300)
            return (end - x) * m

        extra = []
        for s in seeds:
            try:
                sol = root(G, s, method="hybr")
                c = newton_cycle(fmap, word, sol.x)
            except (ConvergenceError, SingularMatrixError, ValueError):
                continue
            if np.linalg.norm(c.points[0] - x0) <= radius and all(
                    np.linalg.norm(c.points[0] - r) > 1e-8 * max(span, 1e-12) for r in roots):
                extra.append(c)
                break
        return extra


def _orbit_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Distance between two periodic orbits as point sets (best cyclic alignment)."""
    n = len(a)
    return min(float(np.max(np.linalg.norm(np.roll(a, -k, axis=0) - b, axis=1))) for k in range(n))


def _region_probe(prober: _Prober, region: str, p, poly, tol_zero) -> Probe:
    p = (float(p[0]), float(p[1]))
    sysm = prober.sysm
    chk = prober.variant("check", p)
    hat = prober.variant("hat", p)
    cyc = prober.s_cycles(p, chk, extra_seeds=[hat.points[sysm.idx["d"]]])
    if region == "Psi1":
        tag = chk.s_values[0] > 0 and chk.s_values[sysm.idx["ld"]] > 0
    elif region == "Psi2":
        tag = hat.s_values[0] < 0 and hat.s_values[sysm.idx["ld"]] < 0
    else:
        tag = _inside(poly, p)
    adm = [c for c in cyc if c.admissible]
    if region == "Psi1":
        ok = chk.admissible and len(adm) >= 1
    elif region == "Psi2":
        ok = hat.admissible and len(adm) >= 1
    else:
        dets = [c.det_I_minus_J for c in adm]
        ok = len(adm) >= 2 and min(dets) < 0 < max(dets)
    return Probe(region, p, bool(tag), chk.admissible, hat.admissible,
                 [(c.admissible, c.det_I_minus_J, c.points[0]) for c in cyc], bool(tag and ok))


def _fit_phi(prober: _Prober, samples: np.ndarray, mu: float, along: str):
    """Fit ``eta/nu = a' + b nu`` (``along='nu'``, hat_ld curve) or
    ``nu/eta = a' + b eta`` (``along='eta'``, hat_0 curve) from check-cycle
    s-values at curve samples, with eta = s_0/mu and nu = s_ld/mu."""
    N = prober.sysm.N
    ld = prober.sysm.idx["ld"]
    xs, ys = [], []
    for u in samples:
        try:
            c = newton_cycle(prober._map(u[N:]), prober.sysm.var["check"], u[:N])
        except (ConvergenceError, SingularMatrixError):
            continue
        eta, nu = c.s_values[0] / mu, c.s_values[ld] / mu
        ind, dep = (nu, eta) if along == "nu" else (eta, nu)
        if abs(ind) > 1e-3:
            xs.append(ind)
            ys.append(dep / ind)
    xs, ys = np.array(xs), np.array(ys)
    coef = np.polyfit(xs, ys, 2)
    return {"intercept": float(coef[2]), "slope": float(coef[1]), "samples": int(len(xs))}


def unfold_verify(plane: ParamPlane, report: ShrinkingPointReport, mu: float,
                  settings: UnfoldSettings = UnfoldSettings()) -> UnfoldingReport:
    """Boundaries, saddle-node arc, angles and region probes at fixed ``mu``."""
    if plane.map_at(*report.location).is_linear:
        raise NoLocusError("the unfolding needs a nonlinear family (c != 0)")
    O = intersection_point(plane, report, mu, settings)
    sysm = O["sys"]
    N = sysm.N
    pO = O["point"]
    tang = _tangency_points(plane, report, mu, settings)
    A_curve, uA_var, uA = tang["A"]
    B_curve, uB_var, uB = tang["B"]
    pA, pB = uA[N:], uB[N:]
    pairs = _pair_intersections(sysm, O, 0.02 * min(np.linalg.norm(pA - pO), np.linalg.norm(pB - pO)))
    spread = max(float(np.linalg.norm(q - pO)) for _, q in pairs)
    radius = settings.radius_factor * max(np.linalg.norm(pA - pO), np.linalg.norm(pB - pO))
    arc = ArcSettings(**{**settings.arc.__dict__, "max_step": min(settings.arc.max_step, radius / 25)})
    tset = UnfoldSettings(**{**settings.__dict__, "arc": arc})

    halves, exact_t = {}, {}
    for cid in CURVES:
        halves[cid], exact_t[cid] = border_collision_trace(plane, report, cid, mu, tset, O, radius)

    def half_dir(br):
        return np.asarray(br.points[1][N:]) - pO

    # the halves of each curve that bound the regions
    rays = {}
    for cid, test in (("check_0", lambda u: sysm.orbit("check", u)[0][sysm.idx["ld"], 0] > 0),
                      ("check_ld", lambda u: u[0] > 0)):
        h0, h1 = halves[cid]
        rays[cid] = h0 if test(h0.points[min(3, len(h0.points) - 1)]) else h1
    for cid, opp in (("hat_ld", "check_0"), ("hat_0", "check_ld")):
        h0, h1 = halves[cid]
        rays[cid] = h0 if half_dir(h0) @ half_dir(rays[opp]) < 0 else h1

    P = {cid: br.array()[:, N:] for cid, br in rays.items()}
    lsq = {cid: _lsq_direction(P[cid], pO, settings.fit_points) for cid in rays}
    exact = {cid: exact_t[cid] * np.sign(exact_t[cid] @ lsq[cid]) for cid in rays}
    wedge_a = ("check_0", "hat_0")
    wedge_b = ("check_ld", "hat_ld")
    w1, w2 = (wedge_a, wedge_b) if A_curve == "check_0" else (wedge_b, wedge_a)
    theta1 = _ray_angle(lsq[w1[0]], lsq[w1[1]])
    theta2 = _ray_angle(lsq[w2[0]], lsq[w2[1]])
    theta_exact = {"theta1": _ray_angle(exact[w1[0]], exact[w1[1]]),
                   "theta2": _ray_angle(exact[w2[0]], exact[w2[1]]),
                   "psi1": _ray_angle(exact["check_0"], exact["check_ld"]),
                   "psi2": _ray_angle(exact["hat_ld"], exact["hat_0"])}

    sn = saddle_node_trace(plane, report, mu, settings, tang)
    U = sn.array()
    sn_pts = U[:, N:]
    Ffold = sysm.fold()
    sn_res = np.array([float(np.max(np.abs(Ffold(u) * np.r_[np.full(N, mu), 1.0]))) for u in U])

    # tangency: the saddle-node arc against the boundary it touches
    tangency_angles, closest = {}, {}
    for name, curve, u_var, uS, idx in (("A", A_curve, uA_var, uA, 0), ("B", B_curve, uB_var, uB, -1)):
        tb = tangent(fd_jacobian(sysm.boundary(curve), u_var, settings.arc.fd_step))[N:]
        ts = np.asarray(sn.tangents[idx])[N:]
        tangency_angles[name] = _line_angle(tb, ts)
        poly = P[curve]
        closest[name] = float(min(np.min(np.linalg.norm(poly - q, axis=1)) for q in sn_pts))

    def upto(cid, target):
        pts = P[cid]
        k = int(np.argmin(np.linalg.norm(pts - target, axis=1)))
        return np.vstack([pts[:k], target])

    polygon = np.vstack([upto(A_curve, pA), sn_pts[1:-1], upto(B_curve, pB)[::-1]])

    seeds_check = np.vstack([br.array() for c in ("check_0", "check_ld") for br in halves[c]])
    seeds_hat = np.vstack([br.array() for c in ("hat_ld", "hat_0") for br in halves[c]])
    prober = _Prober(sysm, seeds_check, seeds_hat)

    rmin = min(np.linalg.norm(pA - pO), np.linalg.norm(pB - pO))
    samples = []
    for f in settings.probe_fracs:
        r = f * rmin
        samples.append(("Psi1", (_at_distance(P["check_0"], pO, r) + _at_distance(P["check_ld"], pO, r)) / 2))
        samples.append(("Psi2", (_at_distance(P["hat_ld"], pO, r) + _at_distance(P["hat_0"], pO, r)) / 2))
    for f in settings.psi3_fracs:
        samples.append(("Psi3", (_at_distance(P[A_curve], pO, f * np.linalg.norm(pA - pO))
                                 + _at_distance(P[B_curve], pO, f * np.linalg.norm(pB - pO))) / 2))
    region_samples = [_region_probe(prober, reg, p, polygon, settings.tol_zero) for reg, p in samples]

    # crossing the O-A and O-B boundary segments: the variant cycle on the outer
    # side continues as one of the two S-cycles inside
    persistence = []
    for name, curve, key, pX, outer in (("A", A_curve, "check", pA, "Psi1"), ("B", B_curve, "hat", pB, "Psi2")):
        L = float(np.linalg.norm(pX - pO))
        m = _at_distance(P[curve], pO, L / 2)
        k = int(np.argmin(np.linalg.norm(P[curve] - m, axis=1)))
        tvec = P[curve][min(k + 1, len(P[curve]) - 1)] - P[curve][max(k - 1, 0)]
        nvec = np.array([-tvec[1], tvec[0]]) / np.linalg.norm(tvec)
        # the region between the boundary and the arc can be very thin
        eps = 0.2 * float(np.min(np.linalg.norm(sn_pts - m, axis=1)))
        sides = [m + eps * nvec, m - eps * nvec]
        inner = [s for s in sides if _inside(polygon, s)]
        if len(inner) != 1:
            persistence.append({"boundary": f"O{name}", "ok": False, "reason": "side detection failed"})
            continue
        pin = inner[0]
        pout = sides[1] if pin is sides[0] else sides[0]
        var_out = prober.variant(key, pout)
        s_in = [c for c in prober.s_cycles(pin) if c.admissible]
        s_out = [c for c in prober.s_cycles(pout) if c.admissible]
        dist = [_orbit_distance(var_out.points, c.points) for c in s_in]
        sep = _orbit_distance(s_in[0].points, s_in[1].points) if len(s_in) >= 2 else 0.0
        ok = var_out.admissible and len(s_out) >= 1 and len(s_in) >= 2 and min(dist) < 0.5 * sep
        persistence.append({"boundary": f"O{name}", "outer_region": outer,
                            "inner_point": pin.tolist(), "outer_point": pout.tolist(),
                            "variant_admissible_outside": bool(var_out.admissible),
                            "s_cycles_inside": len(s_in), "s_cycles_outside": len(s_out),
                            "match_distance": float(min(dist)) if dist else None,
                            "pair_separation": float(sep), "ok": bool(ok)})

    sn_checks = []
    for frac in (0.25, 0.5, 0.75):
        k = int(round(frac * (len(U) - 1)))
        sn_checks.append(_sn_check(prober, U[k], polygon, float(np.linalg.norm(pB - pA))))

    t = report.t_values
    pred = {
        "phi1_intercept": -report.k0 * t["d"] / (report.delta_check * t["(l+1)d"]) * mu,
        "phi1_slope": -t["d"] / (t["(l-1)d"] * t["(l+1)d"]),
        "phi2_intercept": report.k0 * t["(l-1)d"] / (report.delta_check * t["-d"]) * mu,
        "phi2_slope": -t["(l-1)d"] / (t["d"] * t["-d"]),
    }
    fits = {}
    for cid, along, key in (("hat_ld", "nu", "phi1"), ("hat_0", "eta", "phi2")):
        fit = _fit_phi(prober, np.vstack([br.array() for br in halves[cid]]), mu, along)
        fits[key] = {**fit, "predicted_intercept": pred[f"{key}_intercept"],
                     "predicted_slope": pred[f"{key}_slope"],
                     "intercept_sign_ok": bool(np.sign(fit["intercept"]) == np.sign(pred[f"{key}_intercept"])),
                     "slope_sign_ok": bool(np.sign(fit["slope"]) == np.sign(pred[f"{key}_slope"]))}

    diameter = float(np.max(pdist(sn_pts)))
    curves = {}
    for cid in CURVES:
        h0, h1 = halves[cid]
        U2 = np.vstack([h1.array()[::-1], h0.array()[1:]])
        F = sysm.boundary(cid)
        res = np.array([float(np.max(np.abs(F(u)))) * mu for u in U2])
        curves[cid] = (U2[:, N:], res)
    orientation = "standard" if A_curve == "check_0" else "mirrored"
    return UnfoldingReport(mu, report, orientation, curves, sn_pts, sn_res, tuple(map(float, pO)), spread,
                           tuple(map(float, pA)), tuple(map(float, pB)), A_curve, B_curve,
                           tangency_angles, closest, theta1, theta2, theta_exact, region_samples,
                           persistence, sn_checks, fits, diameter, settings)


def _sn_check(prober: _Prober, u, polygon, AB: float) -> dict:
    """Multipliers at a saddle-node sample and the cycle count on either side."""
    sysm = prober.sysm
    N = sysm.N
    p = u[N:]
    fmap = prober._map(p)
    pts, end, J = word_orbit(fmap, sysm.var["S"], u[:N])
    mult = np.linalg.eigvals(J)
    k1 = int(np.argmin(np.abs(mult - 1)))
    near_one = float(abs(mult[k1] - 1))
    others = [float(abs(abs(z) - 1)) for i, z in enumerate(mult) if i != k1]
    adm, _ = check_admissible(sysm.var["S"], pts[:, 0], 1e-10)
    F = sysm.fold()
    tvec = tangent(fd_jacobian(F, u))[N:]
    nvec = np.array([-tvec[1], tvec[0]]) / np.linalg.norm(tvec)
    _, _, vt = np.linalg.svd(np.eye(N) - J)
    v = vt[-1] / vt[-1][0] if abs(vt[-1][0]) > 1e-12 else vt[-1]
    eps = 1e-3 * AB
    scale = float(np.linalg.norm(u[:N]))
    counts = {}
    for sgn in (1.0, -1.0):
        q = p + sgn * eps * nvec
        seeds = [u[:N] + k * scale * v for k in (-0.1, -0.03, -0.01, 0.01, 0.03, 0.1)]
        fq = prober._map(q)
        found = []
        for s in seeds:
            try:
                c = newton_cycle(fq, sysm.var["S"], s)
            except (ConvergenceError, SingularMatrixError):
                continue
            if np.linalg.norm(c.points[0] - u[:N]) > 0.2 * scale:
                continue
            if all(np.linalg.norm(c.points[0] - f.points[0]) > 1e-9 * scale for f in found):
                found.append(c)
        counts["inside" if _inside(polygon, q) else "outside"] = len(found)
    ok = (near_one <= 1e-6 and min(others, default=1.0) >= 1e-3 and adm
          and counts.get("inside") == 2 and counts.get("outside") == 0)
    return {"point": p.tolist(), "multiplier_minus_one": near_one, "others_from_unit_circle": others,
            "admissible": bool(adm), "counts": counts, "ok": bool(ok)}
