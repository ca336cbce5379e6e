"""Pseudo-arclength continuation of one-dimensional solution curves of ``F(u) = 0``
with ``F: R^{k+1} -> R^k``."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)


class ContinuationError(RuntimeError):
    pass


@dataclass
class ArcSettings:
    step: float = 1e-4
    min_step: float = 1e-9
    max_step: float = 2e-3
    max_steps: int = 2000
    newton_tol: float = 1e-12
    newton_max_iter: int = 12
    fd_step: float = 1e-7


def fd_jacobian(F: Callable, u: np.ndarray, h: float = 1e-7) -> np.ndarray:
    """Central-difference Jacobian."""
    f0 = np.asarray(F(u))
    J = np.empty((f0.size, u.size))
    for k in range(u.size):
        du = np.zeros_like(u)
        du[k] = h * max(1.0, abs(u[k]))
        J[:, k] = (np.asarray(F(u + du)) - np.asarray(F(u - du))) / (2 * du[k])
    return J


def tangent(J: np.ndarray, previous: np.ndarray | None = None) -> np.ndarray:
    """Unit null vector of the ``k x (k+1)`` Jacobian, oriented along ``previous``."""
    _, _, vt = np.linalg.svd(J)
    t = vt[-1]
    if previous is not None and t @ previous < 0:
        t = -t
    return t / np.linalg.norm(t)


def correct(F: Callable, u: np.ndarray, settings: ArcSettings, anchor=None, direction=None):
    """Newton corrector; with ``anchor``/``direction`` it adds the arclength hyperplane."""
    u = np.array(u, dtype=float)
    for _ in range(settings.newton_max_iter):
        r = np.asarray(F(u))
        J = fd_jacobian(F, u, settings.fd_step)
        if anchor is not None:
            r = np.append(r, direction @ (u - anchor))
            J = np.vstack([J, direction])
        if np.max(np.abs(r)) <= settings.newton_tol:
            return u
        try:
            du = np.linalg.lstsq(J, -r, rcond=None)[0]
        except np.linalg.LinAlgError as exc:
            raise ContinuationError(str(exc)) from exc
        u = u + du
        if not np.all(np.isfinite(u)):
            raise ContinuationError("corrector produced non-finite values")
        if np.max(np.abs(du)) <= 1e-15 * max(1.0, float(np.max(np.abs(u)))):
            break
    r = np.asarray(F(u))
    if np.max(np.abs(r)) <= settings.newton_tol * 100:
        return u
    raise ContinuationError(f"corrector did not converge (residual {np.max(np.abs(r)):.2e})")


@dataclass
class Branch:
    points: list = field(default_factory=list)
    tangents: list = field(default_factory=list)
    stopped_by: str = ""

    def array(self) -> np.ndarray:
        return np.array(self.points)


def trace(
    F: Callable,
    u0: np.ndarray,
    direction: np.ndarray,
    settings: ArcSettings,
    stop: Callable[[np.ndarray], bool] | None = None,
) -> Branch:
    """Follow the curve from the solution ``u0`` in the sense of ``direction``.

    Steps are halved on corrector failure and grown by 1.5 after easy steps,
    within ``[min_step, max_step]``.  ``stop(u)`` ends the trace after the
    point ``u`` has been appended.
    """
    u = np.asarray(u0, dtype=float)
    t = tangent(fd_jacobian(F, u, settings.fd_step), direction)
    branch = Branch([u.copy()], [t.copy()])
    h = settings.step
    for _ in range(settings.max_steps):
        pred = u + h * t
        try:
            new = correct(F, pred, settings, anchor=pred, direction=t)
        except ContinuationError:
            h /= 2
            if h < settings.min_step:
                branch.stopped_by = "step size underflow"
                return branch
            continue
        t_new = tangent(fd_jacobian(F, new, settings.fd_step), t)
        if t_new @ t < 0.9:
            # too sharp a turn: retry with a smaller step
            h /= 2
            if h < settings.min_step:
                branch.stopped_by = "step size underflow"
                return branch
            continue
        u, t = new, t_new
        branch.points.append(u.copy())
        branch.tangents.append(t.copy())
        if stop is not None and stop(u):
            branch.stopped_by = "stop condition"
            return branch
        h = min(h * 1.5, settings.max_step)
    branch.stopped_by = "max steps"
    return branch
