"""Weak gradient flows built from repeated proximal steps (minimizing movements).

The chain ``c_{k+1} = prox(c_k, tau)`` with ``tau = T / m`` is the implicit
Euler discretisation of the flow; refining ``m`` gives the weak gradient flow.
The remaining functions evaluate the standard a-priori properties of the flow
on a computed chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericalError
from .functional import ConvexFunctional, node_slope, slope, value


@dataclass
class FlowTrajectory:
    times: np.ndarray
    points: list
    values: np.ndarray
    slopes: np.ndarray
    m: int
    step: float
    residuals: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    space: object = None

    def __len__(self):
        return len(self.points)

    @property
    def T(self) -> float:
        return float(self.times[-1])


def _check_start(G, x0):
    x0 = G.space.validate(x0)
    if not math.isfinite(value(G, x0)):
        raise InputError("starting point is outside the domain of the functional")
    return x0


def _chain(G, x0, tau, m, start_index=0):
    pts = [x0]
    x = x0
    for k in range(m):
        try:
            x = G.prox(x, tau)
        except NumericalError as exc:
            raise NumericalError(f"prox failed at step {start_index + k + 1}: {exc}",
                                 residual=exc.residual, step=start_index + k + 1) from exc
        pts.append(x)
    return pts


def _assemble(G, points, tau, m, slope_method):
    times = tau * np.arange(len(points))
    values = np.array([value(G, p) for p in points])
    slopes = np.array([node_slope(G, p, slope_method) for p in points])
    return FlowTrajectory(times, points, values, slopes, m, tau,
                          meta={"slope_method": slope_method}, space=G.space)


def mayer_flow(G: ConvexFunctional, x0, T: float, m: int, slope_method: str = "resolvent") -> FlowTrajectory:
    """``m`` proximal steps of size ``T / m`` from ``x0``, with values and slopes at every node."""
    if not T > 0 or int(m) != m or m < 1:
        raise InputError("need T > 0 and a positive integer m")
    x0 = _check_start(G, x0)
    tau = T / m
    return _assemble(G, _chain(G, x0, tau, int(m)), tau, int(m), slope_method)


def flow(G: ConvexFunctional, x0, T: float, tol: float, m0: int = 1, m_cap: int = 2 ** 16,
         slope_method: str = "resolvent") -> FlowTrajectory:
    """Refine the Mayer chain by doubling ``m`` until consecutive chains agree to ``tol``.

    The returned trajectory is the finest chain computed; ``meta['cauchy_gaps']``
    lists ``max_t d(c_t^{2m}, c_t^m)`` for each doubling.
    """
    if not T > 0 or not tol > 0:
        raise InputError("need T > 0 and tol > 0")
    x0 = _check_start(G, x0)
    space = G.space
    m = int(m0)
    coarse = _chain(G, x0, T / m, m)
    gaps = []
    while True:
        if 2 * m > m_cap:
            raise NumericalError(f"m exceeded cap {m_cap} before reaching tol {tol}",
                                 residual=gaps[-1] if gaps else math.inf, gaps=gaps)
        fine = _chain(G, x0, T / (2 * m), 2 * m)
        gap = max(space.distance(fine[2 * k], coarse[k]) for k in range(m + 1))
        gaps.append(gap)
        m *= 2
        coarse = fine
        if gap < tol:
            break
    traj = _assemble(G, coarse, T / m, m, slope_method)
    traj.meta.update(cauchy_gaps=gaps, tol=tol)
    return traj


@dataclass
class LimitSlopeResult:
    value: float
    converged: bool
    horizon: float
    estimates: list
    trajectory: FlowTrajectory


def limit_slope_run(G: ConvexFunctional, x0, horizon: float = 1.0, tol: float = 1e-3,
                    step: float | None = None, horizon_cap: float = 2.0 ** 12,
                    slope_method: str = "resolvent", min_horizon: float = 0.0,
                    extend_while=None) -> LimitSlopeResult:
    """Follow a fixed-step chain, doubling the horizon until the terminal slope settles.

    ``extend_while(trajectory_points)`` may request further doublings after
    the slope has converged (used to push escaping flows far enough out).
    """
    if not horizon > 0 or not tol > 0:
        raise InputError("need horizon > 0 and tol > 0")
    x0 = _check_start(G, x0)
    tau = step if step is not None else horizon / 32.0
    H = horizon
    pts = _chain(G, x0, tau, max(1, round(H / tau)))
    estimates = [(H, slope(G, pts[-1]))]
    converged = False
    while True:
        settled = len(estimates) > 1 and abs(estimates[-1][1] - estimates[-2][1]) < tol
        converged = converged or settled
        more = (not settled) or H < min_horizon or (extend_while is not None and extend_while(pts))
        if not more:
            break
        if 2 * H > horizon_cap:
            break
        n_new = max(1, round(H / tau))
        pts.extend(_chain(G, pts[-1], tau, n_new, start_index=len(pts) - 1)[1:])
        H = tau * (len(pts) - 1)
        estimates.append((H, slope(G, pts[-1])))
    traj = _assemble(G, pts, tau, len(pts) - 1, slope_method)
    traj.meta.update(limit_slope_estimates=estimates)
    return LimitSlopeResult(estimates[-1][1], converged, H, estimates, traj)


def limit_slope(G: ConvexFunctional, x0, horizon: float = 1.0, tol: float = 1e-3, **kw) -> float:
    """``lim_{t -> inf} |dG|(c_t)`` along the flow from ``x0``."""
    return limit_slope_run(G, x0, horizon, tol, **kw).value


def evi_residual(G: ConvexFunctional, trajectory: FlowTrajectory, v) -> list:
    """Discrete evolution-variational-inequality residual per step.

    Each entry is ``[d(c_{k+1}, v)^2 - d(c_k, v)^2] / (2 tau) - (G(v) - G(c_{k+1}))``.
    """
    space = G.space
    v = space.validate(v)
    gv = value(G, v)
    pts, vals, tau = trajectory.points, trajectory.values, trajectory.step
    d2 = [space.distance(p, v) ** 2 for p in pts]
    return [(d2[k + 1] - d2[k]) / (2 * tau) - (gv - vals[k + 1]) for k in range(len(pts) - 1)]


def evi_constant(residuals, tau) -> float:
    """Smallest ``C >= 0`` with every residual ``<= C tau``."""
    return max(0.0, max(residuals) / tau) if residuals else 0.0


def sandwich_check(G: ConvexFunctional, trajectory: FlowTrajectory, t_idx: int, s_idx: int):
    """Gaps in ``|dG|(c_t) d >= G(c_t) - G(c_s) >= |dG|(c_s) d`` with ``d = d(c_t, c_s)``."""
    if t_idx > s_idx:
        raise InputError("need t_idx <= s_idx")
    ct, cs = trajectory.points[t_idx], trajectory.points[s_idx]
    d = G.space.distance(ct, cs)
    drop = trajectory.values[t_idx] - trajectory.values[s_idx]
    lower_gap = trajectory.slopes[t_idx] * d - drop
    upper_gap = drop - trajectory.slopes[s_idx] * d
    return float(lower_gap), float(upper_gap)


def energy_identity_residual(G: ConvexFunctional, trajectory: FlowTrajectory) -> list:
    """``|(G(c_k) - G(c_{k+1})) / tau - |dG|(c_k)^2|`` per step."""
    vals, sl, tau = trajectory.values, trajectory.slopes, trajectory.step
    return [abs((vals[k] - vals[k + 1]) / tau - sl[k] ** 2) for k in range(len(vals) - 1)]


def bind_check(G: ConvexFunctional, x0, y0, horizon: float = 1.0, tol: float = 1e-3, **kw) -> float:
    """``|B(x0) - B(y0)|``: the limit slope does not depend on the start."""
    return abs(limit_slope(G, x0, horizon, tol, **kw) - limit_slope(G, y0, horizon, tol, **kw))
