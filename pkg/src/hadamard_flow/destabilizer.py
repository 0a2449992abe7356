"""Classify a flow as bounded or escaping, extract its limiting ray, certify the sharp bound.

Escaping flows are followed until they are far from the start; the unit-speed
segments from the base point to late flow nodes are sampled at fixed arc
lengths and must stabilise, otherwise extraction fails loudly.  The
resulting ray is compared with the limit slope of the flow: the moment-weight
inequality says ``B >= max(0, -F(ray) / |ray|)`` and the report records the
gap between the two sides.
"""

from __future__ import annotations

import enum
import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericalError
from .flow import FlowTrajectory, limit_slope_run
from .functional import ConvexFunctional, slope, value
from .rays import T_MAX, Ray, chordal_estimate, geometric_grid, radial_estimate, ray_norm

EXTRACTION_TOL = 1e-5


class FlowCase(str, enum.Enum):
    BOUNDED = "Bounded"
    ESCAPING = "Escaping"


def _half_index(traj):
    return (len(traj.points) - 1) // 2


def classify(traj: FlowTrajectory, threshold: float = 1.0, min_rate: float = 1e-3):
    """``(case, flags)``; see :func:`escape_test`."""
    if not threshold > 0:
        raise InputError("escape threshold must be positive")
    pts = traj.points
    if traj.space is None:
        raise InputError("trajectory carries no space; build it with the flow engine")
    dist = traj.space.distance
    if len(pts) < 3:
        return FlowCase.BOUNDED, ["too few nodes to classify"]
    h = _half_index(traj)
    d_end = dist(pts[0], pts[-1])
    d_half = dist(pts[0], pts[h])
    growth = d_end - d_half
    moving = growth > min_rate * (traj.times[-1] - traj.times[h])
    if d_end > threshold and moving:
        return FlowCase.ESCAPING, []
    flags = []
    if moving:
        flags.append("inconclusive: still moving at the horizon")
    elif d_end > threshold:
        flags.append("far from start but stalled")
    return FlowCase.BOUNDED, flags


def escape_test(traj: FlowTrajectory, threshold: float = 1.0, min_rate: float = 1e-3) -> FlowCase:
    """Escaping iff ``d(x0, c_T)`` exceeds ``threshold`` and still grows over the last doubling.

    Growth counts when ``d(x0, c_T) - d(x0, c_{T/2})`` exceeds ``min_rate * T / 2``.
    """
    return classify(traj, threshold, min_rate)[0]


def _default_nodes(dists):
    """First node past each distance level 2, 4, 8, ..."""
    nodes, level = [], 2.0
    for i, d in enumerate(dists):
        while d >= level:
            if not nodes or nodes[-1] != i:
                nodes.append(i)
            level *= 2.0
    return nodes


def extract_ray(F: ConvexFunctional, traj: FlowTrajectory, times=None, base=None,
                stab_tol: float = EXTRACTION_TOL, strict: bool = True, s_max: float = 4.0) -> Ray:
    """Limit of the unit-speed segments from ``base`` to late flow nodes.

    The ray is stored at ``s = 0, 1, 2, 4, ..., s_max`` (capped by the shortest
    segment used) and continued beyond by geodesic extension.  Samples
    from successive nodes must agree to ``stab_tol``; otherwise a
    :class:`NumericalError` carrying the oscillation is raised (or, with
    ``strict=False``, the ray is returned with ``meta['converged'] = False``).
    """
    space = F.space
    base = traj.points[0] if base is None else space.validate(base)
    dists = [space.distance(base, p) for p in traj.points]
    if times is None:
        nodes = _default_nodes(dists)
    else:
        tt = np.asarray(times, dtype=float)
        if np.any(np.diff(tt) <= 0):
            raise InputError("extraction times must increase")
        nodes = [int(np.argmin(np.abs(traj.times - t))) for t in tt]
    nodes = nodes[-3:]
    if len(nodes) < 2:
        raise InputError("need at least two flow nodes beyond distance 2 to extract a ray")
    d_min = min(dists[i] for i in nodes)
    if d_min < 1.0:
        raise InputError("extraction nodes must lie at distance >= 1 from the base")
    grid = geometric_grid(min(s_max, d_min))

    def samples(i):
        d = dists[i]
        return [space.interpolate(base, traj.points[i], s / d) for s in grid]

    rows = [samples(i) for i in nodes]
    movements = [max(space.distance(a, b) for a, b in zip(r0, r1)) for r0, r1 in zip(rows, rows[1:])]
    converged = movements[-1] < stab_tol
    meta = {
        "converged": converged,
        "movements": movements,
        "node_times": [float(traj.times[i]) for i in nodes],
        "node_distances": [dists[i] for i in nodes],
    }
    if not converged and strict:
        raise NumericalError(
            f"ray samples did not stabilise: last movement {movements[-1]:.3g} >= {stab_tol:g}",
            residual=movements[-1], oscillation=movements[-1])
    return Ray(space, grid, rows[-1], meta)


def transport(ray: Ray, base, t_far: float = T_MAX) -> Ray:
    """Ray from ``base`` asymptotic to ``ray``: segments from ``base`` to ``ray(t_far)``.

    Exact for geodesic extensions up to ``O(d(base, ray.base) / t_far)``.
    """
    space = ray.space
    base = space.validate(base)
    far = ray.position(t_far)
    d = space.distance(base, far)
    grid = geometric_grid(ray.t_max)
    pts = [space.interpolate(base, far, min(1.0, s * ray.speed / d)) for s in grid]
    return Ray(space, grid, pts, dict(ray.meta, transported=True))


@dataclass
class SharpnessReport:
    B: float
    case: FlowCase
    ray: Ray | None  # None is the trivial ray
    ratio: float
    norm: float
    gap: float
    unstable: bool
    diagnostics: dict = field(default_factory=dict)
    trajectory: FlowTrajectory | None = field(default=None, repr=False)  # not exported

    def to_json(self) -> dict:
        return {
            "B": self.B,
            "case": self.case.value,
            "ray": "Trivial" if self.ray is None else self.ray.to_json(),
            "ratio": self.ratio,
            "norm": self.norm,
            "gap": self.gap,
            "unstable": self.unstable,
            "diagnostics": self.diagnostics,
        }


def _check_hypotheses(F, G, traj, x0):
    if not math.isfinite(value(G, x0)):
        raise InputError("hypothesis violated: x0 is not in the domain of G")
    gv = [value(G, p) for p in traj.points]
    for p, fv, g in zip(traj.points, traj.values, gv):
        if fv > g + 1e-9 * (1.0 + abs(g)):
            raise InputError("hypothesis violated: F <= G fails at a flow node")
    for k in range(len(gv) - 1):
        if gv[k + 1] > gv[k] + 1e-9 * (1.0 + abs(gv[k])):
            raise InputError(f"hypothesis violated: G increases along the flow of F at step {k + 1}")


def run_flow(F: ConvexFunctional, x0, horizon: float = 1.0, tol: float = 1e-3, step=None,
             threshold: float = 1.0, horizon_cap: float = 2.0 ** 12, slope_method: str = "resolvent",
             min_escape: float = 16.0, min_rate: float = 1e-3):
    """Limit-slope run that keeps going while the flow escapes but is still near its start."""
    space = F.space

    def extend_while(pts):
        n = len(pts) - 1
        if n < 2:
            return True
        d_end = space.distance(pts[0], pts[-1])
        d_half = space.distance(pts[0], pts[n // 2])
        tau = (step if step is not None else horizon / 32.0)
        moving = d_end - d_half > min_rate * tau * (n - n // 2)
        return moving and space.distance(pts[1], pts[-1]) < min_escape

    res = limit_slope_run(F, x0, horizon, tol, step=step, horizon_cap=horizon_cap,
                          slope_method=slope_method, extend_while=extend_while)
    case, flags = classify(res.trajectory, threshold, min_rate)
    return res, case, flags


def sharpness_report(F: ConvexFunctional, G: ConvexFunctional | None = None, x0=None,
                     horizon: float = 1.0, tol: float = 1e-3, step=None, threshold: float = 1.0,
                     horizon_cap: float = 2.0 ** 12, slope_method: str = "resolvent",
                     radial_T: float = T_MAX, stab_tol: float = EXTRACTION_TOL) -> SharpnessReport:
    """Run the flow of ``F`` from ``x0`` and compare its limit slope with the extracted ray.

    ``G`` defaults to ``F``; when given, ``F <= G`` and the decrease of ``G``
    along the flow of ``F`` are checked on the flow nodes.
    """
    G = F if G is None else G
    if x0 is None:
        raise InputError("sharpness_report needs a starting point")
    x0 = F.space.validate(x0)
    if not math.isfinite(value(G, x0)):
        raise InputError("hypothesis violated: x0 is not in the domain of G")
    res, case, flags = run_flow(F, x0, horizon, tol, step, threshold, horizon_cap, slope_method)
    traj = res.trajectory
    if G is not F:
        _check_hypotheses(F, G, traj, x0)
    diag = {
        "limit_slope_estimates": [[h, s] for h, s in res.estimates],
        "limit_slope_converged": res.converged,
        "horizon": res.horizon,
        "steps": len(traj) - 1,
        "step": traj.step,
        "distance_from_start": F.space.distance(traj.points[0], traj.points[-1]),
        "flags": list(flags),
    }
    if G is not F:
        diag["G_terminal_slope"] = slope(G, traj.points[-1])
    B = float(res.value)
    if case is FlowCase.BOUNDED:
        gap = B
        return SharpnessReport(B, case, None, 0.0, 0.0, gap, False, diag, traj)
    x_eps = traj.points[1]
    ray = extract_ray(F, traj, base=x_eps, stab_tol=stab_tol, strict=False)
    if not ray.meta["converged"]:
        diag["flags"].append("ray extraction did not stabilise")
    norm = ray_norm(ray)
    est = radial_estimate(F, ray, radial_T)
    ratio = -est.value / norm
    diag.update(
        extraction=ray.meta,
        radial_value=est.value,
        radial_error=est.error,
        radial_flags=est.flags,
    )
    gap = B - max(0.0, ratio)
    return SharpnessReport(B, case, ray, float(ratio), float(norm), float(gap),
                           bool(max(0.0, ratio) > tol), diag, traj)


def uniqueness_probe(F: ConvexFunctional, G: ConvexFunctional | None = None, starts=(),
                     horizon: float = 1.0, tol: float = 1e-3, project=None, mapper=map, **kw):
    """Largest pairwise chordal distance between the rays extracted from several starts.

    Each escaping flow yields a ray from its own ``x_eps``; all rays are then
    transported to a common base (``x_eps`` of the first escaping start).
    ``project`` is an optional linear map applied to every ray sample before
    comparison (used to compare toric rays modulo constants).  Returns
    ``(value, details)``; value is 0 when no start escapes.
    """
    if len(starts) < 2:
        raise InputError("uniqueness_probe needs at least two starts")
    G = F if G is None else G
    worker = functools.partial(probe_start, F, horizon=horizon, tol=tol, **kw)
    return combine_probe(F.space, list(mapper(worker, starts)), project)


def probe_start(F, x0, horizon=1.0, tol=1e-3, **kw):
    """Flow from one start: ``(case, x_eps, ray)`` with ``ray`` None when bounded."""
    res, case, _ = run_flow(F, F.space.validate(x0), horizon, tol, **kw)
    if case is FlowCase.BOUNDED:
        return case, None, None
    traj = res.trajectory
    ray = extract_ray(F, traj, base=traj.points[1], strict=False)
    return case, traj.points[1], ray


def combine_probe(space, results, project=None):
    """Fold per-start ``(case, base, ray)`` triples into the probe value."""
    escaping = [(b, r) for c, b, r in results if c is FlowCase.ESCAPING]
    details = {
        "cases": [c.value for c, _, _ in results],
        "converged": [bool(r.meta.get("converged")) if r is not None else None for _, _, r in results],
    }
    if not escaping:
        return 0.0, details
    common = escaping[0][0]
    rays = []
    for c, _, r in results:
        if c is FlowCase.ESCAPING:
            rays.append(transport(r, common))
        else:
            rays.append(Ray.trivial(space, common, t_max=escaping[0][1].t_max))
    if project is not None:
        rays = [Ray(space, r.times, [project(p) for p in r.points], r.meta) for r in rays]
    worst = 0.0
    for a, b in itertools.combinations(rays, 2):
        worst = max(worst, chordal_estimate(a, b, T_MAX).value)
    details["pairwise_max"] = worst
    return worst, details
