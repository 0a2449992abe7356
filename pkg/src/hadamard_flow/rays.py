"""Geodesic rays and the asymptotic quantities built on them.

Rays are stored at ``t = 0, 1, 2, 4, ..., t_max`` and read between samples by
geodesic interpolation, which is exact for a geodesic ray.  Asymptotic
quantities (chordal distance, radial slope) are monotone quotients in ``t``;
we report the last quotient together with the last increment as error bar.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .functional import ConvexFunctional, slope, value

T_MAX = 2.0 ** 30
OVERFLOW_GUARD = 1e12


def geometric_grid(t_max: float) -> np.ndarray:
    if t_max < 1:
        raise InputError("ray horizon must be at least 1")
    k = int(math.floor(math.log2(t_max) + 1e-12))
    return np.concatenate(([0.0], 2.0 ** np.arange(k + 1)))


class Ray:
    """Geodesic ray ``t -> position(t)`` in ``space`` with stored samples."""

    def __init__(self, space, times, points, meta=None):
        times = np.asarray(times, dtype=float)
        if times[0] != 0.0 or np.any(np.diff(times) <= 0) or len(times) != len(points):
            raise InputError("ray samples need increasing times starting at 0")
        self.space = space
        self.times = times
        self.points = list(points)
        self.meta = dict(meta or {})

    @classmethod
    def from_map(cls, space, fn, t_max: float = T_MAX, meta=None):
        grid = geometric_grid(t_max)
        return cls(space, grid, [space.validate(fn(t)) for t in grid], meta)

    @classmethod
    def linear(cls, space, base, direction, t_max: float = T_MAX):
        base = space.validate(base)
        direction = np.asarray(direction, dtype=float)
        return cls.from_map(space, lambda t: base + t * direction, t_max)

    @classmethod
    def trivial(cls, space, base, t_max: float = T_MAX):
        base = space.validate(base)
        return cls.from_map(space, lambda t: base, t_max, meta={"trivial": True})

    @property
    def base(self):
        return self.points[0]

    @property
    def t_max(self) -> float:
        return float(self.times[-1])

    def position(self, t: float):
        if t < 0:
            raise InputError("rays are parameterised by t >= 0")
        ts = self.times
        if t >= ts[-1]:
            if t == ts[-1]:
                return self.points[-1]
            s = (t - ts[-2]) / (ts[-1] - ts[-2])
            return self.space.extend(self.points[-2], self.points[-1], s)
        i = bisect.bisect_right(ts, t) - 1
        if t == ts[i]:
            return self.points[i]
        s = (t - ts[i]) / (ts[i + 1] - ts[i])
        return self.space.interpolate(self.points[i], self.points[i + 1], s)

    @property
    def speed(self) -> float:
        return self.space.distance(self.position(0.0), self.position(1.0))

    def to_json(self) -> dict:
        return {
            "base": self.space.to_payload(self.base),
            "speed": self.speed,
            "times": [float(t) for t in self.times],
            "payload": [self.space.to_payload(p) for p in self.points],
        }


@dataclass
class Estimate:
    """Monotone-quotient limit: ``value`` with ``error`` = last increment."""

    value: float
    error: float
    monotone: bool = True
    quotients: list = field(default_factory=list)
    flags: list = field(default_factory=list)


def ray_norm(ray: Ray) -> float:
    return ray.speed


def _grid(t_max):
    return [t for t in geometric_grid(t_max) if t >= 1.0]


def chordal_estimate(l1: Ray, l2: Ray, T_max: float | None = None) -> Estimate:
    space = l1.space
    T = T_max if T_max is not None else min(l1.t_max, l2.t_max)
    offset = space.distance(l1.base, l2.base)
    shared = offset <= 1e-12
    qs = []
    for t in _grid(T):
        d = space.distance(l1.position(t), l2.position(t))
        qs.append(d / t if shared else max(d - offset, 0.0) / t)
    inc = np.diff(qs)
    scale = 1.0 + abs(qs[-1])
    monotone = bool(np.all(inc >= -1e-9 * scale))
    flags = [] if shared else ["bases differ; base offset subtracted"]
    if shared and not monotone:
        flags.append("non-monotone chordal quotient")
    err = abs(float(inc[-1])) if len(inc) else 0.0
    return Estimate(qs[-1], err, monotone, qs, flags)


def chordal_distance(l1: Ray, l2: Ray, T_max: float | None = None) -> float:
    """``lim d(l1_t, l2_t) / t``."""
    return chordal_estimate(l1, l2, T_max).value


def radial_estimate(F: ConvexFunctional, ray: Ray, T_max: float | None = None) -> Estimate:
    T = T_max if T_max is not None else ray.t_max
    f0 = value(F, ray.base)
    if not math.isfinite(f0):
        raise InputError("ray base lies outside the domain of the functional")
    qs = []
    for t in _grid(T):
        ft = value(F, ray.position(t))
        if not math.isfinite(ft):
            return Estimate(math.inf, 0.0, True, qs, ["left the domain"])
        qs.append((ft - f0) / t)
    if abs(qs[-1]) > OVERFLOW_GUARD:
        return Estimate(math.inf if qs[-1] > 0 else -math.inf, 0.0, True, qs, ["overflow guard"])
    inc = np.diff(qs)
    scale = 1.0 + abs(qs[-1])
    monotone = bool(np.all(inc >= -1e-9 * scale))
    if len(inc) >= 2 and inc[-1] > 1e-6 * scale and inc[-1] >= 0.9 * inc[-2]:
        # Increments not shrinking: superlinear growth.
        return Estimate(math.inf, 0.0, monotone, qs, ["superlinear growth"])
    flags = [] if monotone else ["non-monotone radial quotient"]
    return Estimate(qs[-1], abs(float(inc[-1])) if len(inc) else 0.0, monotone, qs, flags)


def radial_value(F: ConvexFunctional, ray: Ray, T_max: float | None = None) -> float:
    """``lim F(ray_t) / t``, possibly ``+inf``."""
    return radial_estimate(F, ray, T_max).value


def ray_geodesic(l0: Ray, l1: Ray, s: float, T: float | None = None, stab_tol: float = 1e-6) -> Ray:
    """Point at fraction ``s`` of the ray-space geodesic from ``l0`` to ``l1``.

    For each stored time ``T'`` the sample is the limit over ``t`` of the point
    at time ``T'`` on the segment from the base to the ``s``-point between
    ``l0_t`` and ``l1_t``.
    """
    space = l0.space
    if not 0.0 <= s <= 1.0:
        raise InputError("s must lie in [0, 1]")
    if not space.same(l0.base, l1.base):
        raise InputError("ray_geodesic needs rays with a common base")
    t_avail = min(l0.t_max, l1.t_max)
    if T is None:
        T = max(1.0, t_avail / 2 ** 10)
    base = l0.base
    grid = geometric_grid(T)
    outer = [t for t in geometric_grid(t_avail) if t >= 1.0]
    pts, worst, converged = [base], 0.0, True
    for tp in grid[1:]:
        prev, moved = None, math.inf
        for t in (t for t in outer if t >= tp):
            mid = space.interpolate(l0.position(t), l1.position(t), s)
            cur = space.interpolate(base, mid, tp / t)
            if prev is not None:
                moved = space.distance(cur, prev)
                if moved < stab_tol:
                    break
            prev = cur
        if moved >= stab_tol:
            converged = False
            worst = max(worst, moved)
        pts.append(cur)
    return Ray(space, grid, pts, meta={"converged": converged, "max_movement": worst, "s": s})


def ray_cat0_defect(l: Ray, l0: Ray, l1: Ray, s: float, T_max: float | None = None) -> float:
    """CAT(0) defect of the ray space for the geodesic ``l0 -> l1`` seen from ``l``."""
    ls = ray_geodesic(l0, l1, s)
    # Chordal quotients carry an O(offset / T) bias; read them far out, past
    # the stored part of ``ls``, which continues by geodesic extension.
    T = T_max if T_max is not None else T_MAX
    dc = lambda a, b: chordal_distance(a, b, T)
    rhs = (1 - s) * dc(l, l0) ** 2 + s * dc(l, l1) ** 2 - s * (1 - s) * dc(l0, l1) ** 2
    return dc(l, ls) ** 2 - rhs


def best_ratio(F: ConvexFunctional, rays, T_max: float | None = None) -> float:
    """``max(0, sup -F(ray) / |ray|)`` over the nontrivial rays with finite radial value."""
    best = 0.0
    for ray in rays:
        n = ray_norm(ray)
        if n <= 1e-12:
            continue
        r = radial_value(F, ray, T_max)
        if math.isfinite(r):
            best = max(best, -r / n)
    return best


def moment_weight_gap(F: ConvexFunctional, rays, probe_points, T_max: float | None = None) -> float:
    """``min_probes |dF| - max(0, sup_rays -F(ray)/|ray|)``; nonnegative up to tolerance."""
    if not probe_points:
        raise InputError("moment_weight_gap needs at least one probe point")
    min_slope = min(slope(F, p) for p in probe_points)
    return min_slope - best_ratio(F, rays, T_max)
