"""Geodesic metric spaces and CAT(0) comparison utilities.

A space object knows how to measure distances and how to walk along the
(unique) geodesic between two of its points.  Everything else in the package
is written against this small interface, so a new space only has to provide
``distance``, ``interpolate`` and payload conversion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError

POINT_TOL = 1e-12


class GeodesicSpace:
    """Base class for uniquely geodesic metric spaces."""

    name = "abstract"

    def validate(self, p):
        """Return ``p`` in canonical form or raise :class:`InputError`."""
        raise NotImplementedError

    def distance(self, a, b) -> float:
        raise NotImplementedError

    def interpolate(self, a, b, s: float):
        raise NotImplementedError

    def extend(self, a, b, s: float):
        """Point at parameter ``s > 1`` on the geodesic line through ``a`` and ``b``.

        Only spaces whose geodesics extend uniquely implement this.
        """
        raise NotImplementedError(f"{self.name} has no unique geodesic extension")

    def same(self, a, b, tol: float = POINT_TOL) -> bool:
        return self.distance(a, b) <= tol

    def to_payload(self, p) -> list:
        raise NotImplementedError

    def from_payload(self, payload):
        raise NotImplementedError


class EuclideanSpace(GeodesicSpace):
    """R^n, optionally with a diagonal positive weight (quadrature) inner product."""

    def __init__(self, dim: int, weights: Sequence[float] | None = None):
        if dim < 1:
            raise InputError("dimension must be positive")
        self.dim = int(dim)
        if weights is None:
            self.weights = None
        else:
            w = np.asarray(weights, dtype=float)
            if w.shape != (self.dim,) or np.any(w <= 0):
                raise InputError("weights must be positive with one entry per coordinate")
            self.weights = w
        self.name = f"R{self.dim}"

    def validate(self, p):
        x = np.asarray(p, dtype=float)
        if x.ndim == 0:
            x = x.reshape(1)
        if x.shape != (self.dim,):
            raise InputError(f"expected a point of shape ({self.dim},), got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise InputError("point has non-finite coordinates")
        return x

    def inner(self, u, v) -> float:
        if self.weights is None:
            return float(np.dot(u, v))
        return float(np.dot(self.weights * u, v))

    def norm(self, v) -> float:
        return math.sqrt(max(self.inner(v, v), 0.0))

    def distance(self, a, b) -> float:
        return self.norm(np.subtract(a, b))

    def interpolate(self, a, b, s):
        return (1.0 - s) * a + s * b

    def extend(self, a, b, s):
        return a + s * (b - a)

    def to_payload(self, p):
        return [float(v) for v in p]

    def from_payload(self, payload):
        return self.validate(payload)


@dataclass(frozen=True)
class ComparisonTriangle:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray


def distance(space: GeodesicSpace, a, b) -> float:
    """Distance between two validated points of ``space``."""
    return space.distance(space.validate(a), space.validate(b))


def interpolate(space: GeodesicSpace, a, b, s: float):
    """Point at fraction ``s`` of the geodesic from ``a`` to ``b``."""
    if not 0.0 <= s <= 1.0:
        raise InputError(f"interpolation parameter {s} outside [0, 1]")
    return space.interpolate(space.validate(a), space.validate(b), float(s))


def _triangle_area(a: float, b: float, c: float) -> float:
    # Kahan's ordering keeps near-degenerate triangles accurate.
    a, b, c = sorted((a, b, c), reverse=True)
    p = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))
    return 0.25 * math.sqrt(max(p, 0.0))


def comparison_triangle(dxy: float, dyz: float, dzx: float) -> ComparisonTriangle:
    """Planar triangle with the given side lengths.

    ``x`` sits at the origin, ``y`` on the positive horizontal axis and ``z``
    in the closed upper half-plane.
    """
    sides = (dxy, dyz, dzx)
    if any(not math.isfinite(d) or d < 0 for d in sides):
        raise InputError("side lengths must be finite and nonnegative")
    longest = max(sides)
    if longest - (sum(sides) - longest) > 1e-9:
        raise InputError(f"side lengths {sides} violate the triangle inequality")
    if dxy == 0.0:
        return ComparisonTriangle(np.zeros(2), np.zeros(2), np.array([dzx, 0.0]))
    px = (dxy * dxy + dzx * dzx - dyz * dyz) / (2.0 * dxy)
    py = 2.0 * _triangle_area(dxy, dyz, dzx) / dxy
    return ComparisonTriangle(np.zeros(2), np.array([dxy, 0.0]), np.array([px, py]))


def cat0_defect(space: GeodesicSpace, x, y, z, s: float, t: float) -> float:
    """``d(a, b) - |a_bar - b_bar|`` for ``a`` on [x, y] and ``b`` on [x, z].

    Nonpositive values certify the CAT(0) inequality for this sample.
    """
    x, y, z = space.validate(x), space.validate(y), space.validate(z)
    a = interpolate(space, x, y, s)
    b = interpolate(space, x, z, t)
    tri = comparison_triangle(space.distance(x, y), space.distance(y, z), space.distance(z, x))
    a_bar = s * tri.y
    b_bar = t * tri.z
    return space.distance(a, b) - float(np.hypot(*(a_bar - b_bar)))


def asymptotic_center(space: GeodesicSpace, seq: list, candidates: list):
    """Candidate minimising ``max`` of the distance to the tail half of ``seq``."""
    if not seq or not candidates:
        raise InputError("asymptotic_center needs a nonempty sequence and candidate set")
    tail = [space.validate(p) for p in seq[len(seq) // 2:]]
    candidates = [space.validate(c) for c in candidates]
    best, best_r = None, math.inf
    for c in candidates:
        r = max(space.distance(c, p) for p in tail)
        if r < best_r:
            best, best_r = c, r
    return best
