"""Closed-form test beds: flat R^n functionals and the tripod metric tree.

Each constructor returns ``(space, functional, answers)`` where ``answers``
records the analytically known infimum of the slope ``B`` and, for unstable
instances, the optimal escape direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InputError
from .functional import ConvexFunctional, SmoothFunctional
from .geodesic import EuclideanSpace, GeodesicSpace


@dataclass(frozen=True)
class AnalyticAnswers:
    B: float
    bounded: bool
    direction: object = None  # unit vector (R^n) or branch index (tripod)


# ---------------------------------------------------------------- R^n

class LinearFunctional(ConvexFunctional):
    def __init__(self, space, a):
        self.space = space
        self.a = np.asarray(a, dtype=float)
        self.name = "linear"

    def value(self, x):
        return float(self.a @ x)

    def prox(self, x, lam):
        return x - lam * self.a

    def analytic_slope(self, x):
        return float(np.linalg.norm(self.a))


class QuadraticFunctional(ConvexFunctional):
    """``1/2 |x|^2``."""

    def __init__(self, space):
        self.space = space
        self.name = "quadratic"

    def value(self, x):
        return 0.5 * float(x @ x)

    def prox(self, x, lam):
        return x / (1.0 + lam)

    def analytic_slope(self, x):
        return float(np.linalg.norm(x))


class NormFunctional(ConvexFunctional):
    """``|x|``; the prox is radial soft-thresholding."""

    def __init__(self, space):
        self.space = space
        self.name = "abs"

    def value(self, x):
        return float(np.linalg.norm(x))

    def prox(self, x, lam):
        r = np.linalg.norm(x)
        if r <= lam:
            return np.zeros_like(x)
        return (1.0 - lam / r) * x

    def analytic_slope(self, x):
        return 1.0 if np.linalg.norm(x) > 0 else 0.0


class ValleyFunctional(ConvexFunctional):
    """``max(|x| - 1, 0)``: flat on the closed unit ball."""

    def __init__(self, space):
        self.space = space
        self.name = "valley"

    def value(self, x):
        return max(float(np.linalg.norm(x)) - 1.0, 0.0)

    def prox(self, x, lam):
        r = np.linalg.norm(x)
        if r <= 1.0:
            return x.copy()
        return x * (max(1.0, r - lam) / r)

    def analytic_slope(self, x):
        return 1.0 if np.linalg.norm(x) > 1.0 else 0.0


class ExpLinearFunctional(SmoothFunctional):
    """``-x + weight * exp(-x)`` on the real line.

    Unbounded below with slope ``1 + weight * exp(-x)`` decreasing to 1, so
    the infimum of the slope is approached but never attained.
    """

    def __init__(self, space, weight=1.0):
        if space.dim != 1:
            raise InputError("exp_linear lives on R^1")
        super().__init__(space)
        self.weight = float(weight)
        self.name = "exp_linear" if weight == 1.0 else f"exp_linear[{weight:g}]"

    def fun(self, x):
        return -x[0] + self.weight * np.exp(-x[0])

    def grad(self, x):
        return np.array([-1.0 - self.weight * np.exp(-x[0])])

    def hess(self, x):
        return np.array([[self.weight * np.exp(-x[0])]])

    def analytic_slope(self, x):
        with np.errstate(over="ignore"):
            return float(1.0 + self.weight * np.exp(-x[0]))


EUCLIDEAN_TAGS = ("linear", "quadratic", "abs", "exp_linear", "valley", "pair")


def make_euclidean(tag: str, params=None):
    """Build a flat instance.  ``params``: ``a`` for linear, ``dim`` otherwise.

    For ``pair`` the functional is the tuple ``(F, G)`` with ``F <= G``.
    """
    params = dict(params or {})
    if tag == "linear":
        a = np.asarray(params.get("a", (3.0, 4.0)), dtype=float)
        if a.ndim != 1 or a.size == 0:
            raise InputError("linear instance needs a coefficient vector")
        space = EuclideanSpace(a.size)
        norm = float(np.linalg.norm(a))
        direction = -a / norm if norm > 0 else None
        return space, LinearFunctional(space, a), AnalyticAnswers(norm, norm == 0, direction)
    if tag in ("quadratic", "abs", "valley"):
        dim = int(params.get("dim", 2 if tag == "valley" else 1))
        space = EuclideanSpace(dim)
        cls = {"quadratic": QuadraticFunctional, "abs": NormFunctional, "valley": ValleyFunctional}[tag]
        return space, cls(space), AnalyticAnswers(0.0, True, None)
    if tag == "exp_linear":
        space = EuclideanSpace(1)
        return space, ExpLinearFunctional(space), AnalyticAnswers(1.0, False, np.array([1.0]))
    if tag == "pair":
        space = EuclideanSpace(1)
        F = ExpLinearFunctional(space, 1.0)
        G = ExpLinearFunctional(space, 2.0)
        return space, (F, G), AnalyticAnswers(1.0, False, np.array([1.0]))
    raise InputError(f"unknown euclidean tag {tag!r}")


# ---------------------------------------------------------------- tripod

class TripodPoint(NamedTuple):
    branch: int  # 1..3, or 0 for the origin
    r: float


ORIGIN = TripodPoint(0, 0.0)


class TripodSpace(GeodesicSpace):
    """Three half-lines glued at a common origin (a CAT(0) metric tree)."""

    name = "tripod"

    def validate(self, p):
        try:
            b, r = p
        except (TypeError, ValueError):
            raise InputError(f"tripod point must be (branch, r), got {p!r}") from None
        r = float(r)
        if not math.isfinite(r) or r < 0:
            raise InputError(f"tripod radius must be finite and nonnegative, got {r}")
        if int(b) != b or int(b) not in (0, 1, 2, 3):
            raise InputError(f"tripod branch must be 0..3, got {b}")
        b = int(b)
        if r == 0.0:
            return ORIGIN
        if b == 0:
            raise InputError("branch 0 is reserved for the origin")
        return TripodPoint(b, r)

    def distance(self, a, b):
        if a.branch == b.branch:
            return abs(a.r - b.r)
        return a.r + b.r

    def interpolate(self, a, b, s):
        if a.branch == b.branch:
            return self.validate((a.branch, (1.0 - s) * a.r + s * b.r))
        # Otherwise the geodesic runs through the origin.
        sigma = s * (a.r + b.r)
        if sigma < a.r:
            return self.validate((a.branch, a.r - sigma))
        if sigma > a.r:
            return self.validate((b.branch, sigma - a.r))
        return ORIGIN

    def extend(self, a, b, s):
        if a == b:
            return b  # constant ray
        if b.r == 0.0:
            raise InputError("geodesic extension through the tripod origin is not unique")
        outward = a.branch != b.branch or a.r <= b.r
        if not outward:
            raise InputError("geodesic extension towards the tripod origin is not unique")
        return TripodPoint(b.branch, b.r + (s - 1.0) * self.distance(a, b))

    def to_payload(self, p):
        return [int(p.branch), float(p.r)]

    def from_payload(self, payload):
        return self.validate(payload)


class TripodFunctional(ConvexFunctional):
    """Branch-linear ``G((i, r)) = alpha_i r``."""

    def __init__(self, space, alpha):
        self.space = space
        self.alpha = tuple(float(a) for a in alpha)
        self.name = "tripod"

    def slope_of(self, branch):
        return self.alpha[branch - 1]

    def value(self, x):
        return 0.0 if x.branch == 0 else self.alpha[x.branch - 1] * x.r

    def prox(self, x, lam):
        best, best_obj = ORIGIN, 0.5 * x.r * x.r
        for j in (1, 2, 3):
            aj = self.alpha[j - 1]
            if j == x.branch:
                rho = max(0.0, x.r - lam * aj)
                obj = 0.5 * (rho - x.r) ** 2 + lam * aj * rho
            else:
                rho = max(0.0, -x.r - lam * aj)
                obj = 0.5 * (rho + x.r) ** 2 + lam * aj * rho
            if rho > 0 and obj < best_obj:
                best, best_obj = TripodPoint(j, rho), obj
        return best

    def analytic_slope(self, x):
        if x.branch == 0:
            return max(0.0, -min(self.alpha))
        return abs(self.alpha[x.branch - 1])


def make_tripod(alpha, allow_tie: bool = False):
    """Tripod instance with branch slopes ``alpha``.

    Pairwise sums must be nonnegative, otherwise ``G`` is not convex along
    geodesics that cross the origin.
    """
    alpha = tuple(float(a) for a in alpha)
    if len(alpha) != 3:
        raise InputError("tripod needs exactly three branch slopes")
    for i in range(3):
        for j in range(i + 1, 3):
            if alpha[i] + alpha[j] < 0:
                raise InputError(f"alpha_{i + 1} + alpha_{j + 1} < 0: functional would be nonconvex")
    lo = min(alpha)
    if lo <= 0 and alpha.count(lo) > 1 and not allow_tie:
        raise InputError("tie between minimal branch slopes; pass allow_tie=True to probe it")
    space = TripodSpace()
    B = max(0.0, -lo)
    direction = alpha.index(lo) + 1 if lo < 0 else None
    return space, TripodFunctional(space, alpha), AnalyticAnswers(B, lo >= 0, direction)
