"""Convex lower-semicontinuous functionals on geodesic spaces.

A functional exposes its value (``math.inf`` off the domain), its proximal
map ``argmin_v 1/2 d(v, x)^2 + lam G(v)`` and, when known in closed form,
its slope.  The slope can always be estimated from the resolvent:
``d(x, prox(x, lam)) / lam`` increases to ``|dG|(x)`` as ``lam`` decreases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericalError

INF_SENTINEL = 1e300
DEFAULT_SCHEDULE = (1e-2, 5e-3, 2.5e-3)
REFINE_TOL = 1e-6  # agreement of the 2- and 3-point extrapolants
MAX_REFINEMENTS = 8


class ConvexFunctional:
    """Base class.  Subclasses set ``space`` and implement ``value`` and ``prox``."""

    space = None
    name = "functional"
    slope_schedule = DEFAULT_SCHEDULE  # resolvent parameters for slope estimates

    def value(self, x) -> float:
        raise NotImplementedError

    def prox(self, x, lam: float):
        raise NotImplementedError

    def analytic_slope(self, x):
        """Closed-form slope, or ``None`` when unavailable."""
        return None

    def in_domain(self, x) -> bool:
        return self.value(x) < INF_SENTINEL * (1 - 1e-12)


def value(G: ConvexFunctional, x) -> float:
    v = float(G.value(G.space.validate(x)))
    if math.isnan(v):
        raise InputError("functional returned NaN")
    return math.inf if v >= INF_SENTINEL * (1 - 1e-12) else v


def prox(G: ConvexFunctional, x, lam: float):
    if not lam > 0:
        raise InputError(f"proximal parameter must be positive, got {lam}")
    return G.prox(G.space.validate(x), float(lam))


def damped_newton(objective, gradient, newton_step, x, *, feasible=None,
                  gnorm=None, tol=1e-10, max_iter=100):
    """Minimise a smooth strictly convex function by Newton's method with backtracking.

    ``newton_step(x, g)`` returns the search direction; ``feasible(x)`` guards
    the domain.  Returns ``(x, residual, iterations)``.
    """
    gnorm = gnorm or (lambda g: float(np.linalg.norm(g)))
    fx = objective(x)
    g = gradient(x)
    res = gnorm(g)
    for it in range(max_iter):
        if res <= tol:
            return x, res, it
        d = newton_step(x, g)
        slope = float(np.vdot(g, d))
        if -slope <= 64 * np.finfo(float).eps * (1.0 + abs(fx)):
            # Predicted decrease is below objective rounding: judge by the gradient.
            trial = x + d
            if feasible is None or feasible(trial):
                gt = gradient(trial)
                rt = gnorm(gt)
                if rt < res:
                    x, fx, g, res = trial, objective(trial), gt, rt
                    continue
            if res <= 1e3 * tol:
                return x, res, it
            raise NumericalError("Newton step stalled at rounding level", residual=res)
        step = 1.0
        while True:
            trial = x + step * d
            if feasible is None or feasible(trial):
                ft = objective(trial)
                if ft <= fx + 1e-4 * step * slope:
                    break
            step *= 0.5
            if step < 1e-14:
                # Rounding floor: no representable decrease left.
                if res <= 1e3 * tol:
                    return x, res, it
                raise NumericalError("line search stalled in damped Newton", residual=res)
        x, fx = trial, ft
        g = gradient(x)
        res = gnorm(g)
    if res <= tol:
        return x, res, max_iter
    raise NumericalError(f"damped Newton did not converge in {max_iter} iterations", residual=res)


class SmoothFunctional(ConvexFunctional):
    """Smooth convex functional on flat R^n; subclasses supply ``fun``, ``grad``, ``hess``."""

    name = "smooth"

    def __init__(self, space):
        self.space = space

    def fun(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def hess(self, x):
        raise NotImplementedError

    def value(self, x):
        with np.errstate(over="ignore"):
            v = float(self.fun(x))
        return v if math.isfinite(v) else math.inf

    def prox(self, x, lam):
        n = x.shape[0]

        def obj(v):
            return 0.5 * float(np.dot(v - x, v - x)) + lam * self.value(v)

        def grad(v):
            return (v - x) + lam * self.grad(v)

        def step(v, g):
            return -np.linalg.solve(np.eye(n) + lam * np.atleast_2d(self.hess(v)), g)

        v, _, _ = damped_newton(obj, grad, step, x.copy(), tol=1e-10 * max(1.0, lam))
        return v

    def analytic_slope(self, x):
        return float(np.linalg.norm(self.grad(x)))


@dataclass
class SlopeEstimate:
    value: float
    quotients: list
    schedule: tuple
    flags: list = field(default_factory=list)
    probe_bound: float | None = None


def _neville_at_zero(lams, qs):
    p = list(qs)
    n = len(p)
    for k in range(1, n):
        for i in range(n - k):
            p[i] = (lams[i + k] * p[i] - lams[i] * p[i + 1]) / (lams[i + k] - lams[i])
    return p[0]


def _extrapolate(lams, qs):
    """``(estimate, regular)``: Neville extrapolation to ``lam = 0`` when the quotients behave."""
    scale = 1.0 + max(qs)
    diffs = np.diff(qs)
    if len(qs) == 1 or np.all(np.abs(diffs) <= 1e-12 * scale):
        return qs[-1], True
    if len(diffs) == 1:
        regular = diffs[0] >= 0
    else:
        ratios = [b / a for a, b in zip(diffs, diffs[1:]) if a != 0.0]
        regular = len(ratios) == len(diffs) - 1 and all(0.2 <= r <= 0.8 for r in ratios)
    if not regular:
        return qs[-1], False
    return max(_neville_at_zero(lams, qs), qs[-1]), True


def slope_estimate(G: ConvexFunctional, x, schedule=None, probes=None) -> SlopeEstimate:
    """Resolvent-quotient slope with polynomial extrapolation to ``lam = 0``.

    ``schedule`` defaults to the functional's ``slope_schedule``.
    """
    space = G.space
    if schedule is None:
        schedule = getattr(G, "slope_schedule", DEFAULT_SCHEDULE)
    x = space.validate(x)
    if not math.isfinite(value(G, x)):
        return SlopeEstimate(math.inf, [], tuple(schedule), ["outside domain"])
    lams = [float(l) for l in schedule]
    if any(l <= 0 for l in lams) or any(b >= a for a, b in zip(lams, lams[1:])):
        raise InputError("slope schedule must be positive and strictly decreasing")
    qs = [space.distance(x, G.prox(x, l)) / l for l in lams]
    flags = []
    est, regular = _extrapolate(lams, qs)
    # Halve lam while the extrapolant still moves, or while the quotients still
    # climb too irregularly to extrapolate: the default schedule is too coarse
    # where the functional curves sharply.  Vanishing or falling quotients mean
    # the prox is at its resolution floor, where smaller lam only adds noise.
    for _ in range(MAX_REFINEMENTS):
        if len(qs) < 3:
            break
        if not regular and (min(qs[-3:]) <= 0.0 or np.any(np.diff(qs[-3:]) < 0.0)):
            break
        if regular and abs(est - _neville_at_zero(lams[-2:], qs[-2:])) <= REFINE_TOL * (1.0 + abs(est)):
            break
        lams.append(lams[-1] / 2.0)
        qs.append(space.distance(x, G.prox(x, lams[-1])) / lams[-1])
        est, regular = _extrapolate(lams[-3:], qs[-3:])
    scale = 1.0 + max(qs)
    if np.any(np.diff(qs) < -1e-9 * scale):
        flags.append("non-monotone quotients")
    if not regular:
        flags.append("irregular quotients; using smallest-lambda quotient")
    out = SlopeEstimate(max(est, 0.0), qs, tuple(lams), flags)
    if probes:
        gx = value(G, x)
        bound = 0.0
        for z in probes:
            d = space.distance(x, z)
            if d > 0:
                bound = max(bound, (gx - value(G, z)) / d)
        out.probe_bound = bound
        if bound > out.value * (1 + 1e-6) + 1e-9:
            out.flags.append("probe bound exceeds resolvent estimate")
    return out


def slope(G: ConvexFunctional, x, schedule=None) -> float:
    """Slope ``|dG|(x)`` estimated from the resolvent."""
    return slope_estimate(G, x, schedule).value


def node_slope(G: ConvexFunctional, x, method: str = "resolvent") -> float:
    """Slope used by the flow engine at trajectory nodes."""
    if method == "analytic":
        s = G.analytic_slope(x)
        if s is not None:
            return float(s)
    elif method != "resolvent":
        raise InputError(f"unknown slope method {method!r}")
    return slope(G, x)
