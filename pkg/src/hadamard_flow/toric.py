"""One-dimensional toric instance on the moment interval [0, 1].

A symplectic potential is ``u = u0 + phi`` with ``u0`` the Guillemin potential
``x log x + (1 - x) log(1 - x)`` and ``phi`` sampled at ``x_i = i / N``.
Geodesics are straight lines in ``phi`` and the metric is the L2 norm, so
the space is flat and the Calabi flow is the gradient flow of the Mabuchi
functional

    M_a(u) = -int log u'' + u(0) + u(1) - a int u.

Integrals use the nodal trapezoid weights ``W``.  With ``w = 1 / u''`` and
``S = -w''`` (one-sided at the endpoints, where ``w = 0`` and ``|w'| = 1``)
the coordinate gradient of the discrete ``M_a`` is exactly ``W (S - a)``, so
the discrete Calabi energy ``|S - a|_W`` is the exact slope of the discrete
functional.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solveh_banded
from scipy.special import xlogy

from .errors import DomainError, InputError, NumericalError
from .functional import ConvexFunctional, damped_newton
from .geodesic import EuclideanSpace

CANONICAL_A = 2.0


def trapezoid_weights(N: int) -> np.ndarray:
    W = np.full(N + 1, 1.0 / N)
    W[0] = W[-1] = 0.5 / N
    return W


def guillemin_values(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return xlogy(x, x) + xlogy(1.0 - x, 1.0 - x)


@dataclass(frozen=True)
class SymplecticPotential:
    """``u = u0 + phi`` sampled on the uniform grid with ``N + 1`` nodes."""

    phi: np.ndarray

    @property
    def N(self) -> int:
        return len(self.phi) - 1

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.N + 1)

    @property
    def u(self) -> np.ndarray:
        return guillemin_values(self.x) + self.phi

    @property
    def u0_second(self) -> np.ndarray:
        """Analytic ``u0'' = 1 / (x (1 - x))`` at interior nodes."""
        xi = self.x[1:-1]
        return 1.0 / (xi * (1.0 - xi))

    @property
    def u_second(self) -> np.ndarray:
        return self.u0_second + _phi_second(self.phi)


def _as_phi(u) -> np.ndarray:
    phi = u.phi if isinstance(u, SymplecticPotential) else u
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 1 or len(phi) < 17:
        raise InputError("toric potentials need N >= 16 (at least 17 samples)")
    if not np.all(np.isfinite(phi)):
        raise InputError("potential has non-finite samples")
    return phi


def _phi_second(phi):
    N = len(phi) - 1
    return (phi[2:] - 2.0 * phi[1:-1] + phi[:-2]) * (N * N)


def _interior_q(N):
    xi = np.arange(1, N) / N
    return xi * (1.0 - xi)


def guillemin_potential(N: int) -> SymplecticPotential:
    if N < 16:
        raise InputError("toric grid needs N >= 16")
    return SymplecticPotential(np.zeros(N + 1))


def _w(phi):
    """``1 / u''`` at interior nodes, or ``None`` if ``u''`` is not positive."""
    N = len(phi) - 1
    q = _interior_q(N)
    ratio = 1.0 + _phi_second(phi) * q  # u'' / u0''
    if np.any(ratio <= 0):
        return None, ratio
    return q / ratio, ratio


def _require_w(phi):
    w, ratio = _w(phi)
    if w is None:
        bad = int(np.argmax(ratio <= 0)) + 1
        raise DomainError(f"u'' is not positive at node {bad} (x = {bad / (len(phi) - 1):.6g})")
    return w, ratio


def _curvature(phi, w):
    N = len(phi) - 1
    h = 1.0 / N
    wp = np.concatenate(([0.0], w, [0.0]))
    S = np.empty(N + 1)
    S[1:-1] = -(wp[2:] - 2.0 * wp[1:-1] + wp[:-2]) * (N * N)
    S[0] = 2.0 * (h - w[0]) * (N * N)
    S[-1] = 2.0 * (h - w[-1]) * (N * N)
    return S


def scalar_curvature(u) -> np.ndarray:
    """Abreu scalar curvature ``S = -(1 / u'')''`` at every node."""
    phi = _as_phi(u)
    w, _ = _require_w(phi)
    return _curvature(phi, w)


def _mabuchi(phi, a, ratio):
    N = len(phi) - 1
    W = trapezoid_weights(N)
    entropy = -2.0 - np.sum(np.log(ratio)) / N
    return float(entropy + phi[0] + phi[-1] + 0.5 * a - a * np.dot(W, phi))


def mabuchi_toric(u, a: float) -> float:
    """Toric Mabuchi functional; ``int log u0'' = -2`` is taken exactly."""
    phi = _as_phi(u)
    _, ratio = _require_w(phi)
    return _mabuchi(phi, a, ratio)


def calabi_energy_toric(u, a: float) -> float:
    """``(int (S - a)^2)^(1/2)``."""
    phi = _as_phi(u)
    S = scalar_curvature(phi)
    return math.sqrt(float(np.dot(trapezoid_weights(len(phi) - 1), (S - a) ** 2)))


def linear_part(f, a: float) -> float:
    """``f(0) + f(1) - a int f``: the toric Donaldson-Futaki functional."""
    f = np.asarray(f, dtype=float)
    return float(f[0] + f[-1] - a * np.dot(trapezoid_weights(len(f) - 1), f))


def toric_distance(u, v) -> float:
    pu, pv = _as_phi(u), _as_phi(v)
    if pu.shape != pv.shape:
        raise InputError("potentials live on different grids")
    return math.sqrt(float(np.dot(trapezoid_weights(len(pu) - 1), (pu - pv) ** 2)))


def is_discretely_convex(f, tol: float = 1e-6) -> bool:
    f = np.asarray(f, dtype=float)
    return bool(np.all(_phi_second(f) >= -tol))


def toric_ray_ratio(f, a: float) -> float:
    """``-L_a(f) / |f|`` for a convex direction ``f``."""
    f = np.asarray(f, dtype=float)
    if not is_discretely_convex(f):
        raise InputError("ray direction must be discretely convex")
    n = math.sqrt(float(np.dot(trapezoid_weights(len(f) - 1), f * f)))
    if n == 0:
        raise InputError("ray direction must be nonzero")
    return -linear_part(f, a) / n


def _hessian_bands(w, N):
    """Upper banded form of ``h D2^T diag(w^2) D2``."""
    c = float(N) ** 3
    w2 = np.concatenate(([0.0], w * w, [0.0]))
    main = c * (np.concatenate(([0.0], w2[:-1])) + 4.0 * w2 + np.concatenate((w2[1:], [0.0])))
    off1 = -2.0 * c * (w2[:-1] + w2[1:])
    off2 = c * w2[1:-1]
    return main, off1, off2


def toric_prox(u, lam: float, a: float, tol: float = 1e-10) -> SymplecticPotential:
    """Minimiser of ``1/2 d(v, u)^2 + lam M_a(v)`` by banded damped Newton."""
    return SymplecticPotential(_prox(_as_phi(u), lam, a, tol))


def _prox(phi, lam, a, tol=1e-10):
    if not lam > 0:
        raise InputError("proximal parameter must be positive")
    N = len(phi) - 1
    W = trapezoid_weights(N)

    def objective(v):
        _, ratio = _w(v)
        if np.any(ratio <= 0):
            return math.inf
        return 0.5 * float(np.dot(W, (v - phi) ** 2)) + lam * _mabuchi(v, a, ratio)

    def metric_grad(v):
        w, _ = _w(v)
        return (v - phi) + lam * (_curvature(v, w) - a)

    def grad(v):
        return W * metric_grad(v)

    def step(v, g):
        w, _ = _w(v)
        main, off1, off2 = _hessian_bands(w, N)
        ab = np.zeros((3, N + 1))
        ab[2] = W + lam * main
        ab[1, 1:] = lam * off1
        ab[0, 2:] = lam * off2
        return -solveh_banded(ab, g)

    def feasible(v):
        return bool(np.all(_w(v)[1] > 0))

    def gnorm(g):
        return math.sqrt(float(np.dot(g * g, 1.0 / W)))

    start = phi.copy()
    w0, _ = _w(phi)
    if w0 is None:
        raise DomainError("prox input lies outside the domain")
    guess = phi + lam * (a - _curvature(phi, w0))
    if feasible(guess) and objective(guess) < objective(start):
        start = guess
    # S is a fourth difference of phi, so rounding in phi is amplified by N^4.
    floor = 8.0 * lam * np.finfo(float).eps * N ** 4 * (1.0 + float(np.max(np.abs(phi))))
    v, _, _ = damped_newton(objective, grad, step, start, feasible=feasible, gnorm=gnorm,
                            tol=max(tol * max(1.0, lam), floor), max_iter=100)
    return v


class ToricSpace(EuclideanSpace):
    """Flat space of potential samples with the trapezoid L2 metric."""

    def __init__(self, N: int = 256):
        if N < 16:
            raise InputError("toric grid needs N >= 16")
        super().__init__(N + 1, trapezoid_weights(N))
        self.N = N
        self.x = np.linspace(0.0, 1.0, N + 1)
        self.name = f"toric.N{N}"

    def remove_constants(self, phi):
        return phi - float(np.dot(self.weights, phi))


class ToricMabuchi(ConvexFunctional):
    """``M_a`` on :class:`ToricSpace`; ``+inf`` where ``u''`` fails to be positive."""

    # The Hessian has eigenvalues up to ~N^4, so resolvent quotients reach
    # their limit only for much smaller lam than on the model spaces.
    slope_schedule = (1e-5, 5e-6, 2.5e-6)

    def __init__(self, space: ToricSpace, a: float = CANONICAL_A):
        if not a > 0:
            raise InputError("linear coefficient a must be positive")
        self.space = space
        self.a = float(a)
        self.name = f"mabuchi[a={self.a:g}]"

    def value(self, x):
        _, ratio = _w(x)
        if np.any(ratio <= 0):
            return math.inf
        return _mabuchi(x, self.a, ratio)

    def prox(self, x, lam):
        try:
            return _prox(x, lam, self.a)
        except NumericalError as exc:
            raise NumericalError(f"toric prox failed: {exc}", residual=exc.residual) from exc

    def analytic_slope(self, x):
        if _w(x)[0] is None:
            return math.inf
        return calabi_energy_toric(x, self.a)


def snapshot_rows(phi, a: float):
    """Rows ``x, u, phi, S, w`` for CSV export."""
    phi = _as_phi(phi)
    pot = SymplecticPotential(phi)
    w, _ = _require_w(phi)
    S = _curvature(phi, w)
    wfull = np.concatenate(([0.0], w, [0.0]))
    return [(float(x), float(uu), float(p), float(s), float(ww))
            for x, uu, p, s, ww in zip(pot.x, pot.u, phi, S, wfull)]
