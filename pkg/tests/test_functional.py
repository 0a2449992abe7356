import math

import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from hadamard_flow.errors import InputError
from hadamard_flow.functional import damped_newton, prox, slope, slope_estimate, value
from hadamard_flow.geodesic import EuclideanSpace
from hadamard_flow.model_spaces import (ExpLinearFunctional, LinearFunctional, NormFunctional,
                                        QuadraticFunctional, ValleyFunctional, make_tripod)
from hadamard_flow.toric import ToricMabuchi, ToricSpace


def _obj(G, x, lam, v):
    return 0.5 * G.space.distance(v, x) ** 2 + lam * value(G, v)


def test_values(plane, tripod):
    assert value(QuadraticFunctional(plane), np.array([3.0, 4.0])) == 12.5
    sp = ToricSpace(256)
    assert value(ToricMabuchi(sp, 2.0), np.zeros(257)) == pytest.approx(-1.0, abs=1e-12)
    _, F, _ = make_tripod((-1, 2, 2))
    assert value(F, (1, 3.0)) == -3.0


def test_value_outside_domain_is_inf():
    sp = ToricSpace(32)
    phi = -10.0 * sp.x ** 2  # u'' = 1/(x(1-x)) - 20 < 0 near the centre
    assert value(ToricMabuchi(sp), phi) == math.inf


def test_prox_examples(plane):
    np.testing.assert_allclose(prox(QuadraticFunctional(plane), np.array([2.0, 0.0]), 1.0), [1.0, 0.0])
    line = EuclideanSpace(1)
    np.testing.assert_allclose(prox(NormFunctional(line), np.array([2.0]), 0.5), [1.5])
    np.testing.assert_array_equal(prox(NormFunctional(line), np.array([0.3]), 0.5), [0.0])
    np.testing.assert_allclose(prox(LinearFunctional(plane, (3, 4)), np.zeros(2), 0.5), [-1.5, -2.0])


def test_prox_rejects_nonpositive_parameter(plane):
    for lam in (0.0, -1.0, math.nan):
        with pytest.raises(InputError):
            prox(QuadraticFunctional(plane), np.zeros(2), lam)


def test_slope_examples(plane):
    assert slope(LinearFunctional(plane, (3, 4)), np.zeros(2)) == pytest.approx(5.0, abs=1e-9)
    line = EuclideanSpace(1)
    assert slope(ExpLinearFunctional(line), np.zeros(1)) == pytest.approx(2.0, abs=1e-4)
    assert slope(NormFunctional(line), np.zeros(1)) == 0.0
    assert slope(NormFunctional(line), np.array([3.0])) == pytest.approx(1.0, abs=1e-12)


def test_slope_outside_domain_is_inf():
    sp = ToricSpace(32)
    est = slope_estimate(ToricMabuchi(sp), -10.0 * sp.x ** 2)
    assert est.value == math.inf and "outside domain" in est.flags


def test_slope_schedule_must_decrease(plane):
    with pytest.raises(InputError):
        slope_estimate(QuadraticFunctional(plane), np.ones(2), schedule=(1e-3, 1e-2))


def test_probe_bound_never_exceeds_slope(plane, rng):
    G = QuadraticFunctional(plane)
    x = np.array([1.0, -2.0])
    est = slope_estimate(G, x, probes=list(rng.normal(size=(30, 2))))
    assert est.probe_bound <= est.value + 1e-9
    assert not est.flags


@pytest.mark.parametrize("make", [QuadraticFunctional, NormFunctional, ValleyFunctional,
                                  lambda sp: LinearFunctional(sp, (1.0, -2.0))])
def test_prox_beats_random_competitors(make, plane, rng):
    G = make(plane)
    for _ in range(10):
        x, lam = rng.normal(0, 3, 2), float(rng.uniform(0.05, 3))
        p = prox(G, x, lam)
        best = _obj(G, x, lam, p)
        for z in rng.normal(0, 3, (50, 2)):
            assert best <= _obj(G, x, lam, z) + 1e-12
        for z in p + rng.normal(0, 1e-3, (50, 2)):
            assert best <= _obj(G, x, lam, z) + 1e-12


def test_smooth_prox_optimality(rng):
    line = EuclideanSpace(1)
    G = ExpLinearFunctional(line)
    for x0 in (-3.0, 0.0, 2.0, 8.0):
        x = np.array([x0])
        for lam in (0.01, 0.5, 4.0, 256.0):
            p = prox(G, x, lam)
            # Stationarity: p - x + lam G'(p) = 0.
            assert abs(p[0] - x0 + lam * G.grad(p)[0]) <= 1e-8 * max(1.0, lam)
            for z in p + rng.normal(0, 1e-2, 50):
                assert _obj(G, x, lam, p) <= _obj(G, x, lam, np.array([z])) + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(1e-3, 2), st.floats(1.01, 4))
def test_resolvent_distance_grows_with_parameter(a, b, lam, factor):
    sp = EuclideanSpace(2)
    x = np.array([a, b])
    for G in (QuadraticFunctional(sp), NormFunctional(sp), ValleyFunctional(sp)):
        d1 = sp.distance(x, prox(G, x, lam))
        d2 = sp.distance(x, prox(G, x, lam * factor))
        assert d2 >= d1 - 1e-12


@settings(max_examples=60, deadline=None)
@given(st.floats(-4, 6), st.floats(0.0, 3.0))
@example(-4.0, 2.0)
@example(-4.0, 3.0)
def test_resolvent_slope_matches_analytic(x, weight):
    line = EuclideanSpace(1)
    G = ExpLinearFunctional(line, weight) if weight > 0 else LinearFunctional(line, (-1.0,))
    exact = G.analytic_slope(np.array([x]))
    assert abs(slope(G, np.array([x])) - exact) <= 1e-4 * (1 + exact)


@settings(max_examples=100)
@given(st.lists(st.floats(-10, 10), min_size=4, max_size=4), st.floats(0, 1))
def test_convexity_along_geodesics(c, s):
    sp = EuclideanSpace(2)
    x, y = np.array(c[:2]), np.array(c[2:])
    z = sp.interpolate(x, y, s)
    for G in (QuadraticFunctional(sp), NormFunctional(sp), ValleyFunctional(sp)):
        assert value(G, z) <= (1 - s) * value(G, x) + s * value(G, y) + 1e-9 * (1 + abs(value(G, x)) + abs(value(G, y)))


def test_damped_newton_reports_failure():
    from hadamard_flow.errors import NumericalError
    # A gradient that is never zero cannot converge.
    with pytest.raises(NumericalError):
        damped_newton(lambda v: float(v[0]), lambda v: np.ones(1), lambda v, g: -g, np.zeros(1), max_iter=5)
