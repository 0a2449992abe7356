import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from hadamard_flow.errors import InputError
from hadamard_flow.flow import limit_slope, mayer_flow
from hadamard_flow.geodesic import cat0_defect
from hadamard_flow.model_spaces import (ORIGIN, ExpLinearFunctional, TripodPoint, TripodSpace, make_euclidean,
                                        make_tripod)


def test_euclidean_answers():
    _, F, ans = make_euclidean("linear", {"a": (3, 4)})
    assert ans.B == 5.0 and not ans.bounded
    np.testing.assert_allclose(ans.direction, [-0.6, -0.8])
    _, F, ans = make_euclidean("exp_linear")
    assert ans.B == 1.0 and ans.direction[0] == 1.0
    _, F, ans = make_euclidean("quadratic")
    assert ans.B == 0.0 and ans.bounded and ans.direction is None
    _, (F, G), ans = make_euclidean("pair")
    xs = np.linspace(-3, 10, 50)
    assert all(F.value(np.array([x])) <= G.value(np.array([x])) for x in xs)


def test_unknown_tag_is_rejected():
    with pytest.raises(InputError):
        make_euclidean("cubic")
    with pytest.raises(InputError):
        ExpLinearFunctional(make_euclidean("quadratic", {"dim": 2})[0])


def test_exp_linear_flow_matches_ode_oracle():
    # x' = 1 + exp(-x): the implicit chain converges to the ODE solution.
    space, F, _ = make_euclidean("exp_linear")
    ode = solve_ivp(lambda t, x: 1 + np.exp(-x), (0, 4), [0.0], rtol=1e-12, atol=1e-12)
    errs = []
    for m in (64, 128, 256):
        tr = mayer_flow(F, np.zeros(1), 4.0, m, "analytic")
        errs.append(abs(tr.points[-1][0] - ode.y[0, -1]))
    assert errs[2] < errs[1] < errs[0] and errs[2] < 1e-2
    assert abs(errs[1] / errs[2] - 2.0) < 0.2  # first-order scheme


def test_tripod_answers():
    _, F, ans = make_tripod((-1, 2, 2))
    assert ans.B == 1.0 and ans.direction == 1 and not ans.bounded
    _, F, ans = make_tripod((1, 1, 1))
    assert ans.B == 0.0 and ans.bounded
    assert F.analytic_slope(ORIGIN) == 0.0
    _, F, ans = make_tripod((0, 2, 2))
    assert ans.B == 0.0 and ans.bounded


def test_tripod_invariants_enforced():
    with pytest.raises(InputError):
        make_tripod((-3, 2, 2))  # alpha_1 + alpha_2 < 0
    with pytest.raises(InputError):
        make_tripod((-1, -1, 2))
    with pytest.raises(InputError):
        make_tripod((0, 0, 1))  # tie at the minimum
    _, _, ans = make_tripod((0, 0, 1), allow_tie=True)
    assert ans.bounded
    with pytest.raises(InputError):
        make_tripod((1, 2))


def _grid_objective(F, x, lam, r):
    """Objective on each branch over radii ``r``; returns (branch, r, value) of the minimum."""
    best = (0, 0.0, 0.5 * x.r ** 2)
    for j in (1, 2, 3):
        d = np.abs(r - x.r) if j == x.branch else r + x.r
        obj = 0.5 * d ** 2 + lam * F.alpha[j - 1] * r
        i = int(np.argmin(obj))
        if obj[i] < best[2]:
            best = (j, float(r[i]), float(obj[i]))
    return best


@pytest.mark.parametrize("alpha", [(-1, 2, 2), (1, 1, 1), (0, 2, 2), (-0.5, 0.7, 3)])
def test_tripod_prox_matches_brute_force(alpha, rng):
    space, F, _ = make_tripod(alpha)
    r = np.arange(0.0, 12.0, 1e-4)
    for _ in range(25):
        x = space.validate((int(rng.integers(1, 4)), float(rng.uniform(0, 4))))
        lam = float(rng.uniform(0.01, 3))
        p = F.prox(x, lam)
        obj = 0.5 * space.distance(p, x) ** 2 + lam * F.value(p)
        b, rb, ob = _grid_objective(F, x, lam, r)
        assert obj <= ob + 1e-12
        assert obj >= ob - 1e-7  # grid optimum within step^2 scale
        assert space.distance(p, space.validate((b, rb))) <= 2e-4


def test_tripod_cat0_on_random_triples(rng):
    sp = TripodSpace()
    pts = lambda: sp.validate((int(rng.integers(1, 4)), float(rng.uniform(0, 5))))
    for _ in range(200):
        assert cat0_defect(sp, pts(), pts(), pts(), float(rng.random()), float(rng.random())) <= 1e-9


def test_tripod_extension_rules():
    sp = TripodSpace()
    assert sp.extend(TripodPoint(1, 1.0), TripodPoint(1, 2.0), 2.0) == TripodPoint(1, 3.0)
    assert sp.extend(TripodPoint(2, 1.0), TripodPoint(1, 1.0), 2.0) == TripodPoint(1, 3.0)
    assert sp.extend(ORIGIN, ORIGIN, 5.0) == ORIGIN
    with pytest.raises(InputError):
        sp.extend(TripodPoint(1, 1.0), ORIGIN, 2.0)
    with pytest.raises(InputError):
        sp.extend(TripodPoint(1, 2.0), TripodPoint(1, 1.0), 2.0)


def test_tripod_flows_funnel_down_the_negative_branch():
    _, F, _ = make_tripod((-1, 2, 2))
    for start in [(2, 3.0), (3, 0.5), (0, 0.0), (1, 1.0)]:
        tr = mayer_flow(F, start, 8.0, 64)
        assert tr.points[-1].branch == 1
        assert limit_slope(F, start) == pytest.approx(1.0, abs=1e-9)


def test_flat_tripod_branch_stalls():
    _, F, _ = make_tripod((0, 2, 2))
    tr = mayer_flow(F, (2, 1.0), 8.0, 64)
    assert tr.points[-1] == ORIGIN
    assert tr.slopes[-1] == 0.0
    assert math.isclose(tr.values[-1], 0.0)
