"""Randomised property suites run by ``check`` and by the acceptance tests.

Each suite takes an :class:`~hadamard_flow.registry.Instance` and a seed and
returns a :class:`SuiteResult`.  Random draws come from a generator seeded by
``(seed, instance id, suite)``, so results do not depend on execution order.
"""

from __future__ import annotations

import itertools
import math
import zlib
from dataclasses import dataclass, field

import numpy as np

from .destabilizer import run_flow
from .flow import energy_identity_residual, evi_constant, evi_residual, mayer_flow, sandwich_check
from .geodesic import cat0_defect
from .model_spaces import ORIGIN, TripodPoint
from .rays import T_MAX, Ray, moment_weight_gap, ray_cat0_defect

SUITES = ("cat0", "ray-cat0", "evi", "sandwich", "energy", "moment-weight", "bind")

CAT0_TOL = 1e-9
FLAT_TOL = 1e-12
RAY_CAT0_TOL = 1e-6
SANDWICH_TOL = 1e-8
MOMENT_WEIGHT_TOL = 1e-6
SMOOTH_TAGS = ("euclid.linear", "euclid.quadratic", "euclid.exp_linear", "euclid.pair")


@dataclass
class SuiteResult:
    suite: str
    instance: str
    passed: bool
    metrics: dict = field(default_factory=dict)

    def to_json(self):
        return {"suite": self.suite, "instance": self.instance, "passed": self.passed,
                "metrics": self.metrics}


def rng_for(seed: int, instance_id: str, suite: str) -> np.random.Generator:
    return np.random.default_rng([int(seed), zlib.crc32(instance_id.encode()), zlib.crc32(suite.encode())])


# ---------------------------------------------------------------- sampling

def sample_points(inst, rng, n):
    space = inst.space
    if inst.kind == "tripod":
        out = []
        for _ in range(n):
            if rng.random() < 0.1:
                out.append(ORIGIN)
            else:
                out.append(TripodPoint(int(rng.integers(1, 4)), float(rng.uniform(0.05, 4.0))))
        return out
    if inst.kind == "toric":
        x = space.x
        out = []
        for _ in range(n):
            # |phi''| <= 2 keeps u'' >= u0'' - 2 >= 2.
            c = rng.uniform(-1.0, 1.0, 4) * 0.5 / (np.arange(1, 5) ** 2 * np.pi ** 2)
            phi = sum(ck * np.sin((k + 1) * np.pi * x) for k, ck in enumerate(c))
            out.append(phi + rng.normal(0.0, 0.3) + rng.normal(0.0, 0.3) * x)
        return out
    if inst.id.startswith(("euclid.exp_linear", "euclid.pair")):
        return [np.array([rng.uniform(-2.0, 6.0)]) for _ in range(n)]
    return [rng.normal(0.0, 2.0, space.dim) for _ in range(n)]


def _tripod_ray(space, base, target, speed):
    if base.branch in (0, target):
        return Ray.from_map(space, lambda t: (target, base.r + speed * t))

    def pos(t):
        r = base.r - speed * t
        return (base.branch, r) if r >= 0 else (target, -r)
    return Ray.from_map(space, pos)


def _convex_profile(rng, x):
    f = rng.normal(0.0, 1.0) + rng.normal(0.0, 1.0) * x
    for k in range(2, 5):
        f = f + abs(rng.normal(0.0, 0.5)) * x ** k
    if rng.random() < 0.5:
        p = rng.uniform(0.1, 0.9)
        f = f + abs(rng.normal(0.0, 1.0)) * np.maximum(x - p, 0.0)
    return f


def sample_rays(inst, rng, n, base=None):
    """``n`` random geodesic rays, from ``base`` when given, else from random points."""
    space = inst.space
    rays = []
    for _ in range(n):
        b = base if base is not None else sample_points(inst, rng, 1)[0]
        speed = float(rng.uniform(0.5, 2.0))
        if inst.kind == "tripod":
            rays.append(_tripod_ray(space, b, int(rng.integers(1, 4)), speed))
        elif inst.kind == "toric":
            f = _convex_profile(rng, space.x)
            rays.append(Ray.linear(space, b, speed * f / space.norm(f)))
        else:
            d = rng.normal(0.0, 1.0, space.dim)
            rays.append(Ray.linear(space, b, speed * d / np.linalg.norm(d)))
    return rays


def optimal_ray(inst):
    """Ray along the analytically optimal direction from the default start, if any."""
    ans = inst.answers
    if ans is None or ans.direction is None:
        return None
    if inst.kind == "tripod":
        return _tripod_ray(inst.space, inst.x0, int(ans.direction), 1.0)
    return Ray.linear(inst.space, inst.x0, np.asarray(ans.direction, dtype=float))


# ---------------------------------------------------------------- suites

def suite_cat0(inst, seed=0, n=200):
    rng = rng_for(seed, inst.id, "cat0")
    space = inst.space
    flat = inst.kind != "tripod"
    worst, worst_abs = -math.inf, 0.0
    for _ in range(n):
        x, y, z = sample_points(inst, rng, 3)
        s, t = rng.random(2)
        d = cat0_defect(space, x, y, z, float(s), float(t))
        worst, worst_abs = max(worst, d), max(worst_abs, abs(d))
    passed = worst <= CAT0_TOL and (not flat or worst_abs <= FLAT_TOL)
    return SuiteResult("cat0", inst.id, passed, {"samples": n, "max_defect": worst,
                                                 "max_abs_defect": worst_abs, "flat": flat})


def suite_ray_cat0(inst, seed=0, n=100):
    rng = rng_for(seed, inst.id, "ray-cat0")
    base = sample_points(inst, rng, 1)[0]
    worst, unconverged = -math.inf, 0
    for _ in range(n):
        l, l0, l1 = sample_rays(inst, rng, 3, base=base)
        worst = max(worst, ray_cat0_defect(l, l0, l1, float(rng.random())))
    return SuiteResult("ray-cat0", inst.id, worst <= RAY_CAT0_TOL,
                       {"samples": n, "max_defect": worst})


def _flow_pair(inst, m):
    T = inst.settings.get("T", 1.0)
    method = inst.settings.get("slope_method", "resolvent")
    return (mayer_flow(inst.F, inst.x0, T, m, method), mayer_flow(inst.F, inst.x0, T, 2 * m, method))


def suite_evi(inst, seed=0, m=32):
    rng = rng_for(seed, inst.id, "evi")
    coarse, fine = _flow_pair(inst, m)
    probes = [inst.x0, coarse.points[-1]] + sample_points(inst, rng, 5)
    probes = [p for p in probes if math.isfinite(inst.F.value(p))]
    consts = []
    for traj in (coarse, fine):
        res = [r for v in probes for r in evi_residual(inst.F, traj, v)]
        consts.append(evi_constant(res, traj.step))
    c1, c2 = consts
    stable = abs(c2 - c1) <= 0.5 * max(c1, c2) + 1e-6
    return SuiteResult("evi", inst.id, stable, {"C": c1, "C_doubled": c2, "m": m, "probes": len(probes)})


def suite_sandwich(inst, seed=0, m=32):
    traj = mayer_flow(inst.F, inst.x0, inst.settings.get("T", 1.0), m,
                      inst.settings.get("slope_method", "resolvent"))
    worst = math.inf
    for i, j in itertools.combinations(range(len(traj)), 2):
        worst = min(worst, *sandwich_check(inst.F, traj, i, j))
    scale = 1.0 + float(np.max(np.abs(traj.slopes)))
    rises = float(np.max(np.diff(traj.slopes))) if len(traj) > 1 else 0.0
    monotone = rises <= 1e-8 * scale
    return SuiteResult("sandwich", inst.id, worst >= -SANDWICH_TOL and monotone,
                       {"min_gap": worst, "max_slope_rise": rises, "slopes_nonincreasing": monotone})


def suite_energy(inst, seed=0, m=32):
    """Energy-identity residual halves per doubling of ``m`` on smooth instances."""
    if not inst.id.startswith(SMOOTH_TAGS):
        return SuiteResult("energy", inst.id, True, {"skipped": "not a smooth instance"})
    ms = (m, 2 * m, 4 * m)
    res = [max(energy_identity_residual(inst.F, mayer_flow(inst.F, inst.x0, inst.settings.get("T", 1.0), k)))
           for k in ms]
    if max(res) < 1e-10:
        return SuiteResult("energy", inst.id, True, {"residuals": res, "ratios": [], "exact": True})
    ratios = [a / b for a, b in zip(res, res[1:])]
    passed = all(1.6 <= r <= 2.4 for r in ratios)
    return SuiteResult("energy", inst.id, passed, {"residuals": res, "ratios": ratios, "m": list(ms)})


def suite_moment_weight(inst, seed=0, n=50):
    rng = rng_for(seed, inst.id, "moment-weight")
    probes = sample_points(inst, rng, n) + list(inst.starts)
    probes = [p for p in probes if math.isfinite(inst.F.value(p))]
    rays = sample_rays(inst, rng, n)
    best = optimal_ray(inst)
    if best is not None:
        rays.append(best)
    gap = moment_weight_gap(inst.F, rays, probes, T_MAX)
    return SuiteResult("moment-weight", inst.id, gap >= -MOMENT_WEIGHT_TOL,
                       {"gap": gap, "rays": len(rays), "probes": len(probes)})


def suite_bind(inst, seed=0):
    tol = inst.settings.get("tol", 1e-3)
    Bs = []
    for x0 in inst.starts[:2]:
        res, _, _ = run_flow(inst.F, x0, inst.settings.get("horizon", 1.0), tol,
                             slope_method=inst.settings.get("slope_method", "resolvent"))
        Bs.append(res.value)
    diff = abs(Bs[0] - Bs[1])
    return SuiteResult("bind", inst.id, diff <= 2 * tol, {"B": Bs, "difference": diff, "tol": tol})


_RUNNERS = {
    "cat0": suite_cat0,
    "ray-cat0": suite_ray_cat0,
    "evi": suite_evi,
    "sandwich": suite_sandwich,
    "energy": suite_energy,
    "moment-weight": suite_moment_weight,
    "bind": suite_bind,
}


def run_suite(name: str, inst, seed: int = 0) -> SuiteResult:
    try:
        fn = _RUNNERS[name]
    except KeyError:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}") from None
    return fn(inst, seed)
