"""String ids for the shipped instances, as used by the command line.

Ids look like ``euclid.linear.3.4``, ``euclid.quadratic``, ``euclid.abs.2``,
``tripod.-1.2.2`` or ``toric.N256.a2.0`` (``toric.a3.0`` means ``N = 256``).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .model_spaces import AnalyticAnswers, make_euclidean, make_tripod
from .toric import ToricMabuchi, ToricSpace


class UnknownInstance(InputError):
    pass


@dataclass
class Instance:
    id: str
    kind: str  # "euclid", "tripod" or "toric"
    space: object
    F: object
    G: object
    x0: object
    starts: list
    answers: object = None  # AnalyticAnswers, or None when no closed form is claimed
    settings: dict = field(default_factory=dict)
    project: object = None  # map applied to ray samples in the uniqueness probe

    @property
    def unstable(self):
        """Analytic classification, when known."""
        if self.answers is None:
            return None
        return not self.answers.bounded


CANONICAL_IDS = (
    "euclid.linear.3.4",
    "euclid.quadratic",
    "euclid.abs",
    "euclid.exp_linear",
    "euclid.pair",
    "euclid.valley",
    "tripod.-1.2.2",
    "tripod.1.1.1",
    "tripod.0.2.2",
    "toric.N256.a2.0",
    "toric.N256.a3.0",
)

DEFAULT_SETTINGS = {"horizon": 1.0, "tol": 1e-3, "step": None, "threshold": 1.0,
                    "slope_method": "resolvent", "T": 1.0}

_NUM = r"-?\d+(?:\.\d+)?"


def list_instances():
    return list(CANONICAL_IDS)


def _euclid_starts(tag, dim):
    if tag == "linear":
        base = [np.zeros(dim), np.full(dim, 2.0), np.linspace(-1.0, 1.0, dim) * 3.0]
        return base
    if tag == "valley":
        return [np.r_[0.5, np.zeros(dim - 1)], np.r_[0.0, -0.3, np.zeros(dim - 2)],
                np.r_[-0.2, 0.2, np.zeros(dim - 2)]]
    if tag in ("exp_linear", "pair"):
        return [np.zeros(1), np.array([2.0]), np.array([-1.0])]
    if tag == "quadratic":
        return [np.ones(dim), np.full(dim, -3.0), np.full(dim, 0.5)]
    return [np.full(dim, 2.0), np.full(dim, -1.0)]  # abs


def _euclid(iid, rest):
    if not rest:
        raise UnknownInstance(iid)
    tag, params = rest[0], rest[1:]
    try:
        nums = [float(p) for p in params]
    except ValueError:
        raise UnknownInstance(iid) from None
    if tag == "linear":
        a = nums or [3.0, 4.0]
        space, F, ans = make_euclidean("linear", {"a": a})
    elif tag in ("quadratic", "abs", "valley"):
        if len(nums) > 1 or (nums and (nums[0] != int(nums[0]) or nums[0] < 1)):
            raise UnknownInstance(iid)
        if tag == "valley" and nums and nums[0] < 2:
            raise UnknownInstance(iid)
        space, F, ans = make_euclidean(tag, {"dim": int(nums[0])} if nums else None)
    elif tag in ("exp_linear", "pair") and not nums:
        space, F, ans = make_euclidean(tag)
    else:
        raise UnknownInstance(iid)
    G = F
    if tag == "pair":
        F, G = F
    starts = _euclid_starts(tag, space.dim)
    settings = dict(DEFAULT_SETTINGS)
    return Instance(iid, "euclid", space, F, G, starts[0], starts, ans, settings)


def _tripod(iid, text):
    parts = re.fullmatch(rf"({_NUM})\.({_NUM})\.({_NUM})", text)
    if parts is None:
        raise UnknownInstance(iid)
    alpha = [float(p) for p in parts.groups()]
    space, F, ans = make_tripod(alpha)
    lo = int(np.argmin(alpha)) + 1
    others = [b for b in (1, 2, 3) if b != lo]
    starts = [space.validate((0, 0.0)), space.validate((others[0], 1.0)), space.validate((others[1], 2.0))]
    return Instance(iid, "tripod", space, F, F, starts[0], starts, ans, dict(DEFAULT_SETTINGS))


def _toric(iid, N, a):
    if N < 16 or not a > 0:
        raise UnknownInstance(iid)
    space = ToricSpace(N)
    F = ToricMabuchi(space, a)
    x = space.x
    bump = 0.1 * np.sin(np.pi * x)
    if a == 2.0:
        starts = [bump, 0.05 * np.sin(2 * np.pi * x)]
    else:
        starts = [np.zeros(N + 1), bump]
    settings = dict(DEFAULT_SETTINGS, T=5.0)
    # The discrete integral of S is always 2, so |S - a|_W >= |2 - a| with
    # equality along the constant direction.
    direction = None if a == 2.0 else np.full(N + 1, np.sign(a - 2.0))
    ans = AnalyticAnswers(abs(2.0 - a), a == 2.0, direction)
    # Rays of the toric instance are compared modulo the constant direction.
    return Instance(iid, "toric", space, F, F, starts[0], starts, ans, settings,
                    project=space.remove_constants)


def resolve(instance_id: str) -> Instance:
    """Instance for ``instance_id``; raises :class:`UnknownInstance`."""
    if not isinstance(instance_id, str):
        raise UnknownInstance(repr(instance_id))
    try:
        head, _, rest = instance_id.partition(".")
        if head == "euclid":
            return _euclid(instance_id, rest.split(".") if rest else [])
        if head == "tripod":
            return _tripod(instance_id, rest)
        if head == "toric":
            m = re.fullmatch(r"(?:N(\d+)\.)?a(\d+(?:\.\d+)?)", rest)
            if m is None:
                raise UnknownInstance(instance_id)
            return _toric(instance_id, int(m.group(1) or 256), float(m.group(2)))
    except UnknownInstance:
        raise
    except InputError as exc:
        raise UnknownInstance(f"{instance_id}: {exc}") from exc
    raise UnknownInstance(instance_id)
