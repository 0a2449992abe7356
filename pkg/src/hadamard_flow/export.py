"""Deterministic CSV/JSON writers, shipped JSON schemas and generated plot scripts.

Floats are written with ``repr`` (shortest round-trip form); non-finite
values become the strings ``"inf"``, ``"-inf"`` and ``"nan"`` in JSON and
the same tokens in CSV.  Nothing time- or host-dependent is ever written.
"""

from __future__ import annotations

import csv
import io
import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from .flow import energy_identity_residual, evi_residual

SCHEMA_VERSION = "v1"
SCHEMA_NAMES = ("flow", "report", "check", "error")


def schema(name: str) -> dict:
    if name not in SCHEMA_NAMES:
        raise KeyError(name)
    text = resources.files("hadamard_flow").joinpath("schemas", f"{name}.{SCHEMA_VERSION}.json").read_text()
    return json.loads(text)


def _real(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def jsonable(obj):
    """Plain JSON types; numpy scalars and arrays, tuples, enums and rays are converted."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if hasattr(obj, "to_json"):
        return jsonable(obj.to_json())
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _real(obj)
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "value") and isinstance(obj.value, str):  # enums
        return obj.value
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(doc) -> str:
    return json.dumps(jsonable(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, doc):
    Path(path).write_text(dumps(doc), encoding="utf-8")


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        r = _real(v)
        return r if isinstance(r, str) else repr(r)
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows):
    Path(path).write_text(csv_text(header, rows), encoding="utf-8")


# ---------------------------------------------------------------- tables

def trajectory_table(G, traj, calabi=None):
    """Header and rows for a flow trajectory.

    ``evi_residual`` is the step residual against the start ``x0`` (on the
    row of the step's endpoint), ``energy_residual`` the energy-identity
    residual of the step leaving the row's node.
    """
    space = G.space
    x0 = traj.points[0]
    evi = evi_residual(G, traj, x0)
    energy = energy_identity_residual(G, traj)
    header = ["k", "t", "value", "slope", "dist_from_start", "evi_residual", "energy_residual"]
    if calabi is not None:
        header.append("calabi")
    rows = []
    for k, p in enumerate(traj.points):
        row = [k, float(traj.times[k]), float(traj.values[k]), float(traj.slopes[k]),
               space.distance(x0, p), evi[k - 1] if k > 0 else None,
               energy[k] if k < len(energy) else None]
        if calabi is not None:
            row.append(calabi(p))
        rows.append(row)
    return header, rows


def ray_table(F, ray, samples=None):
    """``s, dist_from_base, value`` along an extracted ray."""
    space = ray.space
    samples = list(ray.times) if samples is None else samples
    rows = []
    for s in samples:
        p = ray.position(float(s))
        rows.append([float(s), space.distance(ray.base, p), F.value(p)])
    return ["s", "dist_from_base", "value"], rows


def profile_table(space, ray):
    """Direction profile ``f = ray(1) - ray(0)`` of a flat ray over the grid ``x``."""
    f = np.asarray(ray.position(1.0)) - np.asarray(ray.base)
    return ["x", "f"], [[float(x), float(v)] for x, v in zip(space.x, f)]


PLOT_TEMPLATE = '''"""Plot script generated alongside {title}; run with python3 to write {png}."""

import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {{k: [float(r[k]) if r[k] else float("nan") for r in rows] for k in rows[0]}}


traj = read({traj!r})
fig, axes = plt.subplots(1, {ncols}, figsize=({width}, 4))
axes = list(axes) if {ncols} > 1 else [axes]
axes[0].plot(traj["t"], traj["value"], label="value")
axes[0].set_xlabel("t")
axes[0].legend()
axes[1].semilogy(traj["t"], [max(s, 1e-16) for s in traj["slope"]], label="slope")
axes[1].set_xlabel("t")
axes[1].legend()
{ray_block}fig.tight_layout()
fig.savefig({png!r}, dpi=120)
'''

RAY_BLOCK = '''ray = read({ray!r})
axes[2].plot(ray[{xcol!r}], ray[{ycol!r}], marker="o")
axes[2].set_xlabel({xcol!r})
axes[2].set_ylabel({ycol!r})
axes[2].set_title("extracted ray")
'''


def plot_script(title, traj_csv, png, ray_csv=None, ray_cols=("s", "value")) -> str:
    ray_block = ""
    ncols = 2
    if ray_csv is not None:
        ray_block = RAY_BLOCK.format(ray=ray_csv, xcol=ray_cols[0], ycol=ray_cols[1])
        ncols = 3
    return PLOT_TEMPLATE.format(title=title, traj=traj_csv, png=png, ncols=ncols,
                                width=5 * ncols, ray_block=ray_block)
