"""Command-line driver: ``flow``, ``destabilize``, ``check`` and ``list``.

Exit codes: 0 success, 1 a property suite failed, 2 configuration error
(including unknown instance ids), 3 numerical failure.  Errors are reported
as a JSON document on stdout (and in ``<out>/error.json`` when possible).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from functools import partial
from pathlib import Path

from . import checks, export
from .destabilizer import FlowCase, combine_probe, probe_start, sharpness_report
from .errors import InputError, NumericalError
from .flow import flow
from .registry import UnknownInstance, list_instances, resolve
from .toric import calabi_energy_toric, snapshot_rows

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

# Flags that may also come from a --config file, with their parsers.
CONFIG_KEYS = {
    "instance": str, "x0": str, "starts": str, "T": float, "tol": float, "m_cap": int,
    "m0": int, "jobs": int, "out": str, "seed": int, "suite": str,
}


class ConfigError(InputError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    p = _Parser(prog="hadamard-flow", description="Proximal gradient flows, limit slopes and destabilising rays.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, instance=True):
        if instance:
            sp.add_argument("--instance", help="registry id, e.g. euclid.linear.3.4 (see `list`)")
        sp.add_argument("--config", help="key=value file; command-line flags take precedence")
        sp.add_argument("--out", help="output directory (default: out)")
        sp.add_argument("--seed", type=int, help="seed for randomised suites (default 0)")
        sp.add_argument("--jobs", type=int, help="worker processes (default 1)")
        sp.add_argument("--tol", type=float, help="tolerance (default: instance setting)")

    f = sub.add_parser("flow", help="compute a weak gradient flow and write its trajectory")
    common(f)
    f.add_argument("--x0", help="start point as a JSON literal or comma list (default: instance start)")
    f.add_argument("--T", type=float, help="horizon")
    f.add_argument("--m-cap", dest="m_cap", type=int, help="largest number of proximal steps (default 65536)")
    f.add_argument("--m0", type=int, help="initial number of steps before doubling (default 8)")

    d = sub.add_parser("destabilize", help="sharpness report: limit slope versus the extracted ray")
    common(d)
    d.add_argument("--x0", help="start point (default: instance start)")
    d.add_argument("--starts", help="number of instance starts, or a JSON list of points, for the uniqueness probe")
    d.add_argument("--T", type=float, help="initial horizon of the limit-slope run")
    d.add_argument("--m-cap", dest="m_cap", type=int, help="largest number of proximal steps (default 131072)")

    c = sub.add_parser("check", help="run property suites and print a pass/fail table")
    common(c)
    c.add_argument("--suite", help=f"one of {', '.join(checks.SUITES)} or all (default all)")

    sub.add_parser("list", help="list registered instance ids")
    return p


def _load_config(path):
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    for n, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in CONFIG_KEYS:
            raise ConfigError(f"config line {n}: expected key=value with key in {sorted(CONFIG_KEYS)}")
        try:
            out[key] = CONFIG_KEYS[key](val.strip())
        except ValueError:
            raise ConfigError(f"config line {n}: bad value for {key}") from None
    return out


def _merge(args):
    cfg = _load_config(args.config) if getattr(args, "config", None) else {}
    for key, val in cfg.items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, val)
    return args


def _parse_point(space, text):
    try:
        val = json.loads(text)
    except json.JSONDecodeError:
        try:
            val = [float(t) for t in text.split(",")]
        except ValueError:
            raise ConfigError(f"cannot parse point {text!r}") from None
    if isinstance(val, (int, float)):
        val = [val]
    try:
        return space.from_payload(val)
    except InputError as exc:
        raise ConfigError(f"invalid point {text!r}: {exc}") from None


def _positive(name, v):
    if v is not None and not (v > 0 and math.isfinite(v)):
        raise ConfigError(f"{name} must be positive, got {v}")


def _instance_doc(inst):
    ans = inst.answers
    return {"id": inst.id, "kind": inst.kind,
            "analytic": None if ans is None else {"B": ans.B, "bounded": ans.bounded}}


@contextmanager
def _mapper(jobs):
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            yield ex.map
    else:
        yield map


def _outdir(args):
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------- commands

def cmd_flow(args):
    inst = resolve(args.instance or "")
    T = args.T if args.T is not None else inst.settings["T"]
    tol = args.tol if args.tol is not None else inst.settings["tol"]
    _positive("T", T)
    _positive("tol", tol)
    m_cap = args.m_cap or 2 ** 16
    m0 = args.m0 or 8
    if m0 < 1 or m_cap < 2 * m0:
        raise ConfigError("need m0 >= 1 and m_cap >= 2 * m0")
    x0 = inst.x0 if args.x0 is None else _parse_point(inst.space, args.x0)
    out = _outdir(args)
    method = inst.settings["slope_method"]
    traj = flow(inst.F, x0, T, tol, m0=m0, m_cap=m_cap, slope_method=method)
    calabi = (lambda p: calabi_energy_toric(p, inst.F.a)) if inst.kind == "toric" else None
    header, rows = export.trajectory_table(inst.F, traj, calabi)
    stem = f"flow-{inst.id}"
    export.write_csv(out / f"{stem}.csv", header, rows)
    col = {h: [r[i] for r in rows] for i, h in enumerate(header)}
    doc = {
        "schema_version": export.SCHEMA_VERSION, "kind": "flow",
        "instance": _instance_doc(inst),
        "config": {"T": T, "tol": tol, "m_cap": m_cap, "m0": m0,
                   "x0": inst.space.to_payload(inst.space.validate(x0))},
        "trajectory": {"m": traj.m, "step": traj.step, "T": traj.T, "times": col["t"],
                       "values": col["value"], "slopes": col["slope"],
                       "dist_from_start": col["dist_from_start"],
                       "cauchy_gaps": traj.meta.get("cauchy_gaps", [])},
        "final_point": inst.space.to_payload(traj.points[-1]),
    }
    if calabi is not None:
        doc["trajectory"]["calabi"] = col["calabi"]
        export.write_csv(out / f"{stem}-snapshot.csv", ["x", "u", "phi", "S", "w"],
                         snapshot_rows(traj.points[-1], inst.F.a))
    export.write_json(out / f"{stem}.json", doc)
    print(f"{inst.id}: m={traj.m} T={traj.T:g} final value {traj.values[-1]:.12g} -> {out / stem}.csv")
    return EXIT_OK


def _starts(inst, text):
    if text is None:
        return None
    text = text.strip()
    if text.isdigit():
        k = int(text)
        if not 2 <= k <= len(inst.starts):
            raise ConfigError(f"--starts must be between 2 and {len(inst.starts)} for {inst.id}")
        return list(inst.starts[:k])
    try:
        val = json.loads(text)
    except json.JSONDecodeError:
        raise ConfigError("--starts must be an integer or a JSON list of points") from None
    if not isinstance(val, list) or len(val) < 2:
        raise ConfigError("--starts needs at least two points")
    return [_parse_point(inst.space, json.dumps(v)) for v in val]


def cmd_destabilize(args):
    inst = resolve(args.instance or "")
    s = inst.settings
    horizon = args.T if args.T is not None else s["horizon"]
    tol = args.tol if args.tol is not None else s["tol"]
    _positive("T", horizon)
    _positive("tol", tol)
    step = s["step"] if s["step"] is not None else horizon / 32.0
    m_cap = args.m_cap or 2 ** 17
    horizon_cap = min(2.0 ** 12, m_cap * step)
    x0 = inst.x0 if args.x0 is None else _parse_point(inst.space, args.x0)
    starts = _starts(inst, args.starts)
    out = _outdir(args)
    kw = dict(horizon=horizon, tol=tol, step=step, threshold=s["threshold"],
              horizon_cap=horizon_cap, slope_method=s["slope_method"])
    rep = sharpness_report(inst.F, inst.G if inst.G is not inst.F else None, x0, **kw)
    uniq = None
    if starts is not None:
        worker = partial(probe_start, inst.F, horizon=horizon, tol=tol, step=step,
                         threshold=s["threshold"], horizon_cap=horizon_cap,
                         slope_method=s["slope_method"])
        with _mapper(args.jobs) as mapper:
            results = list(mapper(worker, starts))
        value, details = combine_probe(inst.space, results, inst.project)
        uniq = {"value": value, "starts": len(starts), "details": details}
    stem = f"destabilize-{inst.id}"
    doc = {
        "schema_version": export.SCHEMA_VERSION, "kind": "report",
        "instance": _instance_doc(inst),
        "config": {"T": horizon, "tol": tol, "m_cap": m_cap, "step": step,
                   "x0": inst.space.to_payload(inst.space.validate(x0))},
        "report": rep.to_json(),
        "uniqueness": uniq,
    }
    export.write_json(out / f"{stem}.json", doc)
    export.write_csv(out / f"{stem}-summary.csv",
                     ["instance", "case", "B", "ratio", "norm", "gap", "unstable", "uniqueness"],
                     [[inst.id, rep.case.value, rep.B, rep.ratio, rep.norm, rep.gap, rep.unstable,
                       None if uniq is None else uniq["value"]]])
    calabi = (lambda p: calabi_energy_toric(p, inst.F.a)) if inst.kind == "toric" else None
    export.write_csv(out / f"{stem}-trajectory.csv", *export.trajectory_table(inst.F, rep.trajectory, calabi))
    ray_csv, cols = None, ("s", "value")
    if rep.case is FlowCase.ESCAPING:
        if inst.kind == "toric":
            ray_csv, cols = f"{stem}-ray.csv", ("x", "f")
            export.write_csv(out / ray_csv, *export.profile_table(inst.space, rep.ray))
        else:
            ray_csv = f"{stem}-ray.csv"
            export.write_csv(out / ray_csv, *export.ray_table(inst.F, rep.ray))
    (out / f"{stem}-plot.py").write_text(
        export.plot_script(f"{stem}.json", f"{stem}-trajectory.csv", f"{stem}.png", ray_csv, cols),
        encoding="utf-8")
    line = f"{inst.id}: {rep.case.value} B={rep.B:.9g} ratio={rep.ratio:.9g} norm={rep.norm:.9g} gap={rep.gap:.3g}"
    if uniq is not None:
        line += f" uniqueness={uniq['value']:.3g}"
    print(line)
    return EXIT_OK


def _suite_job(job):
    suite, iid, seed = job
    return checks.run_suite(suite, resolve(iid), seed).to_json()


def cmd_check(args):
    suites = checks.SUITES if args.suite in (None, "all") else [args.suite]
    for s in suites:
        if s not in checks.SUITES:
            raise ConfigError(f"unknown suite {s!r}; choose from {', '.join(checks.SUITES)} or all")
    ids = list_instances() if args.instance in (None, "all") else [args.instance]
    for iid in ids:
        resolve(iid)
    seed = args.seed if args.seed is not None else 0
    jobs = [(s, iid, seed) for iid in ids for s in suites]
    with _mapper(args.jobs) as mapper:
        results = list(mapper(_suite_job, jobs))
    passed = all(r["passed"] for r in results)
    width = max(len(r["instance"]) for r in results)
    for r in results:
        print(f"{r['instance']:<{width}}  {r['suite']:<14} {'pass' if r['passed'] else 'FAIL'}")
    print(f"{'all suites pass' if passed else 'some suites FAILED'} ({len(results)} runs)")
    out = _outdir(args) if args.out else None
    if out is not None:
        export.write_json(out / "check.json", {"schema_version": export.SCHEMA_VERSION, "kind": "check",
                                               "seed": seed, "passed": passed, "results": results})
    return EXIT_OK if passed else EXIT_FAIL


def cmd_list(args):
    for iid in list_instances():
        print(iid)
    return EXIT_OK


COMMANDS = {"flow": cmd_flow, "destabilize": cmd_destabilize, "check": cmd_check, "list": cmd_list}


def _fail(kind, message, out=None, **details):
    doc = {"schema_version": export.SCHEMA_VERSION, "error": kind, "message": message}
    if details:
        doc["details"] = details
    text = export.dumps(doc)
    sys.stdout.write(text)
    if out:
        try:
            Path(out).mkdir(parents=True, exist_ok=True)
            (Path(out) / "error.json").write_text(text, encoding="utf-8")
        except OSError:
            pass


def main(argv=None) -> int:
    parser = build_parser()
    out = None
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise ConfigError("missing command; choose one of flow, destabilize, check, list")
        if args.command != "list":
            args = _merge(args)
            out = args.out
            if args.jobs is not None and args.jobs < 1:
                raise ConfigError("--jobs must be at least 1")
        return COMMANDS[args.command](args)
    except UnknownInstance as exc:
        _fail("unknown_instance", f"unknown instance id: {exc}", out)
        return EXIT_CONFIG
    except NumericalError as exc:
        info = {k: v for k, v in exc.info.items() if isinstance(v, (int, float, str))}
        if exc.residual is not None:
            info["residual"] = float(exc.residual)
        _fail("numerical", str(exc), out, **info)
        return EXIT_NUMERICAL
    except InputError as exc:
        _fail("config", str(exc), out)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
