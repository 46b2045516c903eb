"""Command-line entry point: ``forcedflow {simulate,verify,mollify,plotdata,params}``.

Exit codes: 0 success (all checks pass), 1 a check failed, 2 usage, input
or I/O error.  Every output file is written to a temporary sibling first and
renamed into place.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import estimates as es
from . import flow as fl
from . import forcing as fo
from . import generators as gen
from . import network as nw
from .reports import reports_to_json

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("forcedflow")


class UsageError(Exception):
    """Bad configuration, missing file or unreadable input (exit code 2)."""


# ---------------------------------------------------------------------------
# configuration

@dataclass
class ExperimentConfig:
    """One reproducible experiment.

    ``init`` is a network JSON path or a generator call such as
    ``"circle(1, 256)"``; ``forcing`` is ``None``, a catalog spec
    ``{"kind": ..., ...}`` or a path to such a JSON file.
    """

    init: str = "circle(1, 256)"
    forcing: dict | str | None = None
    T: float = 0.45
    options: dict = field(default_factory=dict)
    suite: str = "all"
    constants: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        known = {"init", "forcing", "T", "options", "suite", "constants", "outputs"}
        unknown = set(data) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**{k: v for k, v in data.items()}, base_dir=base_dir or Path.cwd())
        cfg.validate()
        return cfg

    def _path(self, p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else self.base_dir / q

    def validate(self) -> None:
        if not (isinstance(self.T, (int, float)) and self.T > 0):
            raise UsageError("T must be a positive number")
        self.network()
        self.field()
        try:
            fl.FlowOptions.from_dict(self.options)
            es.VerifyConfig.from_dict(self.constants)
            es._parse_suite(self.suite)
        except (TypeError, ValueError) as exc:
            raise UsageError(str(exc)) from exc

    def network(self) -> nw.CurveNetwork:
        src = self.init
        if "(" in src:
            try:
                return gen.from_spec(src)
            except (ValueError, TypeError) as exc:
                raise UsageError(str(exc)) from exc
        p = self._path(src)
        if not p.exists():
            raise UsageError(f"network file {p} does not exist")
        try:
            return nw.load_network(p)
        except (ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"cannot read network {p}: {exc}") from exc

    def field(self) -> fo.ForcingField:
        spec = self.forcing
        if spec is None:
            return fo.zero_field()
        try:
            if isinstance(spec, str):
                p = self._path(spec)
                if not p.exists():
                    raise UsageError(f"forcing file {p} does not exist")
                return fo.load_field(p)
            return fo.field_from_dict(spec, self.base_dir)
        except FileNotFoundError as exc:
            raise UsageError(str(exc)) from exc
        except (ValueError, TypeError, KeyError) as exc:
            raise UsageError(f"bad forcing spec: {exc}") from exc


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file {p} does not exist")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {p} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    return data


# ---------------------------------------------------------------------------
# output helpers

def atomic_write(path: str | Path, text: str) -> None:
    """Write ``text`` to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Printer:
    def __init__(self, quiet: bool):
        self.quiet = quiet

    def __call__(self, *args):
        if not self.quiet:
            print(*args)


def _num(x) -> str:
    x = float(x) if x is not None else math.nan
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(args, say) -> int:
    data = load_config(args.config)
    for key in ("init", "T"):
        v = getattr(args, key, None)
        if v is not None:
            data[key] = v
    if args.forcing is not None:
        data["forcing"] = args.forcing
    if args.opts is not None:
        data["options"] = {**data.get("options", {}), **load_config(args.opts)}
    base = Path(args.config).parent if args.config else Path.cwd()
    cfg = ExperimentConfig.from_dict(data, base)
    out = args.out or cfg.outputs.get("trace")
    if not out:
        raise UsageError("simulate needs --out (or outputs.trace in the config)")
    net = cfg.network()
    u = cfg.field()
    opts = fl.FlowOptions.from_dict(cfg.options)
    trace = fl.run(net, u, float(cfg.T), opts)
    atomic_write(out, "\n".join(fl.trace_lines(trace)) + "\n")
    if args.budget_out:
        atomic_write(args.budget_out, json.dumps(trace.budget.to_dict(), indent=1) + "\n")
    s = trace.series
    say(f"steps={len(trace.ledger)} snapshots={len(trace.snapshots)} failed={trace.failed}")
    say(f"Phi: {s['Phi'][0]:.6g} -> {s['Phi'][-1]:.6g}")
    say(f"H:   {s['H'][0]:.6g} -> {s['H'][-1]:.6g}")
    say(f"U:   {s['U'][0]:.6g} -> {s['U'][-1]:.6g}")
    if trace.extinct_at is not None:
        say(f"extinct at t={trace.extinct_at:.6g}")
    if trace.failed:
        say(f"run aborted: {trace.error}")
        return EXIT_FAIL
    return EXIT_OK


def _read_trace(path: str) -> fl.FlowTrace:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"trace file {p} does not exist")
    try:
        return fl.trace_from_lines(p.read_text().splitlines())
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_verify(args, say) -> int:
    data = load_config(args.config)
    trace = _read_trace(args.trace)
    budget = None
    if args.budget:
        bp = Path(args.budget)
        if not bp.exists():
            raise UsageError(f"budget file {bp} does not exist")
        try:
            budget = fo.SobolevBudget.from_dict(json.loads(bp.read_text()))
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"bad budget file: {exc}") from exc
    constants = dict(data.get("constants", {}))
    if args.C is not None:
        constants["C"] = args.C
    try:
        cfg = es.VerifyConfig.from_dict(constants)
        suite = args.suite or data.get("suite", "all")
        es._parse_suite(suite)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    reports = es.verify_trace(trace, cfg, suite, budget)
    payload = reports_to_json(reports)
    if args.fit:
        fitted = es.fit_constant([trace])
        say(f"fitted C = {fitted:.6g}")
    out = args.out or data.get("outputs", {}).get("report")
    if out:
        atomic_write(out, payload + "\n")
    for r in reports:
        say(r.line())
    failed = [r.name for r in reports if not r.passed]
    if failed:
        say(f"failed: {', '.join(failed)}")
        return EXIT_FAIL
    return EXIT_OK


def cmd_mollify(args, say) -> int:
    p = Path(args.field)
    if not p.exists():
        raise UsageError(f"forcing file {p} does not exist")
    try:
        u = fo.load_field(p)
        params = fo.MollifierParams(args.m)
    except (ValueError, TypeError, KeyError) as exc:
        raise UsageError(str(exc)) from exc
    if not args.out:
        raise UsageError("mollify needs --out")
    um = fo.mollify(u, params)
    T = args.T if args.T is not None else (u.horizon if math.isfinite(u.horizon) else 1.0)
    R = max(um.support_radius, u.support_radius, 1e-3)
    n = args.n
    nt = args.nt
    lat = fo.Lattice(n, n, nt, -R, -R, 0.0, 2 * R / (n - 1), 2 * R / (n - 1), T / max(nt - 1, 1))
    grid = fo.sample(um, lat)
    fo.save_grid(grid, args.out)
    dist = fo.w12_distance(u, um, T) if not u.is_zero else 0.0
    say(f"w12_distance(u, u^({args.m})) = {dist:.6g}")
    return EXIT_OK


PLOT_HEADER = ["t", "mass", "density", "H", "U"]


def plot_rows(trace: fl.FlowTrace) -> tuple[list[str], list[list[str]]]:
    n = trace.snapshots[0].network.phase_count
    header = PLOT_HEADER + [f"area_{i}" for i in range(1, n + 1)]
    st = np.array(trace.series.get("t", [0.0]))
    rows = []
    for s in trace.snapshots:
        k = int(np.argmin(np.abs(st - s.t))) if len(st) else 0
        H = trace.series.get("H", [0.0])[k]
        U = trace.series.get("U", [0.0])[k]
        rows.append([_num(s.t), _num(s.mass), _num(s.density), _num(H), _num(U)]
                    + [_num(a) for a in s.phase_areas()])
    return header, rows


def cmd_plotdata(args, say) -> int:
    p = Path(args.trace)
    if not p.exists():
        raise UsageError(f"trace file {p} does not exist")
    if not args.out:
        raise UsageError("plotdata needs --out")
    lines = [ln for ln in p.read_text().splitlines() if ln.strip()]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if not lines:
        w.writerow(PLOT_HEADER)
        atomic_write(args.out, buf.getvalue())
        say("empty trace: header only")
        return EXIT_OK
    try:
        trace = fl.trace_from_lines(lines)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    header, rows = plot_rows(trace)
    w.writerow(header)
    w.writerows(rows)
    atomic_write(args.out, buf.getvalue())
    say(f"wrote {len(rows)} rows x {len(header)} columns")
    return EXIT_OK


def cmd_params(args, say) -> int:
    try:
        c2, p, dt = fl.construction_params(args.eps, args.n)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    text = json.dumps({"eps": args.eps, "n": args.n, "c2": c2, "p": p, "dt": dt})
    if args.out:
        atomic_write(args.out, text + "\n")
    say(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def _common(default) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=default, help="experiment config (JSON)")
    p.add_argument("--out", default=default, help="output path")
    p.add_argument("--quiet", action="store_true", default=default, help="suppress console output")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forcedflow", parents=[_common(None)],
                                     description="Forced curve-network flow simulator and estimate checker.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common(argparse.SUPPRESS)

    s = sub.add_parser("simulate", parents=[common], help="run the flow and write a JSONL trace")
    s.add_argument("--init", help="network JSON or generator call, e.g. 'circle(1,256)'")
    s.add_argument("--forcing", help="forcing JSON file")
    s.add_argument("--T", type=float, help="horizon")
    s.add_argument("--opts", help="flow options JSON")
    s.add_argument("--budget-out", help="also write the Sobolev budget JSON")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", parents=[common], help="run estimate checks on a trace")
    v.add_argument("--trace", required=True)
    v.add_argument("--budget", help="Sobolev budget JSON (default: the one stored in the trace)")
    v.add_argument("--suite", help="all or a comma list of: " + ", ".join(es.SUITES))
    v.add_argument("--C", type=float, help="interpolation constant")
    v.add_argument("--fit", action="store_true", help="also report the smallest passing C")
    v.set_defaults(func=cmd_verify)

    m = sub.add_parser("mollify", parents=[common], help="sample the mollified field on a grid")
    m.add_argument("--field", required=True)
    m.add_argument("--m", type=int, required=True)
    m.add_argument("--T", type=float, help="time span of the grid and of the distance integral")
    m.add_argument("--n", type=int, default=41, help="grid points per axis")
    m.add_argument("--nt", type=int, default=3, help="time levels")
    m.set_defaults(func=cmd_mollify)

    d = sub.add_parser("plotdata", parents=[common], help="CSV time series of a trace")
    d.add_argument("--trace", required=True)
    d.set_defaults(func=cmd_plotdata)

    q = sub.add_parser("params", parents=[common], help="print the discrete construction parameters")
    q.add_argument("--eps", type=float, required=True)
    q.add_argument("--n", type=int, default=1)
    q.set_defaults(func=cmd_params)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING, format="%(levelname)s: %(message)s")
    say = _Printer(bool(args.quiet))
    try:
        return args.func(args, say)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, fo.GridError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
