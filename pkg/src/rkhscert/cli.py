"""Command-line front end: ``rkhscert certify|gallery|psd-check|oracle``.

Exit codes: 0 on a definite answer, 2 on an inconclusive one, 1 on errors.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, gallery, matrix_oracle
from ._json import ConfigError
from .config import RunConfig
from .kernel_core import kernel_from_json
from .norm_certifier import OperatorSpec, certify
from .psd_engine import PointSet, psd_check, sample_points

EXIT_OK, EXIT_ERROR, EXIT_INCONCLUSIVE = 0, 1, 2


class CliError(Exception):
    pass


def _u64(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _int_list(text):
    try:
        vals = [int(s) for s in text.replace(" ", "").split(",") if s]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _common(parser, suppress):
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=d, help="JSON run configuration")
    parser.add_argument("--seed", type=_u64, default=d, help="sampling seed (u64)")
    parser.add_argument("--out", default=d, help="output directory")
    parser.add_argument("--tol", type=float, default=d, help="relative PSD tolerance")
    parser.add_argument("--stages", type=_int_list, default=d, help="comma-separated stage sizes, e.g. 25,50,100")
    parser.add_argument("--preset", default=d, help="named operator or map preset")
    parser.add_argument("--filter", default=d, help="gallery case name pattern (substring or glob)")


def build_parser():
    p = argparse.ArgumentParser(prog="rkhscert",
                                description="Numerical evidence for composition operator norms on RKHSs.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _common(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("certify", help="pencil trace and bounds for one operator")
    _common(c, suppress=True)

    g = sub.add_parser("gallery", help="run the built-in example presets against shipped expectations")
    _common(g, suppress=True)
    g.add_argument("--jobs", type=int, default=1, help="cases to run in parallel")

    k = sub.add_parser("psd-check", help="PSD verdict for a kernel on a point set")
    _common(k, suppress=True)
    k.add_argument("--kernel", help="kernel JSON file (overrides the config's kernel)")
    k.add_argument("--points", help="PointSet CSV (default: sample per the config)")
    k.add_argument("--strategy", choices=["grid", "uniform_random", "boundary_biased"])
    k.add_argument("--size", type=int)

    o = sub.add_parser("oracle", help="truncated-matrix norms for a disc map preset")
    _common(o, suppress=True)
    o.add_argument("--schedule", type=_int_list, help="truncation orders, e.g. 50,100,200")
    o.add_argument("--export-matrix", action="store_true", help="write the largest truncation as CSV")
    return p


def resolve_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    return cfg.with_overrides(seed=args.seed, out=args.out, tol=args.tol, stages=args.stages,
                              preset=args.preset, filter=args.filter)


def _out_dir(cfg):
    os.makedirs(cfg.output.dir, exist_ok=True)
    return cfg.output.dir


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _write_meta(path, command):
    # wall-clock data lives here so the main report stays byte-reproducible
    _write_json(path, {"command": command, "version": __version__,
                       "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")})


def _operator(cfg):
    if cfg.preset:
        try:
            p = gallery.get_preset(cfg.preset)
        except KeyError as exc:
            raise CliError(exc.args[0]) from None
        return cfg.preset, p.build(), p.cap
    if cfg.spec is not None:
        return "custom", OperatorSpec.from_json(cfg.spec, "$.spec"), None
    raise CliError("certify needs --preset or a 'spec' entry in the config")


def cmd_certify(cfg: RunConfig) -> int:
    name, spec, cap = _operator(cfg)
    report = certify(spec, cfg.budget(cap), cfg.certifier_tolerances())
    out = _out_dir(cfg)
    base = os.path.join(out, f"certify-{name}")
    doc = {"version": __version__, "config": cfg.to_json(), "operator": spec.to_json(),
           "report": report.to_json()}
    _write_json(base + ".json", doc)
    report.trace_to_csv(base + "-trace.csv")
    _write_meta(base + ".meta.json", "certify")

    print(f"{name}: {report.verdict}")
    for m, c in report.pencil_trace:
        print(f"  m={m:5d}  c_min={c:.10g}")
    for b in report.lower_bounds:
        print(f"  lower {b.method:24s} {b.value:.10g}")
    for b in report.upper_bounds:
        v = "n/a" if b.value is None else f"{b.value:.10g}"
        print(f"  upper {b.method:24s} {v}{'  (' + b.caveat + ')' if b.caveat else ''}")
    print(f"report: {base}.json")
    return EXIT_INCONCLUSIVE if report.verdict == "inconclusive" else EXIT_OK


def cmd_gallery(cfg: RunConfig, jobs=1) -> int:
    cases = gallery.select(cfg.filter)
    if not cases:
        raise CliError(f"no gallery case matches {cfg.filter!r}")
    budget, tol = cfg.budget(), cfg.certifier_tolerances()
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            rows = gallery.run_gallery(cfg.filter, budget, tol, executor=ex)
    else:
        rows = gallery.run_gallery(cfg.filter, budget, tol)

    width = max(len(r.name) for r in rows)
    print(f"{'case':{width}s}  {'verdict':18s}  {'c_min':>12s}  result")
    for r in rows:
        c = r.trace[-1][1] if r.trace else None
        cs = "" if c is None else f"{c:.6g}"
        print(f"{r.name:{width}s}  {r.verdict:18s}  {cs:>12s}  {'pass' if r.passed else 'FAIL'}"
              + (f"  {r.failure}" if r.failure else ""))
    out = _out_dir(cfg)
    _write_json(os.path.join(out, "gallery.json"),
                {"version": __version__, "config": cfg.to_json(), "rows": [r.to_json() for r in rows]})
    _write_meta(os.path.join(out, "gallery.meta.json"), "gallery")
    failed = sum(not r.passed for r in rows)
    print(f"{len(rows) - failed}/{len(rows)} cases passed")
    return EXIT_OK if not failed else EXIT_ERROR


def _load_json_file(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON ({exc.msg} at line {exc.lineno})", path) from exc


def cmd_psd_check(cfg: RunConfig, kernel_path=None, points_path=None, strategy=None, size=None) -> int:
    if kernel_path:
        k = kernel_from_json(_load_json_file(kernel_path))
    elif cfg.kernel is not None:
        k = kernel_from_json(cfg.kernel, "$.kernel")
    else:
        raise CliError("psd-check needs --kernel or a 'kernel' entry in the config")
    pts_src = points_path or cfg.points
    if pts_src:
        pts = PointSet.from_csv(pts_src)
        if not pts.domain.same_set(k.domain):
            raise CliError(f"points live on {pts.domain} but the kernel lives on {k.domain}")
    else:
        s = cfg.sampling
        pts = sample_points(k.domain, strategy or s.strategy, size or s.size, seed=s.seed,
                            cap=s.cap if s.cap is not None else 1e-8, label="psd-check")
    v = psd_check(k, pts, cfg.tolerances.psd_tol)
    print(json.dumps({"kernel": k.to_json(), "points": len(pts), "label": pts.label, **v.to_json()}, indent=2))
    if v.verdict == "not_psd":
        path = os.path.join(_out_dir(cfg), "psd-witness.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "re", "im"])
            for i, c in enumerate(v.witness):
                w.writerow([i, repr(float(c.real)), repr(float(c.imag))])
        print(f"witness: {path}")
    return EXIT_INCONCLUSIVE if v.verdict == "inconclusive" else EXIT_OK


def cmd_oracle(cfg: RunConfig, schedule=None, export=False) -> int:
    name = cfg.preset or "mobius-half"
    try:
        spec = gallery.get_preset(name).build()
    except KeyError as exc:
        raise CliError(exc.args[0]) from None
    phi = spec.map
    if not matrix_oracle.supports(phi):
        raise matrix_oracle.UnsupportedMapError(f"preset {name!r} is not a supported self-map of the disc")
    sched = list(schedule or cfg.oracle.schedule)
    t = cfg.tolerances
    rows = matrix_oracle.truncation_schedule(phi, sched, t.oracle_tol, t.oracle_max_iter, cfg.sampling.seed)
    print(f"{name}: truncated matrix norms")
    print(f"{'N':>6s}  {'norm':>16s}  {'increment':>12s}")
    prev = None
    for N, v in rows:
        inc = "" if prev is None else f"{v - prev:.3e}"
        print(f"{N:6d}  {v:16.12f}  {inc:>12s}")
        prev = v
    n_adj = rows[-1][0]
    print(f"adjoint action residuals at N={n_adj}")
    for x in cfg.oracle.adjoint_points:
        print(f"  x={x:+.3f}  {matrix_oracle.adjoint_action_check(phi, x, n_adj):.3e}")
    if export:
        path = os.path.join(_out_dir(cfg), f"oracle-{name}-{n_adj}.csv")
        matrix_oracle.truncated_operator(phi, n_adj, n_adj).to_csv(path)
        print(f"matrix: {path}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "certify":
            return cmd_certify(cfg)
        if args.command == "gallery":
            return cmd_gallery(cfg, args.jobs)
        if args.command == "psd-check":
            return cmd_psd_check(cfg, args.kernel, args.points, args.strategy, args.size)
        if args.command == "oracle":
            return cmd_oracle(cfg, args.schedule, args.export_matrix)
    except (ConfigError, CliError) as exc:
        print(f"rkhscert: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ArithmeticError, np.linalg.LinAlgError, ValueError, TypeError, OSError, RuntimeError) as exc:
        print(f"rkhscert: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    parser.error(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
