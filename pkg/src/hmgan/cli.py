"""Command-line entry point.

Exit status: 0 on success, 1 on invalid input or config, 2 when a run fails or
raises at runtime. Errors print one line on stderr.
"""
import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .config import validate_config
from .errors import ConfigError
from .experiment import (format_summary, load_reports, run_seeds, summarize_reports, sweep_ere,
                         two_step_bounds)
from .metrics import evaluate_points, ndb_fit, random_embedder
from .rng import NDB, rng_stream
from .stopping import simulate

log = logging.getLogger("hmgan")


class UsageError(Exception):
    pass


class RunFailed(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _int_list(text):
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text):
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser():
    p = _Parser(prog="hmgan", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def experiment(name, help):
        s = sub.add_parser(name, help=help)
        s.add_argument("--config", required=True, help="config JSON or a previous manifest.json")
        s.add_argument("--out", required=True, help="output directory")
        s.add_argument("--seeds", type=_int_list, help="comma-separated seeds (overrides config)")
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted override, applied left to right")
        s.add_argument("--jobs", type=int, default=1, help="parallel seeds")
        return s

    experiment("train", "train and evaluate one run per seed")
    experiment("bounds", "pretrain with all targets at 0 and write per-layer lower bounds")
    s = experiment("sweep-ere", "vary one layer's ERE target and record diversity")
    s.add_argument("--layer", type=int, help="generator layer in 2..n (default: middle)")
    s.add_argument("--lambdas", type=_float_list, default=[1.0, 0.5, 0.0])

    s = sub.add_parser("metrics", help="score a generated point set against a real one")
    s.add_argument("--real", required=True, help="CSV with header x,y,c")
    s.add_argument("--gen", required=True, help="CSV with header x,y,c")
    s.add_argument("--k", type=int, default=20)
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--seed", type=int, default=0, help="k-means seed")
    s.add_argument("--embedder-seed", type=int, default=0)

    s = sub.add_parser("simulate-prop1", help="stopping-time comparison under exponential decay")
    s.add_argument("--count", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--min-rho", type=float, default=100.0)
    s.add_argument("--max-rho", type=float, default=1000.0)
    s.add_argument("--out", help="JSON lines file (default: stdout)")

    s = sub.add_parser("report", help="median and IQR tables per variant")
    s.add_argument("--in", dest="inp", required=True, help="directory of runs")
    return p


def load_config(args):
    overrides = list(args.set)
    if args.seeds:
        overrides.append("seeds=" + json.dumps(args.seeds))
    return validate_config(args.config, overrides)


def write_manifest(out, config, command, runs, extra=None):
    doc = {"tool": "hmgan", "version": __version__, "command": command,
           "config_hash": config.hash(), "config": config.to_dict(), "runs": runs}
    if extra:
        doc.update(extra)
    with open(os.path.join(out, "manifest.json"), "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def _check_runs(runs):
    failed = [r for r in runs if r["status"] != "ok"]
    if failed:
        seeds = ", ".join(str(r["seed"]) for r in failed)
        raise RunFailed(f"{len(failed)} of {len(runs)} runs failed (seeds {seeds})")


def cmd_train(args):
    config = load_config(args)
    os.makedirs(args.out, exist_ok=True)
    runs, reports = run_seeds(config, args.out, jobs=args.jobs)
    write_manifest(args.out, config, "train", runs)
    for r in reports:
        print(f"seed {r.seed}: fid={r.fid:.4f} ndb={r.ndb} jsd={r.jsd:.4f} coverage={r.coverage}")
    _check_runs(runs)


def cmd_bounds(args):
    config = load_config(args)
    os.makedirs(args.out, exist_ok=True)
    runs, lines = [], []
    for seed in config.seeds:
        try:
            bv = two_step_bounds(config, seed)
        except RuntimeError as exc:
            runs.append({"seed": seed, "status": "failed", "error": str(exc)})
            continue
        runs.append({"seed": seed, "status": "ok"})
        lines.extend(dict(rec, seed=seed) for rec in bv.as_records())
    with open(os.path.join(args.out, "bounds.jsonl"), "w") as f:
        for rec in lines:
            f.write(json.dumps(rec, sort_keys=True) + "\n")
            print(json.dumps(rec, sort_keys=True))
    write_manifest(args.out, config, "bounds", runs)
    _check_runs(runs)


def cmd_sweep(args):
    config = load_config(args)
    layer = args.layer if args.layer is not None else config.n_layers // 2 + 1
    os.makedirs(args.out, exist_ok=True)
    rows, summary = sweep_ere(config, layer, args.lambdas, jobs=args.jobs)
    keys = []
    for r in rows:
        keys.extend(k for k in r if k not in keys)
    with open(os.path.join(args.out, "sweep.csv"), "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    with open(os.path.join(args.out, "sweep.json"), "w") as f:
        json.dump({"layer": layer, "summary": summary, "rows": rows}, f, indent=2, sort_keys=True)
        f.write("\n")
    runs = [{"seed": r["seed"], "lambda": r["lambda"], "status": r["status"]} for r in rows]
    write_manifest(args.out, config, "sweep-ere", runs, {"layer": layer, "lambdas": args.lambdas})
    for lam, med in zip(summary["lambdas"], summary["median_diversity"]):
        bs = [r["b"] for r in rows if r["lambda"] == lam]
        sat = sum(r["saturated"] for r in rows if r["lambda"] == lam)
        print(f"lambda={lam:g}: median diversity_l{layer}={med:.6g}  "
              f"median b={np.median(bs):.4g}  saturated {sat}/{len(bs)}")
    print(f"spearman(-lambda, diversity) = {summary['spearman']:.3f}")
    _check_runs(runs)


def read_points(path):
    """Points and labels from a CSV with header ``x,y,c``."""
    try:
        with open(path, newline="") as f:
            reader = csv.reader(f)
            header = [h.strip() for h in next(reader, [])]
            if header != ["x", "y", "c"]:
                raise ConfigError([("", f"{path}: expected header x,y,c, got {','.join(header)}")])
            rows = [r for r in reader if r]
    except OSError as exc:
        raise ConfigError([("", f"cannot read {path}: {exc.strerror}")]) from None
    try:
        pts = np.array([[float(r[0]), float(r[1])] for r in rows])
        labels = np.array([int(r[2]) for r in rows], dtype=int)
    except (ValueError, IndexError):
        raise ConfigError([("", f"{path}: malformed row")]) from None
    if len(pts) < 2:
        raise ConfigError([("", f"{path}: need at least 2 points")])
    return pts, labels


def cmd_metrics(args):
    real, _ = read_points(args.real)
    gen, _ = read_points(args.gen)
    if not 1 <= args.k <= len(real):
        raise ConfigError([("/k", f"k must be in 1..{len(real)}")])
    if not 0 < args.alpha < 1:
        raise ConfigError([("/alpha", "alpha must be in (0, 1)")])
    model = ndb_fit(real, args.k, rng_stream(args.seed, NDB))
    report = evaluate_points(real, gen, random_embedder(args.embedder_seed), alpha=args.alpha,
                             model=model)
    print(report.to_json())


def cmd_simulate(args):
    if args.count < 1:
        raise ConfigError([("/count", "count must be >= 1")])
    reports = simulate(args.count, args.seed, min_rho=args.min_rho, max_rho=args.max_rho)
    out = open(args.out, "w") if args.out else sys.stdout
    try:
        for r in reports:
            out.write(json.dumps(r.record()) + "\n")
    finally:
        if args.out:
            out.close()
    checked = [r for r in reports if r.premise_met]
    held = sum(bool(r.holds) for r in checked)
    print(f"{held}/{len(checked)} configs satisfy t_h > t_d "
          f"({len(reports) - len(checked)} without a dominant rate)", file=sys.stderr)
    if held != len(checked):
        raise RunFailed("proposition violated on some configs")


def _failed_counts(root):
    counts = {}
    for dirpath, _, files in sorted(os.walk(root)):
        if "manifest.json" in files:
            with open(os.path.join(dirpath, "manifest.json")) as f:
                doc = json.load(f)
            variant = doc.get("config", {}).get("variant")
            counts[variant] = counts.get(variant, 0) + sum(
                r.get("status") != "ok" for r in doc.get("runs", []))
    return counts


def cmd_report(args):
    if not os.path.isdir(args.inp):
        raise ConfigError([("", f"{args.inp} is not a directory")])
    reports = load_reports(args.inp)
    if not reports:
        raise ConfigError([("", f"no report.json found under {args.inp}")])
    reports.sort(key=lambda r: (r.variant or "", r.seed if r.seed is not None else -1))
    summary = summarize_reports(reports)
    failed = _failed_counts(args.inp)
    for variant, table in summary.items():
        table["failed"] = failed.get(variant, 0)
    print(format_summary(summary))


COMMANDS = {"train": cmd_train, "bounds": cmd_bounds, "sweep-ere": cmd_sweep,
            "metrics": cmd_metrics, "simulate-prop1": cmd_simulate, "report": cmd_report}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"hmgan: error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"hmgan: invalid input: {exc}", file=sys.stderr)
        return 1
    except RunFailed as exc:
        print(f"hmgan: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - every runtime failure maps to status 2
        print(f"hmgan: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
