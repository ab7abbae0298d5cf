"""Evaluation, the pretrain-then-bound workflow, ERE sweeps and run directories."""
import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy.stats import spearmanr

from .bounds import lower_bounds
from .data import mode_coverage
from .metrics import MetricsReport, diversity_per_layer, frechet_distance, ndb_fit, ndb_score, random_embedder
from .regularizers import EREVector, ere_preset
from .rng import BOUNDS, EVAL, NDB, rng_stream
from .training import dataset_for, sample, train

log = logging.getLogger(__name__)

_NDB_CACHE = {}


def binning_model(config, dataset):
    m = config.metrics
    key = (json.dumps(config.to_dict()["dataset"], sort_keys=True), m.k, m.ndb_seed)
    if key not in _NDB_CACHE:
        _NDB_CACHE[key] = ndb_fit(dataset.x, m.k, rng_stream(m.ndb_seed, NDB))
    return _NDB_CACHE[key]


def eval_batch(generator, config, dataset):
    """Fixed evaluation batch: conditions follow the training label frequencies."""
    m = config.metrics
    rng = rng_stream(m.eval_seed, EVAL)
    labels = rng.choice(dataset.labels, size=m.eval_samples, replace=True)
    x = sample(generator, labels, config.generator.z_dim, dataset.spec.conditions, rng)
    return x, labels


def evaluate_run(state, config, dataset=None, seed=None):
    dataset = dataset_for(config) if dataset is None else dataset
    m = config.metrics
    x, labels = eval_batch(state.generator, config, dataset)
    embedder = random_embedder(m.embedder_seed)
    model = binning_model(config, dataset)
    ndb, js = ndb_score(model, x, m.alpha)
    fid = frechet_distance(embedder.features(dataset.x)[-1], embedder.features(x)[-1])
    per_layer = diversity_per_layer(x, embedder)
    cov = mode_coverage(x, dataset.spec, labels, m.coverage_rho, m.coverage_tau)
    report = MetricsReport(fid=fid, ndb=ndb, jsd=js, diversity_total=float(sum(per_layer)),
                           diversity_per_layer=per_layer, k=model.k, m=len(x), seed=seed,
                           variant=config.variant, config_hash=config.hash(), coverage=cov)
    return report.check()


def train_and_evaluate(config, seed, dataset=None, ere=None):
    dataset = dataset_for(config) if dataset is None else dataset
    state, run_log = train(config, seed, dataset, ere)
    if state.failed:
        return state, run_log, None
    return state, run_log, evaluate_run(state, config, dataset, seed)


def two_step_bounds(config, seed, dataset=None):
    """Pretrain with every ERE target at 0, then take the min ratio per layer over the dataset.

    Each datum gets fresh noise and keeps its own condition.
    """
    dataset = dataset_for(config) if dataset is None else dataset
    pre = config.replace(variant="hmgan", ere=None, ere_preset="HMGAN1")
    state, run_log = train(pre, seed, dataset)
    if state.failed:
        raise RuntimeError(f"pretraining diverged at step {state.failed_step}")
    rng = rng_stream(seed, BOUNDS)
    z = rng.standard_normal((len(dataset), config.generator.z_dim))
    inputs = np.hstack([z, dataset.one_hot()])
    bounds = lower_bounds(state.generator, inputs, config.epsilon, config.metrics.bound_cap, rng)
    for layer, b in zip(bounds.layers, bounds.values):
        if b > 1.0:
            log.warning("lower bound b=%.4g for layer %d exceeds 1; [b, 1] is empty", b, layer)
    return bounds


def _sweep_seed(args):
    config, seed, layer, lambdas, embed_layer = args
    dataset = dataset_for(config)
    bounds = two_step_bounds(config, seed, dataset)
    b = bounds.get(layer)
    base = list(config.ere_vector().values) if config.variant == "hmgan" else [1.0] * (config.n_layers - 1)
    rows = []
    for lam in lambdas:
        values = list(base)
        values[layer - 2] = lam
        cfg = config.replace(variant="hmgan", ere=values, ere_preset=None)
        state, run_log, report = train_and_evaluate(cfg, seed, dataset, EREVector(tuple(values)))
        row = {"seed": seed, "layer": layer, "lambda": lam, "b": b, "saturated": lam < b,
               "status": run_log["status"]}
        if report is not None:
            row["diversity_target"] = report.diversity_per_layer[embed_layer - 1]
            for l, d in enumerate(report.diversity_per_layer):
                row[f"diversity_l{l + 1}"] = d
            row.update(fid=report.fid, ndb=report.ndb, jsd=report.jsd,
                       diversity_total=report.diversity_total, coverage=report.coverage)
        rows.append(row)
    return rows


def sweep_ere(config, layer, lambdas, seeds=None, jobs=1):
    """Train once per (seed, lambda) with only layer ``layer``'s target varied.

    Returns (rows, summary). Rows carry the seed's lower bound ``b`` and flag
    ``saturated`` when lambda < b. Diversity is read at embedder layer
    ``min(layer, L)``.
    """
    lambdas = [float(v) for v in lambdas]
    if any(not 0.0 <= v <= 1.0 for v in lambdas):
        raise ValueError("lambda values must lie in [0, 1]")
    if lambdas != sorted(lambdas, reverse=True):
        raise ValueError("lambda values must be sorted in descending order")
    if not 2 <= layer <= config.n_layers:
        raise IndexError(f"layer {layer} outside 2..{config.n_layers}")
    seeds = list(config.seeds if seeds is None else seeds)
    embed_layer = min(layer, len(random_embedder(config.metrics.embedder_seed).weights))
    tasks = [(config, s, layer, lambdas, embed_layer) for s in seeds]
    rows = [r for chunk in _map(_sweep_seed, tasks, jobs) for r in chunk]
    return rows, summarize_sweep(rows, lambdas)


def summarize_sweep(rows, lambdas):
    medians = []
    for lam in lambdas:
        vals = [r["diversity_target"] for r in rows if r["lambda"] == lam and "diversity_target" in r]
        medians.append(float(np.median(vals)) if vals else float("nan"))
    if np.ptp(medians) == 0:
        rho = 1.0  # constant medians are trivially non-increasing
    else:
        rho = float(spearmanr([-v for v in lambdas], medians).statistic)
    return {"lambdas": lambdas, "median_diversity": medians, "spearman": rho}


def _map(fn, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))  # results in task order


# run directories

def _write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def scatter_svg(path, real, gen, real_labels, gen_labels, conditions):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    colors = plt.get_cmap("tab10")
    fig, axes = plt.subplots(1, 2, figsize=(8, 4), sharex=True, sharey=True)
    for ax, pts, lab, title in ((axes[0], real, real_labels, "real"), (axes[1], gen, gen_labels, "generated")):
        for c in range(conditions):
            sel = lab == c
            ax.scatter(pts[sel, 0], pts[sel, 1], s=2, color=colors(c % 10), label=f"c={c}")
        ax.set_title(title)
        ax.set_aspect("equal")
    axes[1].legend(loc="upper right", markerscale=4, fontsize="small")
    fig.tight_layout()
    plt.rcParams["svg.hashsalt"] = "hmgan"
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def write_run(out_dir, config, seed, state, run_log, report, dataset):
    os.makedirs(out_dir, exist_ok=True)
    if report is not None:
        with open(os.path.join(out_dir, "report.json"), "w") as f:
            f.write(report.to_json() + "\n")
        _write_csv(os.path.join(out_dir, "report.csv"), report.csv_header(), [report.csv_row()])
    _write_csv(os.path.join(out_dir, "ratios.csv"), ["step", "layer", "mean_ratio"], run_log["ratios"])
    x, labels = eval_batch(state.generator, config, dataset)
    _write_csv(os.path.join(out_dir, "samples.csv"), ["x", "y", "condition"],
               [(float(a), float(b), int(c)) for (a, b), c in zip(x, labels)])
    state.generator.save(os.path.join(out_dir, "generator.json"))
    scatter_svg(os.path.join(out_dir, "scatter.svg"), dataset.x, x, dataset.labels, labels,
                dataset.spec.conditions)
    status = {"seed": seed, "status": run_log["status"], "failed_step": run_log["failed_step"],
              "dir": os.path.basename(out_dir)}
    return status


def _run_seed(args):
    config, seed, out_dir = args
    dataset = dataset_for(config)
    state, run_log, report = train_and_evaluate(config, seed, dataset)
    status = write_run(out_dir, config, seed, state, run_log, report, dataset)
    return status, report


def run_seeds(config, out_root, seeds=None, jobs=1):
    """Train and evaluate each seed into ``out_root/seed_<s>``; writes ``runs.csv``.

    Failed runs are recorded with their status and excluded from ``runs.csv``.
    """
    seeds = list(config.seeds if seeds is None else seeds)
    os.makedirs(out_root, exist_ok=True)
    tasks = [(config, s, os.path.join(out_root, f"seed_{s}")) for s in seeds]
    results = _map(_run_seed, tasks, jobs)
    reports = [r for _, r in results if r is not None]
    if reports:
        _write_csv(os.path.join(out_root, "runs.csv"), reports[0].csv_header(),
                   [r.csv_row() for r in reports])
    return [s for s, _ in results], reports


def load_reports(root):
    out = []
    for dirpath, _, files in sorted(os.walk(root)):
        if "report.json" in files:
            with open(os.path.join(dirpath, "report.json")) as f:
                out.append(MetricsReport.from_dict(json.load(f)))
    return out


SUMMARY_FIELDS = ("fid", "ndb", "jsd", "diversity_total", "coverage")


def summarize_reports(reports):
    """{variant: {field: (median, q25, q75)}} plus the count of successful runs under ``"n"``."""
    out = {}
    for variant in sorted({r.variant for r in reports}):
        rs = [r for r in reports if r.variant == variant]
        table = {"n": len(rs)}
        for name in SUMMARY_FIELDS:
            vals = np.array([getattr(r, name) for r in rs if getattr(r, name) is not None], dtype=float)
            if len(vals):
                q25, med, q75 = np.percentile(vals, [25, 50, 75])
                table[name] = (float(med), float(q25), float(q75))
        out[variant] = table
    return out


def format_summary(summary):
    lines = []
    for variant, table in summary.items():
        failed = f", failed={table['failed']}" if table.get("failed") else ""
        lines.append(f"## {variant} (n={table['n']}{failed})")
        lines.append("| metric | median | IQR |")
        lines.append("|---|---|---|")
        for name in SUMMARY_FIELDS:
            if name in table:
                med, q25, q75 = table[name]
                fmt = ".4f" if name in ("jsd", "fid") else ".4g"
                lines.append(f"| {name} | {med:{fmt}} | {q25:{fmt}} - {q75:{fmt}} |")
        lines.append("")
    return "\n".join(lines)


__all__ = ["evaluate_run", "two_step_bounds", "sweep_ere", "run_seeds", "train_and_evaluate",
           "summarize_reports", "format_summary", "load_reports", "mode_coverage", "ere_preset"]
