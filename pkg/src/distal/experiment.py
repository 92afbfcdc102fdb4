"""Multi-seed Monte Carlo experiments with CSV output.

Each run ``r`` uses the seed ``derive_seed(master, r)``.  A run writes
``runs/run_XXXX.csv`` with one row per metrics stride.  Once every run has
finished, ``summary.csv`` holds per-iteration means and standard errors,
``rate.csv`` holds the ergodic rate bound, and ``summary.json`` holds
everything else.

When a run stops before the last reported iteration, its final row is
carried forward: a stopped run keeps its last iterate.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .algorithm import AlgorithmConfig, init_states, run
from .errors import ConfigError
from .fixtures import p2
from .generator import generate_random_problem
from .metrics import ErgodicAverager, MetricsRow, rate_rhs, strong_convexity
from .network import ActivationModel, derive_seed
from .oracle import cached_solution
from .problem import validate_problem
from .problem_io import load_problem

CSV_HEADER = MetricsRow.header()


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_metrics(rows, path):
    """CSV with the fixed header; undefined entries are left empty."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in rows:
        w.writerow([_fmt(x) for x in row.as_list()])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_metrics(path):
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected header {header}")
        for rec in reader:
            vals = []
            for name, x in zip(header, rec):
                if x == "":
                    vals.append(None)
                elif name in ("k", "active_agents", "active_links"):
                    vals.append(int(x))
                else:
                    vals.append(float(x))
            rows.append(MetricsRow(*vals))
    return rows


def build_problem(cfg):
    if cfg.problem_file is not None:
        return load_problem(cfg.problem_path())
    if cfg.fixture == "p2":
        return p2()
    return generate_random_problem(cfg.generator, cfg.problem_seed)


def _probabilities(value, count, name):
    arr = np.broadcast_to(np.asarray(value, dtype=float), (count,)) if np.ndim(value) == 0 \
        else np.asarray(value, dtype=float)
    if arr.size != count:
        raise ConfigError(f"{name} has {arr.size} entries, problem needs {count}")
    return np.array(arr)


def build_model(cfg, spec):
    return ActivationModel(_probabilities(cfg.beta, len(spec.edges), "activation.beta"),
                           _probabilities(cfg.gamma, spec.n, "activation.gamma"))


def build_algorithm_config(cfg):
    if cfg.mode == "synchronous" and not (np.all(np.asarray(cfg.beta) == 1.0)
                                          and np.all(np.asarray(cfg.gamma) == 1.0)):
        raise ConfigError("synchronous mode requires beta = gamma = 1")
    eta = cfg.eta if np.ndim(cfg.eta) == 0 else np.asarray(cfg.eta, dtype=float)
    return AlgorithmConfig(eta=eta, max_iters=cfg.max_iters, feas_tol=cfg.feas_tol,
                           dist_tol=cfg.dist_tol, mode=cfg.mode, v0=cfg.v0, lambda0=cfg.lambda0)


@dataclass
class RunResult:
    index: int
    seed: int
    termination: str = "error"
    iterations: int = 0
    final_feas: float = math.nan
    rows: list = field(default_factory=list)
    rate_lhs: dict = field(default_factory=dict)
    error: str | None = None


def _execute(job):
    (r, spec, alg, model, seed, saddle, metrics_stride, snapshot_stride, rate_ks,
     out_dir) = job
    res = RunResult(r, seed)
    acc = ErgodicAverager()
    steps = alg.step_sizes(spec)
    m = strong_convexity(spec)
    want = sorted(set(int(k) for k in rate_ks)) if saddle is not None else []

    def collect(state, _sample=None):
        acc.add(state)
        while want and acc.count == want[0]:
            k = want.pop(0)
            res.rate_lhs[k] = acc.rate_lhs(spec, saddle, steps, k, m)

    try:
        if want:
            collect(init_states(spec, alg))
        trace = run(spec, alg, model, seed, saddle, on_step=collect if want else None,
                    snapshot_stride=snapshot_stride, metrics_stride=metrics_stride)
        final = trace.final
        while want:
            # A stopped run keeps its last iterate.
            collect(final.replace(k=acc.count))
    except Exception as exc:  # recorded per run; the experiment carries on
        res.error = f"{type(exc).__name__}: {exc}"
        return res
    res.termination = trace.termination
    res.iterations = trace.iterations
    res.final_feas = trace.rows[-1].feas_max
    res.rows = trace.rows
    write_metrics(trace.rows, Path(out_dir) / "runs" / f"run_{r:04d}.csv")
    return res


@dataclass
class ExperimentSummary:
    runs: list
    summary_rows: list
    rate_rows: list
    gates: dict

    @property
    def gates_passed(self):
        return all(self.gates.values())

    @property
    def failures(self):
        return [r for r in self.runs if r.error is not None]


def _mean_se(values):
    vals = [v for v in values if v is not None and not math.isnan(v)]
    if not vals:
        return None, None
    arr = np.asarray(vals)
    se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return float(arr.mean()), se


def _column(rows, name):
    return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in rows])


def _aggregate(results):
    ok = [r for r in results if r.error is None]
    if not ok:
        return []
    ks = np.array(sorted({row.k for r in ok for row in r.rows}))
    feas, vt = [], []
    for r in ok:
        rk = np.array([row.k for row in r.rows])
        idx = np.searchsorted(rk, ks, side="right") - 1
        feas.append(_column(r.rows, "feas_max")[idx])
        vt.append(_column(r.rows, "V_tilde")[idx])
    feas, vt = np.array(feas), np.array(vt)
    out = []
    for c, k in enumerate(ks):
        fm = _mean_se(feas[:, c].tolist())
        vm = _mean_se(vt[:, c].tolist())
        out.append([int(k), len(ok), fm[0], fm[1], vm[0], vm[1]])
    return out


SUMMARY_HEADER = ["k", "runs", "feas_max_mean", "feas_max_se", "V_tilde_mean", "V_tilde_se"]
RATE_HEADER = ["k", "lhs_mean", "lhs_se", "rhs", "holds"]


def _write_table(header, rows, path):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if x is None else (repr(x) if isinstance(x, float) else x) for x in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def run_experiment(cfg, out_dir, workers=1, cache=None):
    """Execute every run of ``cfg`` and write the per-run and summary files.

    Per-run failures are recorded in the summary and do not stop the
    experiment.  The gates are: no failed run, every run converged, and the
    seed-mean rate bound holds (within ``cfg.rate_slack``) at every
    ``cfg.rate_ks`` when an oracle is available.
    """
    out = Path(out_dir)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    spec = build_problem(cfg)
    validate_problem(spec)
    model = build_model(cfg, spec)
    alg = build_algorithm_config(cfg)
    saddle = cached_solution(spec, cfg.oracle_tol, cache) if cfg.oracle else None

    jobs = [(r, spec, alg, model, derive_seed(cfg.master_seed, r), saddle, cfg.metrics_stride,
             cfg.snapshot_stride, cfg.rate_ks, str(out)) for r in range(cfg.runs)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_execute, jobs))
    else:
        results = [_execute(j) for j in jobs]

    summary_rows = _aggregate(results)
    _write_table(SUMMARY_HEADER, summary_rows, out / "summary.csv")

    rate_rows = []
    ok = [r for r in results if r.error is None]
    if saddle is not None and ok:
        state0 = init_states(spec, alg)
        steps = alg.step_sizes(spec)
        for k in sorted(set(int(k) for k in cfg.rate_ks)):
            mean, se = _mean_se([r.rate_lhs.get(k) for r in ok])
            rhs = rate_rhs(spec, state0, saddle, steps, model, k)
            holds = mean is not None and mean <= cfg.rate_slack * rhs
            rate_rows.append([k, mean, se, rhs, bool(holds)])
    _write_table(RATE_HEADER, rate_rows, out / "rate.csv")

    gates = {
        "no_failures": all(r.error is None for r in results),
        "all_converged": all(r.termination == "converged" for r in results),
    }
    if rate_rows:
        gates["rate_bound"] = all(row[4] for row in rate_rows)
    summary = ExperimentSummary(results, summary_rows, rate_rows, gates)
    doc = {
        "config": cfg.to_dict(),
        "gates": gates,
        "runs": [{"index": r.index, "seed": r.seed, "termination": r.termination,
                  "iterations": r.iterations,
                  "final_feas": None if math.isnan(r.final_feas) else r.final_feas,
                  "error": r.error} for r in results],
    }
    (out / "summary.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return summary
