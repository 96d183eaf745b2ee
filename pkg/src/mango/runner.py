"""Config-driven experiment runner: builds streams, models, and methods,
executes single-pass training over the task sequence, and writes reports.

Everything downstream of (config, seed) is deterministic, so two runs of
the same config produce byte-identical CSVs.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .buffer import ReplayBuffer
from .config import ExperimentConfig
from .metrics import AccuracyMatrix, evaluate_all, save_matrix, summary
from .model import ModelConfig, ParameterStore
from .optimizer import MangoOptimizer
from .streams import make_stream, minibatch_iter

METRIC_NAMES = ("acc", "aaa", "wc_acc", "bwt")


@dataclass
class SeedResult:
    seed: int
    metrics: dict
    matrix: AccuracyMatrix
    diagnostics: list            # rows of the per-step diagnostics CSV
    avg_seen_acc: list           # mean seen-task accuracy after each task


@dataclass
class RunReport:
    config: ExperimentConfig
    seed_results: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)   # seed -> error string
    wall_clock_seconds: float = 0.0

    def aggregate(self) -> dict:
        """Mean and population std of each metric across succeeded seeds."""
        out = {}
        for name in METRIC_NAMES:
            vals = np.array([r.metrics[name] for r in self.seed_results])
            out[f"{name}_mean"] = float(vals.mean())
            out[f"{name}_std"] = float(vals.std())   # population std
        return out


def _seed_streams(run_seed: int, stream_seed: int):
    """Independent child seeds for stream, model, buffer, sampling, shuffles."""
    ss = np.random.SeedSequence([run_seed, stream_seed])
    children = ss.spawn(5)
    return children


def run_single_seed(cfg: ExperimentConfig, seed: int) -> SeedResult:
    stream_ss, model_ss, buf_ss, sample_ss, shuffle_ss = _seed_streams(
        seed, cfg.stream.seed)
    spec = replace(cfg.stream, seed=int(stream_ss.generate_state(1)[0]))
    tasks = make_stream(spec)

    model_cfg = ModelConfig(
        input_dim=cfg.stream.input_dim,
        hidden_dims=list(cfg.hidden_dims),
        num_classes=cfg.num_classes,
        seed=int(model_ss.generate_state(1)[0]),
    )
    store = ParameterStore(model_cfg)
    buffer = ReplayBuffer(cfg.buffer_capacity,
                          rng=np.random.default_rng(buf_ss))
    opt = MangoOptimizer(store, cfg.mango,
                         sample_rng=np.random.default_rng(sample_ss))
    shuffle_seeds = shuffle_ss.generate_state(len(tasks))

    matrix = AccuracyMatrix(len(tasks))
    diag_rows = []
    avg_seen = []
    step_no = 0
    for task in tasks:
        for xb, yb in minibatch_iter(task, cfg.batch_size,
                                     int(shuffle_seeds[task.task_id])):
            diag = opt.step(xb, yb, buffer, task_id=task.task_id)
            step_no += 1
            diag_rows.append(_diag_row(step_no, task.task_id, diag))
        evaluate_all(store, tasks[:task.task_id + 1], matrix, task.task_id)
        store.snapshot_old()
        avg_seen.append(float(np.mean(matrix.row(task.task_id))))

    return SeedResult(seed, summary(matrix), matrix, diag_rows, avg_seen)


def _fmt(v) -> str:
    return "" if v is None else f"{v:.17g}"


def _diag_row(step: int, task: int, d) -> list:
    row = [str(step), str(task), _fmt(d.train_loss), _fmt(d.meta_loss)]
    row += [_fmt(v) for v in d.lambda_values]
    row += [_fmt(v) for v in d.gate_mean]
    row += [_fmt(v) for v in d.gate_min]
    row += [_fmt(v) for v in d.gate_max]
    row += [_fmt(d.harmful_fraction_raw), _fmt(d.harmful_fraction_gated)]
    return row


def diag_header(num_groups: int) -> list:
    cols = ["step", "task", "train_loss", "meta_loss"]
    cols += [f"lambda_{i}" for i in range(num_groups)]
    cols += [f"gate_mean_{i}" for i in range(num_groups)]
    cols += [f"gate_min_{i}" for i in range(num_groups)]
    cols += [f"gate_max_{i}" for i in range(num_groups)]
    cols += ["harmful_raw", "harmful_gated"]
    return cols


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    """Run every seed; a failing seed is recorded and the rest continue."""
    report = RunReport(config=cfg)
    start = time.monotonic()
    for seed in cfg.seeds:
        try:
            report.seed_results.append(run_single_seed(cfg, seed))
        except Exception as exc:   # crash isolation across seeds
            report.failures[seed] = f"{type(exc).__name__}: {exc}"
    report.wall_clock_seconds = time.monotonic() - start
    if not report.seed_results:
        raise RuntimeError(f"all seeds failed: {report.failures}")
    return report


class OutputDirError(RuntimeError):
    pass


def emit_reports(report: RunReport, output_dir, overwrite: bool = False):
    """Write summary, per-seed matrices and diagnostics, and the
    plot-ready long-format CSV. Refuses to reuse a non-empty directory
    unless overwrite is set."""
    if os.path.isdir(output_dir) and os.listdir(output_dir) and not overwrite:
        raise OutputDirError(
            f"output dir {output_dir} is not empty (pass overwrite to reuse)")
    os.makedirs(output_dir, exist_ok=True)
    cfg = report.config
    num_groups = len(cfg.hidden_dims) + 1
    header = diag_header(num_groups)

    for res in report.seed_results:
        seed_dir = os.path.join(output_dir, f"seed_{res.seed}")
        os.makedirs(seed_dir, exist_ok=True)
        save_matrix(res.matrix, os.path.join(seed_dir, "matrix.csv"))
        with open(os.path.join(seed_dir, "diagnostics.csv"), "w") as fh:
            fh.write(",".join(header) + "\n")
            for row in res.diagnostics:
                fh.write(",".join(row) + "\n")
        # Narrow per-topic traces for plotting.
        lam_cols = [i for i, c in enumerate(header) if c.startswith("lambda_")]
        gate_cols = [i for i, c in enumerate(header) if c.startswith("gate_")]
        with open(os.path.join(seed_dir, "lambda_trace.csv"), "w") as fh:
            fh.write("step,task," + ",".join(header[i] for i in lam_cols) + "\n")
            for row in res.diagnostics:
                fh.write(",".join([row[0], row[1]] + [row[i] for i in lam_cols]) + "\n")
        with open(os.path.join(seed_dir, "gate_stats.csv"), "w") as fh:
            fh.write("step,task," + ",".join(header[i] for i in gate_cols) + "\n")
            for row in res.diagnostics:
                fh.write(",".join([row[0], row[1]] + [row[i] for i in gate_cols]) + "\n")

    agg = report.aggregate()
    with open(os.path.join(output_dir, "summary.txt"), "w") as fh:
        fh.write(f"method={cfg.method}\n")
        fh.write(f"seeds={','.join(str(s) for s in cfg.seeds)}\n")
        for name in METRIC_NAMES:
            fh.write(f"{name}_mean={agg[f'{name}_mean']:.17g}\n")
            fh.write(f"{name}_std={agg[f'{name}_std']:.17g}\n")
        for res in report.seed_results:
            for name in METRIC_NAMES:
                fh.write(f"{name}_seed_{res.seed}={res.metrics[name]:.17g}\n")
        for seed, err in report.failures.items():
            fh.write(f"failed_seed_{seed}={err}\n")
        fh.write(f"wall_clock_seconds={report.wall_clock_seconds:.3f}\n")

    with open(os.path.join(output_dir, "long.csv"), "w") as fh:
        fh.write("method,seed,task,metric,value\n")
        for res in report.seed_results:
            for t, v in enumerate(res.avg_seen_acc):
                fh.write(f"{cfg.method},{res.seed},{t},avg_seen_acc,{v:.17g}\n")
            last = res.matrix.num_tasks - 1
            for name in METRIC_NAMES:
                fh.write(f"{cfg.method},{res.seed},{last},{name},"
                         f"{res.metrics[name]:.17g}\n")
