"""Command-line surface.

Subcommands:
  run <config>          run an experiment from a key=value config file
  gen-stream <config> <out>   generate a synthetic stream file
  eval-matrix <csv>     recompute the four metrics from a stored matrix
  selftest              run the built-in oracle checks

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import gradcheck, metrics
from .config import ConfigError, parse_config
from .runner import OutputDirError, emit_reports, run_experiment
from .streams import StreamFormatError, make_stream, save_stream


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="mango-ocl",
        description="Online continual learning with gated, meta-regularized updates")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, action="append", default=None,
                       help="override config seeds (repeatable)")
    p_run.add_argument("--output-dir", default=None)
    p_run.add_argument("--overwrite", action="store_true")

    p_gen = sub.add_parser("gen-stream", help="generate a synthetic stream file")
    p_gen.add_argument("config")
    p_gen.add_argument("out")

    p_eval = sub.add_parser("eval-matrix",
                            help="recompute metrics from a matrix CSV")
    p_eval.add_argument("csv")

    sub.add_parser("selftest", help="run the built-in oracle checks")
    return parser


def _cmd_run(args) -> int:
    if not os.path.isfile(args.config):
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.seed:
        cfg.seeds = list(args.seed)
    if args.output_dir:
        cfg.output_dir = args.output_dir
    try:
        report = run_experiment(cfg)
        emit_reports(report, cfg.output_dir, overwrite=args.overwrite)
    except OutputDirError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    agg = report.aggregate()
    print(f"method={cfg.method} seeds={len(report.seed_results)} ok, "
          f"{len(report.failures)} failed")
    for name in ("acc", "aaa", "wc_acc", "bwt"):
        print(f"{name} = {agg[name + '_mean']:.4f} +/- {agg[name + '_std']:.4f}")
    print(f"reports written to {cfg.output_dir}")
    return 0


def _cmd_gen_stream(args) -> int:
    if not os.path.isfile(args.config):
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(args.config)
        tasks = make_stream(cfg.stream)
        save_stream(tasks, args.out)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {len(tasks)} tasks to {args.out}")
    return 0


def _cmd_eval_matrix(args) -> int:
    if not os.path.isfile(args.csv):
        print(f"error: matrix file not found: {args.csv}", file=sys.stderr)
        return 2
    try:
        matrix = metrics.load_matrix(args.csv)
        result = metrics.summary(matrix)
    except (ValueError, StreamFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for name, value in result.items():
        print(f"{name} = {value:.6g}")
    return 0


# -- selftest: quick oracle checks, independent of the pytest suite ------


def _selftest_autodiff() -> bool:
    from . import tensor as T
    from .model import ModelConfig, ParameterStore

    rng = np.random.default_rng(12345)
    store = ParameterStore(ModelConfig(4, [5], 3, seed=7))
    x = rng.uniform(-2, 2, size=(6, 4))
    y = rng.integers(0, 3, size=6)

    loss = T.cross_entropy(store.forward(x), y)
    T.backward(loss)
    analytic = store.gradients()
    arrays = [p.data for p in store.parameters()]
    numeric = gradcheck.finite_difference(
        lambda: T.cross_entropy(store.forward(x), y).data, arrays)
    return gradcheck.max_rel_err(analytic, numeric) < 1e-5


def _selftest_hypergradient() -> bool:
    from . import optimizer as opt
    from . import tensor as T
    from .model import ModelConfig, ParameterStore

    rng = np.random.default_rng(99)
    store = ParameterStore(ModelConfig(3, [4], 3, seed=11))
    for p, old in zip(store.parameters(), store.theta_old):
        old += rng.normal(0, 0.1, size=old.shape)
    x = rng.uniform(-1, 1, size=(5, 3))
    y = rng.integers(0, 3, size=5)
    xm = rng.uniform(-1, 1, size=(7, 3))
    ym = rng.integers(0, 3, size=7)
    rho = np.array([-1.0, -2.0])
    eta = 0.1

    def meta_of_rho():
        lambdas = np.exp(rho)
        loss = opt.train_loss(store, lambdas, (x, y))
        T.backward(loss)
        gates = opt.compute_gate(store)
        gt = opt.gated_gradient(store.gradients(), gates)
        theta_p = opt.virtual_update(store, gt, eta)
        return float(opt.meta_loss(store, theta_p, (xm, ym)).data)

    numeric = gradcheck.finite_difference(meta_of_rho, [rho])[0]

    lambdas = np.exp(rho)
    loss = opt.train_loss(store, lambdas, (x, y))
    T.backward(loss)
    gates = opt.compute_gate(store)
    gt = opt.gated_gradient(store.gradients(), gates)
    theta_p = opt.virtual_update(store, gt, eta)
    _, grad_meta = opt.meta_loss_and_grad(store, theta_p, (xm, ym))
    analytic = opt.lambda_meta_gradient(store, gates, grad_meta, eta, lambdas)
    return gradcheck.max_rel_err([analytic], [numeric], floor=1e-6) < 1e-4


def _selftest_reservoir() -> bool:
    from itertools import product

    from .buffer import ReplayBuffer

    class ScriptedRng:
        def __init__(self, outcomes):
            self.outcomes = list(outcomes)

        def integers(self, low, high=None):
            return self.outcomes.pop(0)

    counts = [0, 0, 0, 0]
    n_sequences = 0
    for outcomes in product(range(3), range(4)):
        buf = ReplayBuffer(2, rng=ScriptedRng(outcomes))
        for item in range(4):
            buf.insert(np.array([float(item)]), item)
        n_sequences += 1
        for feats, _, _ in buf.items:
            counts[int(feats[0])] += 1
    return all(c * 2 == n_sequences for c in counts)


def _selftest_metrics() -> bool:
    m = metrics.AccuracyMatrix(2)
    m.set_value(0, 0, 0.9)
    m.set_value(1, 0, 0.8)
    m.set_value(1, 1, 0.7)
    ok = abs(metrics.bwt(m) + 0.1) < 1e-12
    m2 = metrics.AccuracyMatrix(2)
    m2.set_value(0, 0, 1.0)
    m2.set_value(1, 0, 0.4)
    m2.set_value(1, 1, 0.8)
    ok = ok and abs(metrics.wc_acc(m2) - 0.6) < 1e-12
    return ok


def _cmd_selftest() -> int:
    checks = [
        ("autodiff finite-difference oracle", _selftest_autodiff),
        ("hypergradient finite-difference oracle", _selftest_hypergradient),
        ("reservoir exhaustive inclusion", _selftest_reservoir),
        ("metric worked examples", _selftest_metrics),
    ]
    failed = 0
    for name, check in checks:
        ok = check()
        print(f"[{'PASS' if ok else 'FAIL'}] {name}")
        failed += not ok
    return 1 if failed else 0


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 2
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "gen-stream":
        return _cmd_gen_stream(args)
    if args.command == "eval-matrix":
        return _cmd_eval_matrix(args)
    if args.command == "selftest":
        return _cmd_selftest()
    parser.print_usage(sys.stderr)
    return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
