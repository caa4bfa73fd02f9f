"""Command-line interface.

Exit codes: 0 success, 1 configuration or usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .config_io import load_config
from .core import ConfigError, GridConfig, JointState, RewardMode, validate_config
from .experiments import (
    DEFAULT_C_GRID,
    DEFAULT_MPA_GRID,
    SweepSpec,
    cost_trend,
    emit_csv,
    format_csv,
    run_fig1_sweep,
    run_fig2_sweep,
)
from .oracle import build_exact_model, certify, dump_solution, value_iteration
from .policies import QTable, greedy_from_q
from .qlearning import BASELINE, LearningSchedule, evaluate_policy, train, write_training_log


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common(p: argparse.ArgumentParser, *, training: bool = False, evaluation: bool = False) -> None:
    p.add_argument("--config", help="TOML config file (defaults to the two-microgrid setup)")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--reward-mode", choices=[m.value for m in RewardMode])
    p.add_argument("--max-prod", type=int, help="override max_prod")
    p.add_argument("--out", help="output path")
    p.add_argument("--initial-state", help="demand_index,solar_level,wind_level")
    if training:
        p.add_argument("--train-steps", type=int, default=2_000_000)
        p.add_argument("--epsilon", type=float, default=0.85)
        p.add_argument("--alpha", type=float, default=None,
                       help="constant step size, or alpha0 for polynomial decay")
        p.add_argument("--schedule", choices=["constant", "polynomial_decay"], default="constant")
        p.add_argument("--omega", type=float, default=0.6, help="decay exponent")
    if evaluation:
        p.add_argument("--eval-steps", type=int, default=10_000)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="microgrid-q", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="check a config file")
    p.add_argument("path")

    p = sub.add_parser("baseline", help="evaluate the no-storage baseline")
    _common(p, evaluation=True)

    p = sub.add_parser("train", help="train a joint Q-table; --out receives the table CSV")
    _common(p, training=True)
    p.add_argument("--log", help="training log CSV path")

    p = sub.add_parser("eval", help="evaluate the greedy policy of a saved Q-table")
    _common(p, evaluation=True)
    p.add_argument("--qtable", required=True)

    for name, help_text in (("sweep-mpa", "baseline vs. Q-learning over max_prod"),
                            ("sweep-c", "Q-learning over the cost weight c")):
        p = sub.add_parser(name, help=help_text)
        _common(p, training=True, evaluation=True)
        p.add_argument("--grid", help="comma-separated grid values")
        p.add_argument("--replications", type=int, default=3)
        p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("oracle", help="solve the exact model; optionally certify a Q-table")
    _common(p)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--qtable", help="learned Q-table to certify")
    return parser


def _config(args) -> GridConfig:
    config = load_config(args.config) if args.config else GridConfig()
    changes = {}
    if args.reward_mode:
        changes["reward_mode"] = RewardMode(args.reward_mode)
    if args.max_prod is not None:
        changes["max_prod"] = args.max_prod
    return validate_config(dataclasses.replace(config, **changes)) if changes else config


def _initial_state(args) -> JointState | None:
    if not args.initial_state:
        return None
    try:
        return JointState(*(int(x) for x in args.initial_state.split(",")))
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad --initial-state {args.initial_state!r}") from exc


def _schedule(args) -> LearningSchedule:
    if args.schedule == "polynomial_decay":
        return LearningSchedule.polynomial(1.0 if args.alpha is None else args.alpha, args.omega)
    return LearningSchedule.constant(0.1 if args.alpha is None else args.alpha)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _metrics_json(metrics) -> str:
    return json.dumps(dataclasses.asdict(metrics), indent=2) + "\n"


def run(args) -> int:
    cmd = args.command
    if cmd == "validate":
        load_config(args.path)
        print(f"{args.path}: ok")
        return 0

    config = _config(args)
    init = _initial_state(args)
    if cmd == "baseline":
        _emit(_metrics_json(evaluate_policy(BASELINE, config, args.eval_steps, args.seed, init)),
              args.out)
    elif cmd == "train":
        if not args.out:
            raise UsageError("train needs --out for the Q-table")
        result = train(config, _schedule(args), args.epsilon, args.train_steps, args.seed, init)
        result.q.save(args.out)
        if args.log:
            write_training_log(result.log, args.log)
        last = result.log[-1].running_avg_deficit if result.log else float("nan")
        print(f"trained {args.train_steps} steps; running avg deficit {last:.6g}")
    elif cmd == "eval":
        q = QTable.load(args.qtable, config)
        metrics = evaluate_policy(greedy_from_q(q, config), config, args.eval_steps, args.seed, init)
        _emit(_metrics_json(metrics), args.out)
    elif cmd in ("sweep-mpa", "sweep-c"):
        fig1 = cmd == "sweep-mpa"
        if args.grid:
            grid = tuple((int if fig1 else float)(x) for x in args.grid.split(","))
        else:
            grid = DEFAULT_MPA_GRID if fig1 else DEFAULT_C_GRID
        spec = SweepSpec(config, "max_prod" if fig1 else "cost_weight_c", grid,
                         args.train_steps, args.eval_steps, args.seed, args.replications,
                         args.epsilon, _schedule(args), init, args.workers)
        rows = run_fig1_sweep(spec) if fig1 else run_fig2_sweep(spec)
        if args.out:
            emit_csv(rows, args.out)
        else:
            sys.stdout.write(format_csv(rows))
        if not fig1:
            trend = cost_trend(rows)
            print(f"spearman(c, |deficit|) = {trend['rho_c_vs_abs_deficit']:.3f}; "
                  f"spearman(c, main) = {trend['rho_c_vs_main_power']:.3f}", file=sys.stderr)
    elif cmd == "oracle":
        model = build_exact_model(config)
        result = value_iteration(model, args.tol)
        print(f"value iteration: {result.sweeps} sweeps, Bellman residual {result.residual:.3e}")
        if args.out:
            dump_solution(result, args.out)
        if args.qtable:
            q = QTable.load(args.qtable, config)
            report = certify(model, result, q.values, q.state_visits, q.visit_counts)
            print(json.dumps(report, indent=2))
    return 0


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return run(args)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return 1
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
