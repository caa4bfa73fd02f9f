"""Parameter sweeps comparing the no-storage baseline with joint Q-learning.

Seeding: replication ``r`` gets ``rep_seed = derive_seed(master, r)``; its
training stream is ``derive_seed(rep_seed, 0)`` and its evaluation stream
``derive_seed(rep_seed, 1)``. The same streams are reused at every grid point,
so points differ only in the swept parameter (common random numbers), and both
algorithms at a point see identical demand and generation paths.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from statistics import median
from typing import Iterable, Sequence

from scipy.stats import spearmanr

from .core import GridConfig, JointState, RewardMode, validate_config
from .policies import greedy_from_q
from .qlearning import BASELINE, EvalMetrics, LearningSchedule, evaluate_policy, train
from .rng import derive_seed

CSV_HEADER = [
    "sweep_var", "value", "replication", "algorithm", "avg_signed_deficit",
    "avg_squared_deficit", "avg_main_power", "train_steps", "eval_steps", "seed",
]
ALG1 = "greedy_baseline"
ALG2 = "q_learning"

DEFAULT_MPA_GRID = tuple(range(9))
DEFAULT_C_GRID = tuple(round(0.1 * k, 1) for k in range(1, 11))


class SweepVariable(str, enum.Enum):
    MAX_PROD = "max_prod"
    COST_WEIGHT_C = "cost_weight_c"


@dataclass(frozen=True)
class SweepSpec:
    base_config: GridConfig
    sweep_variable: SweepVariable
    grid: tuple
    train_steps: int = 2_000_000
    eval_steps: int = 10_000
    master_seed: int = 0
    replications: int = 3
    epsilon: float = 0.85
    schedule: LearningSchedule = field(default_factory=LearningSchedule.constant)
    initial_state: JointState | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "sweep_variable", SweepVariable(self.sweep_variable))
        object.__setattr__(self, "grid", tuple(self.grid))
        if not self.grid:
            raise ValueError("sweep grid must be nonempty")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.train_steps < 0 or self.eval_steps <= 0:
            raise ValueError("train_steps must be >= 0 and eval_steps > 0")
        for value in self.grid:
            validate_config(self.config_at(value))

    def config_at(self, value) -> GridConfig:
        if self.sweep_variable is SweepVariable.MAX_PROD:
            if int(value) != value:
                raise ValueError(f"max_prod grid value {value} is not an integer")
            return dataclasses.replace(self.base_config, max_prod=int(value))
        return dataclasses.replace(self.base_config, cost_weight_c=float(value))


@dataclass(frozen=True)
class SweepRow:
    sweep_variable: str
    swept_value: float
    replication_id: int
    alg2_metrics: EvalMetrics
    alg1_metrics: EvalMetrics | None = None
    train_steps: int = 0
    eval_steps: int = 0
    seed: int = 0


def replication_seeds(master_seed: int, replication: int) -> tuple[int, int, int]:
    """(replication seed, training seed, evaluation seed)."""
    rep = derive_seed(master_seed, replication)
    return rep, derive_seed(rep, 0), derive_seed(rep, 1)


def _run_point(spec: SweepSpec, value, replication: int, with_baseline: bool) -> SweepRow:
    config = spec.config_at(value)
    rep_seed, train_seed, eval_seed = replication_seeds(spec.master_seed, replication)
    trained = train(config, spec.schedule, spec.epsilon, spec.train_steps, train_seed,
                    spec.initial_state)
    alg2 = evaluate_policy(greedy_from_q(trained.q, config), config, spec.eval_steps,
                           eval_seed, spec.initial_state)
    alg1 = None
    if with_baseline:
        alg1 = evaluate_policy(BASELINE, config, spec.eval_steps, eval_seed, spec.initial_state)
    return SweepRow(spec.sweep_variable.value, value, replication, alg2, alg1,
                    spec.train_steps, spec.eval_steps, rep_seed)


def _run_task(args) -> SweepRow:
    return _run_point(*args)


def _run(spec: SweepSpec, with_baseline: bool) -> list[SweepRow]:
    tasks = [(spec, v, r, with_baseline) for v in spec.grid for r in range(spec.replications)]
    if spec.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            rows = list(pool.map(_run_task, tasks))
    else:
        rows = [_run_task(t) for t in tasks]
    return sorted(rows, key=lambda row: (row.swept_value, row.replication_id))


def run_fig1_sweep(spec: SweepSpec) -> list[SweepRow]:
    """Baseline vs. learned policy across main-grid allocations."""
    if spec.sweep_variable is not SweepVariable.MAX_PROD:
        raise ValueError("run_fig1_sweep sweeps max_prod")
    return _run(spec, with_baseline=True)


def run_fig2_sweep(spec: SweepSpec) -> list[SweepRow]:
    """Learned policy across cost weights c under a cost-aware reward.

    A deficit-only base config is switched to ``costaware_penalize_main``.
    """
    if spec.sweep_variable is not SweepVariable.COST_WEIGHT_C:
        raise ValueError("run_fig2_sweep sweeps cost_weight_c")
    if spec.base_config.reward_mode is RewardMode.DEFICIT_ONLY:
        spec = dataclasses.replace(
            spec,
            base_config=dataclasses.replace(
                spec.base_config, reward_mode=RewardMode.COSTAWARE_PENALIZE_MAIN
            ),
        )
    return _run(spec, with_baseline=False)


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _csv_lines(rows: Iterable[SweepRow]) -> list[list[str]]:
    lines = []
    for row in rows:
        pairs = [(ALG1, row.alg1_metrics, 0)] if row.alg1_metrics is not None else []
        pairs.append((ALG2, row.alg2_metrics, row.train_steps))
        for name, metrics, train_steps in pairs:
            lines.append([
                row.sweep_variable, _fmt(row.swept_value), str(row.replication_id), name,
                _fmt(metrics.avg_signed_deficit), _fmt(metrics.avg_squared_deficit),
                _fmt(metrics.avg_main_power), str(train_steps), str(row.eval_steps), str(row.seed),
            ])
    return lines


def format_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    writer.writerows(_csv_lines(rows))
    return buf.getvalue()


def emit_csv(rows: Sequence[SweepRow], destination: str | Path | io.TextIOBase) -> None:
    """Write sweep results; numbers carry 6 significant digits."""
    text = format_csv(rows)
    if hasattr(destination, "write"):
        destination.write(text)
        return
    path = Path(destination)
    if path.parent and not path.parent.exists():
        raise OSError(f"directory {path.parent} does not exist")
    path.write_text(text)


def parse_csv(source: str | Path | io.TextIOBase) -> list[SweepRow]:
    text = source.read() if hasattr(source, "read") else Path(source).read_text()
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != CSV_HEADER:
        raise ValueError(f"unexpected sweep CSV header {header}")
    grouped: dict[tuple, dict] = {}
    for line in reader:
        var, value, rep, alg, sdef, sq, main, tsteps, esteps, seed = line
        value_num = float(value)
        if var == SweepVariable.MAX_PROD.value and value_num.is_integer():
            value_num = int(value_num)
        key = (var, value_num, int(rep))
        entry = grouped.setdefault(key, {"eval_steps": int(esteps), "seed": int(seed)})
        metrics = EvalMetrics(float(sdef), float(sq), float(main), int(esteps))
        if alg == ALG1:
            entry["alg1"] = metrics
        else:
            entry["alg2"] = metrics
            entry["train_steps"] = int(tsteps)
    return [
        SweepRow(var, value, rep, e["alg2"], e.get("alg1"), e.get("train_steps", 0),
                 e["eval_steps"], e["seed"])
        for (var, value, rep), e in grouped.items()
    ]


def rounded(row: SweepRow) -> SweepRow:
    """The row as it survives a CSV round trip (6 significant digits)."""
    def r(m: EvalMetrics | None):
        if m is None:
            return None
        return EvalMetrics(float(_fmt(m.avg_signed_deficit)), float(_fmt(m.avg_squared_deficit)),
                           float(_fmt(m.avg_main_power)), m.steps)
    value = float(_fmt(row.swept_value))
    if row.sweep_variable == SweepVariable.MAX_PROD.value and value.is_integer():
        value = int(value)
    return dataclasses.replace(row, swept_value=value, alg1_metrics=r(row.alg1_metrics),
                               alg2_metrics=r(row.alg2_metrics))


def medians_by_value(rows: Sequence[SweepRow], algorithm: str, attr: str) -> dict:
    """Median of one metric across replications, keyed by swept value."""
    values: dict = {}
    for row in rows:
        metrics = row.alg1_metrics if algorithm == ALG1 else row.alg2_metrics
        if metrics is not None:
            values.setdefault(row.swept_value, []).append(getattr(metrics, attr))
    return {k: median(v) for k, v in sorted(values.items())}


def cost_trend(rows: Sequence[SweepRow]) -> dict:
    """Spearman correlations of c against |deficit| and against main-grid draw."""
    deficit = medians_by_value(rows, ALG2, "avg_signed_deficit")
    main = medians_by_value(rows, ALG2, "avg_main_power")
    cs = list(deficit)
    rho_def = spearmanr(cs, [abs(deficit[c]) for c in cs]).statistic
    rho_main = spearmanr(cs, [main[c] for c in cs]).statistic
    return {"rho_c_vs_abs_deficit": float(rho_def), "rho_c_vs_main_power": float(rho_main),
            "median_abs_deficit": {c: abs(v) for c, v in deficit.items()},
            "median_main_power": main}


def default_workers() -> int:
    return max(1, min(os.cpu_count() or 1, 8))
