import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Optional

from rest_framework.exceptions import ValidationError

from . import experiments
from .config import MANIFEST_KIND, RunConfig
from .writers import CONCENTRATION_COLUMNS, FIT_COLUMNS, RATIO_COLUMNS, SWEEP_COLUMNS, write_manifest, write_records

logger = logging.getLogger(__name__)


class Command(str, Enum):
    FIT = "fit"
    RATIO_BIAS = "ratio-bias"
    RATIO_VARIANCE = "ratio-variance"
    GRID_SEARCH = "grid-search"
    DOUBLE_DESCENT = "double-descent"
    RIDGE_COMPARE = "ridge-compare"
    CONC_CHECK = "conc-check"


@dataclass
class RunResult:
    command: Command
    outputs: list[Path] = field(default_factory=list)
    rows: int = 0
    manifest: Path = None
    wall_time_seconds: float = 0.0


class ExperimentService:
    """
    Runs one subcommand against a validated RunConfig.

    Records are collected in full before anything is written, so each
    output file has a single writer and its rows are in experiment order
    regardless of the worker count.
    """

    @classmethod
    def run(cls, command: Command, cfg: RunConfig) -> RunResult:
        """
        Execute `command` and write its CSV outputs and manifest.

        Args:
            command (Command): Which experiment to run.
            cfg (RunConfig): Validated configuration.

        Returns:
            RunResult: Paths written, row count and wall time.

        Raises:
            EioError: Domain failures from the experiment modules.
            OSError: If an output cannot be written.
        """
        command = Command(command)
        logger.info("running %s (seed=%d, workers=%d)", command.value, cfg.seed, cfg.workers)
        start = time.perf_counter()
        tables = getattr(cls, "_" + command.name.lower())(cfg)

        result = RunResult(command=command)
        for suffix, columns, records in tables:
            path = cfg.output_dir / f"{command.value}{suffix}.csv"
            write_records(records, path, columns)
            result.outputs.append(path)
            result.rows += len(records)
        result.wall_time_seconds = time.perf_counter() - start
        result.manifest = write_manifest(
            cfg.output_dir / f"{command.value}.manifest.json",
            command=command.value,
            config=cfg.echo,
            seed=cfg.seed,
            outputs=result.outputs,
            wall_time_seconds=result.wall_time_seconds,
            kind=MANIFEST_KIND,
        )
        logger.info("%s finished: %d rows in %.2fs", command.value, result.rows, result.wall_time_seconds)
        return result

    @staticmethod
    def _fit(cfg: RunConfig):
        record = experiments.single_fit(cfg.spec, cfg.n, cfg.hyper, cfg.seed)
        return [("", FIT_COLUMNS, [record])]

    @staticmethod
    def _ratio_bias(cfg: RunConfig):
        records = experiments.ratio_bias_experiment(
            cfg.spec, cfg.plan.mu_grid, cfg.plan.lambda_grid, cfg.hyper, cfg.workers
        )
        return [("", RATIO_COLUMNS, records)]

    @staticmethod
    def _ratio_variance(cfg: RunConfig):
        records = experiments.ratio_variance_experiment(
            cfg.spec,
            cfg.plan,
            cfg.hyper.mu,
            lambda_grid=None if cfg.tune_lambda else cfg.plan.lambda_grid,
            hp=cfg.hyper,
            workers=cfg.workers,
        )
        return [("", RATIO_COLUMNS, records)]

    @staticmethod
    def _grid_search(cfg: RunConfig):
        result = experiments.grid_search(cfg.spec, cfg.plan, cfg.estimator, cfg.n, cfg.hyper, cfg.workers)
        return [("", SWEEP_COLUMNS, result.table), (".best", SWEEP_COLUMNS, [result.best])]

    @staticmethod
    def _double_descent(cfg: RunConfig):
        return [("", SWEEP_COLUMNS, experiments.double_descent_sweep(cfg.spec, cfg.plan, cfg.hyper, cfg.workers))]

    @staticmethod
    def _ridge_compare(cfg: RunConfig):
        records = experiments.ridge_comparison(cfg.spec, cfg.plan, cfg.hyper, cfg.workers, paired=cfg.paired)
        return [("", SWEEP_COLUMNS, records)]

    @staticmethod
    def _conc_check(cfg: RunConfig):
        records = experiments.concentration_montecarlo(cfg.spec, cfg.plan, cfg.bounds, cfg.workers)
        records += experiments.risk_bound_check(cfg.spec, cfg.plan, cfg.hyper, cfg.bounds, cfg.workers)
        return [("", CONCENTRATION_COLUMNS, records)]


def run_command(command: Command, cfg: RunConfig, on_success: Optional[Callable[[RunResult], None]] = None) -> int:
    """
    Run a subcommand and return its exit code: 0 on success, 1 on any failure.

    Failures are logged with the subcommand name. `on_success` receives the
    RunResult of a successful run.
    """
    try:
        result = ExperimentService.run(command, cfg)
    except (ValueError, ValidationError, OSError) as exc:
        logger.error("%s failed: %s", getattr(command, "value", command), exc)
        return 1
    if on_success is not None:
        on_success(result)
    return 0
