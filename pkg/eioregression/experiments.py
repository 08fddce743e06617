"""
Monte-Carlo drivers: leading-term ratios, grid searches, the ridge
comparison, the double-descent sweep and concentration checks.

Replicate r of every driver samples from ``RngStream(plan.base_seed, r)``.
Replicates run through `replicate_map`, which returns results in replicate
order whatever the worker count, so every record is a pure function of
(spec, plan, hyperparameters).

This module does not touch Django or the filesystem; records go to
`writers` through `services`.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Any, Callable, Iterable, Mapping, Optional, Sequence, TypeVar

import numpy as np
from numpy.typing import NDArray

from .datagen import RngStream, generate_dataset, sufficient_stats
from .estimators import Estimator, eio_fit, fit_theta, population_fit
from .models import MU_INFINITY, Hyperparams, SufficientStats, ValidatedSpec
from .theory import (
    BoundConfig,
    bias_conditions,
    bias_leading_term,
    concentration_bound_cov,
    concentration_bound_noise,
    excess_risk,
    risk_bound_rhs,
    sigma_norm,
    variance_leading_term,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")

LAMBDA_GRID = tuple(1.3**k for k in range(-40, 40))
MU_GRID = tuple(2.0**k for k in range(30))
TAU_GRID = tuple(1.3**k for k in range(-30, 50))
N_GRID = tuple(range(50, 501, 50))
LAMBDA_MULTIPLIERS = (1e-6, 1e-4, 1e-2, 1.0, 2.0)

# Denominators below this (relative) size make a ratio 0/0.
DEGENERATE_TOL = 1e-14

FLAG_DEGENERATE = "degenerate"
FLAG_OUTSIDE_CONDITIONS = "outside-bias-conditions"


@dataclass(frozen=True)
class SweepPlan:
    """
    Grids and Monte-Carlo settings shared by the experiment drivers.

    Attributes:
        n_grid (tuple[int]): Sample sizes.
        lambda_grid (tuple[float]): θ penalties λ searched over.
        mu_grid (tuple[float]): Operator penalties μ searched over.
        tau_grid (tuple[float]): Ridge penalties τ searched over.
        replicates (int): Monte-Carlo repetitions R.
        base_seed (int): Root seed of every replicate stream.
        lambda_multipliers (tuple[float]): Factors applied to λ_opt(n) in
            the double-descent sweep.
    """

    n_grid: tuple[int, ...] = N_GRID
    lambda_grid: tuple[float, ...] = LAMBDA_GRID
    mu_grid: tuple[float, ...] = MU_GRID
    tau_grid: tuple[float, ...] = TAU_GRID
    replicates: int = 40
    base_seed: int = 0
    lambda_multipliers: tuple[float, ...] = LAMBDA_MULTIPLIERS

    def __post_init__(self):
        for name in ("n_grid", "lambda_grid", "mu_grid", "tau_grid", "lambda_multipliers"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.replicates < 1:
            raise ValueError("replicates must be ≥ 1")
        if self.base_seed < 0:
            raise ValueError("base_seed must be nonnegative")
        if any(n < 1 for n in self.n_grid):
            raise ValueError("sample sizes must be ≥ 1")


@dataclass(frozen=True)
class ExperimentRecord:
    """
    One aggregated result row.

    `statistic` names what was averaged ("ratio", "risk", ...). A skipped
    record keeps statistic_mean/statistic_sd as None and sets `flag`.
    `extra` carries schema-specific columns (median, q90, bound_value, ...).
    """

    experiment: str
    parameters: Mapping[str, Any]
    statistic_mean: Optional[float]
    statistic_sd: Optional[float]
    replicates: int
    statistic: str = "ratio"
    flag: str = ""
    extra: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.statistic_sd is not None and self.statistic_sd < 0.0:
            raise ValueError("statistic_sd must be nonnegative")

    @property
    def skipped(self) -> bool:
        return self.statistic_mean is None

    def as_row(self) -> dict[str, Any]:
        row = {"experiment": self.experiment, "replicates": self.replicates, "flag": self.flag}
        row.update(self.parameters)
        row[f"{self.statistic}_mean"] = self.statistic_mean
        row[f"{self.statistic}_sd"] = self.statistic_sd
        row.update(self.extra)
        return row


@dataclass(frozen=True)
class GridSearchResult:
    """Argmin of the mean excess risk over a grid, with the full risk table."""

    estimator: Estimator
    best: ExperimentRecord
    table: list[ExperimentRecord]
    best_hyperparams: Hyperparams


def replicate_map(fn: Callable[[int], T], items: Iterable[int], workers: int = 1) -> list[T]:
    """
    Apply `fn` to every item, in a process pool when workers > 1.

    Results come back in item order. `fn` must be picklable
    (a module-level function or a partial of one).
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def _mean_sd(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    sd = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
    return float(np.mean(arr)), sd


def _require(grid: Sequence, name: str) -> None:
    if len(grid) == 0:
        raise ValueError(f"{name} must not be empty")


def _parameters(spec: ValidatedSpec, n: Optional[int], hp: Hyperparams, estimator: Estimator) -> dict[str, Any]:
    ridge = estimator is Estimator.RIDGE
    return {
        "n": n,
        "d": spec.dim,
        "lambda": None if ridge else hp.lam,
        "mu": None if ridge else (MU_INFINITY if estimator is Estimator.PLUGIN else hp.mu),
        "tau": hp.tau if ridge else None,
    }


def _candidates(plan: SweepPlan, estimator: Estimator, hp: Hyperparams) -> list[Hyperparams]:
    if estimator is Estimator.RIDGE:
        _require(plan.tau_grid, "tau_grid")
        return [replace(hp, tau=tau) for tau in sorted(plan.tau_grid)]
    _require(plan.lambda_grid, "lambda_grid")
    if estimator is Estimator.PLUGIN:
        return [replace(hp, lam=lam, mu=MU_INFINITY) for lam in sorted(plan.lambda_grid)]
    _require(plan.mu_grid, "mu_grid")
    return [replace(hp, lam=lam, mu=mu) for lam in sorted(plan.lambda_grid) for mu in sorted(plan.mu_grid)]


def _grid_risks(
    spec: ValidatedSpec,
    n: int,
    estimator: Estimator,
    candidates: Sequence[Hyperparams],
    seed: int,
    replicate: int,
) -> NDArray[np.float64]:
    data = generate_dataset(spec, n, RngStream(seed, replicate))
    stats = sufficient_stats(data)
    sigma = spec.covariance
    return np.array(
        [excess_risk(sigma, fit_theta(estimator, hp, stats, data), spec.theta_circ) for hp in candidates]
    )


def grid_search(
    spec: ValidatedSpec,
    plan: SweepPlan,
    estimator: Estimator,
    n: int,
    hp: Hyperparams = Hyperparams(),
    workers: int = 1,
) -> GridSearchResult:
    """
    Minimize the Monte-Carlo mean excess risk over a hyperparameter grid.

    EIO searches λ × μ, PLUGIN searches λ at μ = ∞ and RIDGE searches τ.
    Candidates are ordered by ascending regularization (λ, then μ) and the
    first minimizer wins, so ties go to the smaller value. Every candidate
    is evaluated on the same R datasets.

    Args:
        spec (ValidatedSpec): The design.
        plan (SweepPlan): Grids, replicate count and seed.
        estimator (Estimator): Which estimator to tune.
        n (int): Sample size.
        hp (Hyperparams): Iteration controls and values not searched over.
        workers (int): Process count for the replicate loop.

    Returns:
        GridSearchResult: The best grid point and the full risk table.
    """
    estimator = Estimator(estimator)
    candidates = _candidates(plan, estimator, hp)
    task = partial(_grid_risks, spec, n, estimator, candidates, plan.base_seed)
    risks = np.vstack(replicate_map(task, range(plan.replicates), workers))
    means = risks.mean(axis=0)
    sds = risks.std(axis=0, ddof=1) if plan.replicates > 1 else np.zeros(len(candidates))

    table = [
        ExperimentRecord(
            experiment=f"grid-search/{estimator.value}",
            parameters=_parameters(spec, n, cand, estimator),
            statistic_mean=float(mean),
            statistic_sd=float(sd),
            replicates=plan.replicates,
            statistic="risk",
        )
        for cand, mean, sd in zip(candidates, means, sds)
    ]
    best_index = int(np.argmin(means))
    logger.info(
        "grid search %s n=%d over %d points: best risk %.6e at %s",
        estimator.value, n, len(candidates), means[best_index], table[best_index].parameters,
    )
    return GridSearchResult(
        estimator=estimator,
        best=table[best_index],
        table=table,
        best_hyperparams=candidates[best_index],
    )


def _bias_ratio(spec: ValidatedSpec, hp: Hyperparams) -> Optional[float]:
    sigma = spec.covariance
    b = bias_leading_term(sigma, spec.theta_circ, hp.lam)
    theta_star = population_fit(spec.population_stats(), hp).theta
    den = sigma_norm(sigma, theta_star - spec.theta_circ)
    if den <= DEGENERATE_TOL * max(1.0, sigma_norm(sigma, spec.theta_circ)):
        return None
    return sigma_norm(sigma, b) / den


def ratio_bias_experiment(
    spec: ValidatedSpec,
    mu_grid: Sequence[float],
    lambda_grid: Sequence[float],
    hp: Hyperparams = Hyperparams(),
    workers: int = 1,
) -> list[ExperimentRecord]:
    """
    Ratio ‖Σ^{1/2}b_λ‖/‖Σ^{1/2}(θ* − θ°)‖ for every (μ, λ) on the grid.

    θ* is the best parametric fit, so the records are deterministic
    (replicates = 1). Points where θ* = θ° are skipped with a flag; points
    outside the μ/λ conditions of the bias expansion are kept and flagged.
    """
    _require(mu_grid, "mu_grid")
    _require(lambda_grid, "lambda_grid")
    points = [replace(hp, mu=mu, lam=lam) for mu in mu_grid for lam in lambda_grid]
    ratios = replicate_map(partial(_bias_ratio_at, spec, points), range(len(points)), workers)

    records = []
    for point, ratio in zip(points, ratios):
        if ratio is None:
            flag = FLAG_DEGENERATE
            logger.warning("ratio-bias skipped at mu=%g lambda=%g: theta* equals theta_circ", point.mu, point.lam)
        elif not bias_conditions(spec.covariance, spec.theta_circ, point.mu, point.lam):
            flag = FLAG_OUTSIDE_CONDITIONS
        else:
            flag = ""
        records.append(
            ExperimentRecord(
                experiment="ratio-bias",
                parameters=_parameters(spec, None, point, Estimator.EIO),
                statistic_mean=ratio,
                statistic_sd=None if ratio is None else 0.0,
                replicates=1,
                flag=flag,
            )
        )
    logger.info("ratio-bias: %d grid points", len(records))
    return records


def _bias_ratio_at(spec: ValidatedSpec, points: Sequence[Hyperparams], index: int) -> Optional[float]:
    return _bias_ratio(spec, points[index])


def _variance_ratio(
    spec: ValidatedSpec,
    n: int,
    hp: Hyperparams,
    theta_star: NDArray[np.float64],
    exact_moments: bool,
    seed: int,
    replicate: int,
) -> Optional[float]:
    sigma = spec.covariance
    if exact_moments:
        stats = SufficientStats(z=sigma @ spec.theta_circ, sigma_hat=sigma, u=np.zeros(spec.dim))
    else:
        stats = sufficient_stats(generate_dataset(spec, n, RngStream(seed, replicate)), spec)
    theta_hat = eio_fit(stats, hp).theta
    b = bias_leading_term(sigma, spec.theta_circ, hp.lam)
    _, zeta_tilde = variance_leading_term(sigma, stats.sigma_hat, stats.u, b, hp.lam)
    den = sigma_norm(sigma, theta_hat - theta_star)
    if den <= DEGENERATE_TOL * max(1.0, sigma_norm(sigma, theta_star)):
        return None
    return sigma_norm(sigma, zeta_tilde) / den


def optimal_lambda(
    spec: ValidatedSpec,
    plan: SweepPlan,
    n: int,
    hp: Hyperparams = Hyperparams(),
    workers: int = 1,
) -> float:
    """λ_opt(n): grid-search minimizer of the plug-in (μ = ∞) excess risk."""
    return grid_search(spec, plan, Estimator.PLUGIN, n, hp, workers).best_hyperparams.lam


def ratio_variance_experiment(
    spec: ValidatedSpec,
    plan: SweepPlan,
    mu: float,
    lambda_grid: Optional[Sequence[float]] = None,
    hp: Hyperparams = Hyperparams(),
    workers: int = 1,
    exact_moments: bool = False,
) -> list[ExperimentRecord]:
    """
    Ratio ‖Σ^{1/2}ζ̃‖/‖Σ^{1/2}(θ̂ − θ*)‖ averaged over fresh datasets.

    Args:
        spec (ValidatedSpec): Synthetic design; the realized noise gives U exactly.
        plan (SweepPlan): Supplies n_grid, replicates and the seed.
        mu (float): Operator penalty μ.
        lambda_grid (Sequence[float] | None): λ values per n; None uses
            λ_opt(n) from a plug-in grid search over plan.lambda_grid.
        hp (Hyperparams): Iteration controls.
        workers (int): Process count for the replicate loop.
        exact_moments (bool): Replace (Σ̂, U) by (Σ, 0); every ratio is then
            0/0 and the records come back skipped.

    Returns:
        list[ExperimentRecord]: One record per (n, λ); replicates whose
        ratio is 0/0 are dropped and counted in the flag.
    """
    _require(plan.n_grid, "n_grid")
    records = []
    for n in plan.n_grid:
        lambdas = lambda_grid if lambda_grid is not None else [optimal_lambda(spec, plan, n, hp, workers)]
        _require(lambdas, "lambda_grid")
        for lam in lambdas:
            point = replace(hp, mu=mu, lam=lam)
            theta_star = population_fit(spec.population_stats(), point).theta
            task = partial(_variance_ratio, spec, n, point, theta_star, exact_moments, plan.base_seed)
            ratios = replicate_map(task, range(plan.replicates), workers)
            valid = [r for r in ratios if r is not None]
            dropped = len(ratios) - len(valid)
            if valid:
                mean, sd = _mean_sd(valid)
                flag = f"dropped={dropped}" if dropped else ""
            else:
                mean = sd = None
                flag = FLAG_DEGENERATE
                logger.warning("ratio-variance skipped at n=%d lambda=%g: every replicate is 0/0", n, lam)
            records.append(
                ExperimentRecord(
                    experiment="ratio-variance",
                    parameters=_parameters(spec, n, point, Estimator.EIO),
                    statistic_mean=mean,
                    statistic_sd=sd,
                    replicates=plan.replicates,
                    flag=flag,
                )
            )
            logger.info("ratio-variance n=%d lambda=%g: mean ratio %s", n, lam, mean)
    return records


def _risk_record(experiment: str, spec: ValidatedSpec, n: int, table: ExperimentRecord) -> ExperimentRecord:
    return replace(table, experiment=experiment, parameters={**table.parameters, "n": n, "d": spec.dim})


def double_descent_sweep(
    spec: ValidatedSpec,
    plan: SweepPlan,
    hp: Hyperparams = Hyperparams(),
    workers: int = 1,
) -> list[ExperimentRecord]:
    """
    Excess risk against n for λ = m·λ_opt(n) and μ ∈ {∞, μ_opt(λ, n)}.

    μ_opt is searched over plan.mu_grid at each fixed λ. Each (n, m) gives
    two records, the μ = ∞ one first.
    """
    _require(plan.n_grid, "n_grid")
    _require(plan.lambda_multipliers, "lambda_multipliers")
    records = []
    for n in plan.n_grid:
        lam_opt = optimal_lambda(spec, plan, n, hp, workers)
        for multiplier in plan.lambda_multipliers:
            lam = multiplier * lam_opt
            fixed = replace(plan, lambda_grid=(lam,))
            plugin = grid_search(spec, fixed, Estimator.PLUGIN, n, hp, workers)
            eio = grid_search(spec, fixed, Estimator.EIO, n, hp, workers)
            for result in (plugin, eio):
                record = _risk_record("double-descent", spec, n, result.best)
                records.append(replace(record, parameters={**record.parameters, "lambda_multiplier": multiplier}))
            logger.info(
                "double-descent n=%d lambda=%g (x%g): risk mu=inf %.6e, mu_opt=%g %.6e",
                n, lam, multiplier, plugin.best.statistic_mean, eio.best_hyperparams.mu, eio.best.statistic_mean,
            )
    return records


def _paired_risks(
    spec: ValidatedSpec,
    n: int,
    eio_hp: Hyperparams,
    ridge_hp: Hyperparams,
    paired: bool,
    seed: int,
    replicates: int,
    replicate: int,
) -> tuple[float, float]:
    sigma = spec.covariance
    eio_data = generate_dataset(spec, n, RngStream(seed, replicate))
    ridge_data = eio_data if paired else generate_dataset(spec, n, RngStream(seed, replicates + replicate))
    eio_theta = fit_theta(Estimator.EIO, eio_hp, sufficient_stats(eio_data), eio_data)
    ridge_theta = fit_theta(Estimator.RIDGE, ridge_hp, sufficient_stats(ridge_data), ridge_data)
    return excess_risk(sigma, eio_theta, spec.theta_circ), excess_risk(sigma, ridge_theta, spec.theta_circ)


def tune_eio(
    spec: ValidatedSpec,
    plan: SweepPlan,
    n: int,
    hp: Hyperparams = Hyperparams(),
    workers: int = 1,
) -> Hyperparams:
    """(λ_opt, μ_opt): λ from the plug-in search, then μ searched at that λ."""
    lam = optimal_lambda(spec, plan, n, hp, workers)
    return grid_search(spec, replace(plan, lambda_grid=(lam,)), Estimator.EIO, n, hp, workers).best_hyperparams


def ridge_comparison(
    spec: ValidatedSpec,
    plan: SweepPlan,
    hp: Hyperparams = Hyperparams(),
    workers: int = 1,
    paired: bool = True,
) -> list[ExperimentRecord]:
    """
    Excess risk of EiO at (λ_opt, μ_opt) against ridge at τ_opt, per n.

    With `paired` both estimators see the same dataset in each replicate;
    otherwise ridge draws from streams R..2R−1. Each n yields an eio, a
    ridge and a difference (eio − ridge) record.
    """
    _require(plan.n_grid, "n_grid")
    suffix = "" if paired else "-unpaired"
    records = []
    for n in plan.n_grid:
        eio_hp = tune_eio(spec, plan, n, hp, workers)
        ridge_hp = grid_search(spec, plan, Estimator.RIDGE, n, hp, workers).best_hyperparams
        task = partial(_paired_risks, spec, n, eio_hp, ridge_hp, paired, plan.base_seed, plan.replicates)
        pairs = np.array(replicate_map(task, range(plan.replicates), workers))
        for name, values, params in (
            ("eio", pairs[:, 0], _parameters(spec, n, eio_hp, Estimator.EIO)),
            ("ridge", pairs[:, 1], _parameters(spec, n, ridge_hp, Estimator.RIDGE)),
            ("difference", pairs[:, 0] - pairs[:, 1], {**_parameters(spec, n, eio_hp, Estimator.EIO), "tau": ridge_hp.tau}),
        ):
            mean, sd = _mean_sd(values)
            records.append(
                ExperimentRecord(
                    experiment=f"ridge-compare/{name}{suffix}",
                    parameters=params,
                    statistic_mean=mean,
                    statistic_sd=sd,
                    replicates=plan.replicates,
                    statistic="risk",
                )
            )
        logger.info("ridge-compare n=%d: eio %.6e ridge %.6e", n, records[-3].statistic_mean, records[-2].statistic_mean)
    return records


CONCENTRATION_STATS = ("sigma_op", "sigma_fro", "u_norm")


def _deviations(spec: ValidatedSpec, n: int, seed: int, replicate: int) -> NDArray[np.float64]:
    stats = sufficient_stats(generate_dataset(spec, n, RngStream(seed, replicate)), spec)
    delta = stats.sigma_hat - spec.covariance
    return np.array([np.linalg.norm(delta, 2), np.linalg.norm(delta, "fro"), np.linalg.norm(stats.u)])


def _quantile_record(
    stat: str,
    spec: ValidatedSpec,
    n: Optional[int],
    values: NDArray[np.float64],
    bound_value: Optional[float],
) -> ExperimentRecord:
    mean, sd = _mean_sd(values)
    return ExperimentRecord(
        experiment="conc-check",
        parameters={"n": n, "d": spec.dim},
        statistic_mean=mean,
        statistic_sd=sd,
        replicates=values.size,
        statistic="value",
        extra={
            "stat": stat,
            "median": float(np.median(values)),
            "q90": float(np.quantile(values, 0.9)),
            "bound_value": bound_value,
        },
    )


def _summary_record(stat: str, spec: ValidatedSpec, replicates: int, **columns: Optional[float]) -> ExperimentRecord:
    return ExperimentRecord(
        experiment="conc-check",
        parameters={"n": None, "d": spec.dim},
        statistic_mean=None,
        statistic_sd=None,
        replicates=replicates,
        statistic="value",
        extra={"stat": stat, "median": None, "q90": None, "bound_value": None, **columns},
    )


def loglog_slope(n_grid: Sequence[int], values: Sequence[float]) -> Optional[float]:
    """Least-squares slope of log(values) against log(n); None if undefined."""
    values = np.asarray(values, dtype=float)
    if len(n_grid) < 2 or np.any(values <= 0.0):
        return None
    return float(np.polyfit(np.log(np.asarray(n_grid, dtype=float)), np.log(values), 1)[0])


def concentration_montecarlo(
    spec: ValidatedSpec,
    plan: SweepPlan,
    cfg: BoundConfig = BoundConfig(),
    workers: int = 1,
) -> list[ExperimentRecord]:
    """
    Empirical sizes of ‖Σ̂ − Σ‖_op, ‖Σ̂ − Σ‖_F and ‖U‖ against their bounds.

    Per n: median and 0.9-quantile of each statistic, with the bound
    (A = B = I) in `bound_value`. Then, per statistic, a `slope_*` record
    (median column: slope of log median vs log n, q90 column: slope of log
    q90, bound_value: the −1/2 rate), and for the two covariance
    statistics a `min_c_x_*` record whose median column is the smallest C_X
    that puts every 0.9-quantile under the bound.
    """
    _require(plan.n_grid, "n_grid")
    eye = np.eye(spec.dim)
    unit = replace(cfg, c_x=1.0)
    records = []
    medians = {stat: [] for stat in CONCENTRATION_STATS}
    q90s = {stat: [] for stat in CONCENTRATION_STATS}
    c_x_needed = {"sigma_op": 0.0, "sigma_fro": 0.0}
    for n in plan.n_grid:
        task = partial(_deviations, spec, n, plan.base_seed)
        draws = np.vstack(replicate_map(task, range(plan.replicates), workers))
        cov_bound = concentration_bound_cov(eye, eye, spec.covariance, cfg, n)
        unit_bound = concentration_bound_cov(eye, eye, spec.covariance, unit, n)
        noise_bound = concentration_bound_noise(eye, spec.covariance, cfg, n)
        for column, stat in enumerate(CONCENTRATION_STATS):
            bound = noise_bound if stat == "u_norm" else cov_bound
            record = _quantile_record(stat, spec, n, draws[:, column], bound)
            records.append(record)
            medians[stat].append(record.extra["median"])
            q90s[stat].append(record.extra["q90"])
            if stat in c_x_needed:
                c_x_needed[stat] = max(c_x_needed[stat], record.extra["q90"] / unit_bound)
        logger.info("conc-check n=%d: median op-norm deviation %.4e", n, medians["sigma_op"][-1])

    for stat in CONCENTRATION_STATS:
        records.append(
            _summary_record(
                f"slope_{stat}",
                spec,
                plan.replicates,
                median=loglog_slope(plan.n_grid, medians[stat]),
                q90=loglog_slope(plan.n_grid, q90s[stat]),
                bound_value=-0.5,
            )
        )
    for stat, c_x in c_x_needed.items():
        records.append(_summary_record(f"min_c_x_{stat}", spec, plan.replicates, median=c_x))
    return records


def _eio_risk(spec: ValidatedSpec, n: int, hp: Hyperparams, seed: int, replicate: int) -> float:
    data = generate_dataset(spec, n, RngStream(seed, replicate))
    theta = eio_fit(sufficient_stats(data), hp).theta
    return excess_risk(spec.covariance, theta, spec.theta_circ)


def risk_bound_check(
    spec: ValidatedSpec,
    plan: SweepPlan,
    hp: Hyperparams = Hyperparams(),
    cfg: BoundConfig = BoundConfig(),
    workers: int = 1,
) -> list[ExperimentRecord]:
    """
    Monte-Carlo excess risk of the EiO estimate beside the squared risk bound.

    One `excess_risk` record per n; `bound_value` is risk_bound_rhs².
    Only meaningful when cfg's constants are valid for the design.
    """
    _require(plan.n_grid, "n_grid")
    records = []
    for n in plan.n_grid:
        risks = np.array(replicate_map(partial(_eio_risk, spec, n, hp, plan.base_seed), range(plan.replicates), workers))
        bound = risk_bound_rhs(n, cfg, spec.covariance, spec.theta_circ, hp.mu, hp.lam) ** 2
        record = _quantile_record("excess_risk", spec, n, risks, bound)
        if not math.isfinite(bound) or record.extra["median"] > bound:
            logger.warning("risk bound below the median excess risk at n=%d", n)
        records.append(record)
    return records


def single_fit(
    spec: ValidatedSpec,
    n: int,
    hp: Hyperparams = Hyperparams(),
    seed: int = 0,
) -> ExperimentRecord:
    """Fit the EiO estimate once on replicate 0 and report risk and convergence."""
    data = generate_dataset(spec, n, RngStream(seed, 0))
    report = eio_fit(sufficient_stats(data), hp)
    risk = excess_risk(spec.covariance, report.theta, spec.theta_circ)
    logger.info("fit n=%d: excess risk %.6e after %d iterations", n, risk, report.iterations)
    return ExperimentRecord(
        experiment="fit",
        parameters={"n": n, "d": spec.dim, "lambda": hp.lam, "mu": hp.mu},
        statistic_mean=risk,
        statistic_sd=0.0,
        replicates=1,
        statistic="excess_risk",
        flag="" if report.converged else "not-converged",
        extra={
            "excess_risk": risk,
            "iterations": report.iterations,
            "converged": report.converged,
            "objective": float(report.objective_trace[-1]) if report.objective_trace.size else None,
        },
    )
