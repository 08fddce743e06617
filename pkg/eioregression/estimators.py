import logging
from enum import Enum
from typing import Optional

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .exceptions import InfiniteMu, SingularSystem
from .models import (
    Dataset,
    FitReport,
    Hyperparams,
    PopulationStats,
    SufficientStats,
    Triplet,
    is_infinite_mu,
)

logger = logging.getLogger(__name__)

# Condition-number ceiling for accepting an unregularized (λ = 0 / τ = 0) solve.
MAX_CONDITION = 1e12
# Relative objective increase treated as divergence of the alternating scheme.
DIVERGENCE_SLACK = 1e-6


class Estimator(str, Enum):
    EIO = "eio"
    PLUGIN = "plugin"
    RIDGE = "ridge"


def _spd_solve(gram, rhs, regularized):
    if not regularized and not np.linalg.cond(gram) < MAX_CONDITION:
        raise SingularSystem("unregularized Gram matrix is numerically singular")
    try:
        factor = cho_factor(gram, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise SingularSystem(f"Cholesky factorization failed: {exc}") from exc
    return cho_solve(factor, rhs, check_finite=False)


def _objective(z, sigma_hat, hp, v):
    if is_infinite_mu(hp.mu):
        raise InfiniteMu("the objective is only defined for finite mu")
    fit = z - v.eta
    link = v.eta - v.a @ v.theta
    operator = sigma_hat - v.a
    return float(
        0.5 * fit @ fit
        + 0.5 * link @ link
        + 0.5 * hp.mu**2 * np.sum(operator * operator)
        + 0.5 * hp.lam * v.theta @ v.theta
    )


def objective_empirical(stats: SufficientStats, hp: Hyperparams, v: Triplet) -> float:
    """
    Evaluate L(υ) = ½‖Z−η‖² + ½‖η−Aθ‖² + (μ²/2)‖Σ̂−A‖_F² + (λ/2)‖θ‖².

    Raises:
        InfiniteMu: If hp.mu is the μ = ∞ sentinel.
    """
    return _objective(stats.z, stats.sigma_hat, hp, v)


def objective_population(pop: PopulationStats, hp: Hyperparams, v: Triplet) -> float:
    """Evaluate the population objective 𝓛(υ), i.e. L with (Σθ°, Σ) for (Z, Σ̂)."""
    return _objective(pop.ez, pop.sigma, hp, v)


def profile_objective(z, sigma_hat, hp: Hyperparams, theta, a) -> float:
    """
    L at the η block minimizer (Aθ + Z)/2, i.e.

        ¼‖Z − Aθ‖² + (μ²/2)‖Σ̂ − A‖_F² + (λ/2)‖θ‖².

    Finite μ only.
    """
    eta = 0.5 * (a @ theta + z)
    return _objective(z, sigma_hat, hp, Triplet(theta=theta, eta=eta, a=a))


def objective_gradient(z, sigma_hat, hp: Hyperparams, theta, a) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    Gradient of L with η eliminated.

    Returns:
        tuple: (∂L/∂θ, ∂L/∂A) with ∂L/∂θ = −½Aᵀ(Z − Aθ) + λθ and
        ∂L/∂A = −½(Z − Aθ)θᵀ + μ²(A − Σ̂).
    """
    if is_infinite_mu(hp.mu):
        raise InfiniteMu("the gradient is only defined for finite mu")
    residual = z - a @ theta
    grad_theta = -0.5 * a.T @ residual + hp.lam * theta
    grad_a = -0.5 * np.outer(residual, theta) + hp.mu**2 * (a - sigma_hat)
    return grad_theta, grad_a


def theta_update(a: NDArray[np.float64], z: NDArray[np.float64], lam: float) -> NDArray[np.float64]:
    """
    θ-block minimizer θ = (AᵀA + 2λI)⁻¹AᵀZ.

    Raises:
        SingularSystem: If λ = 0 and AᵀA is numerically singular.
    """
    d = z.size
    gram = a.T @ a + 2.0 * lam * np.eye(d)
    return _spd_solve(gram, a.T @ z, regularized=lam > 0.0)


def a_update(
    sigma_hat: NDArray[np.float64],
    z: NDArray[np.float64],
    theta: NDArray[np.float64],
    mu: float,
) -> NDArray[np.float64]:
    """
    A-block minimizer A = Zθᵀ(2μ²I + θθᵀ)⁻¹ + Σ̂(I + θθᵀ/(2μ²))⁻¹.

    With the rank-one inverse (2μ²I + θθᵀ)⁻¹ = (I − θθᵀ/(2μ² + ‖θ‖²))/(2μ²)
    this collapses to A = Σ̂ + (Z − Σ̂θ)θᵀ/(2μ² + ‖θ‖²).

    Raises:
        InfiniteMu: If mu is the μ = ∞ sentinel.
    """
    if is_infinite_mu(mu):
        raise InfiniteMu("a_update needs a finite mu")
    denom = 2.0 * mu**2 + theta @ theta
    return sigma_hat + np.outer(z - sigma_hat @ theta, theta) / denom


def plugin_fit(stats: SufficientStats, lam: float) -> NDArray[np.float64]:
    """
    Plug-in estimate θ̂_∞ = (Σ̂² + 2λI)⁻¹Σ̂Z, the μ = ∞ limit.

    Raises:
        SingularSystem: If λ = 0 and Σ̂² is numerically singular.
    """
    sigma_hat = stats.sigma_hat
    gram = sigma_hat @ sigma_hat + 2.0 * lam * np.eye(stats.dim)
    return _spd_solve(gram, sigma_hat @ stats.z, regularized=lam > 0.0)


def ridge_fit(data: Dataset, tau: float) -> NDArray[np.float64]:
    """
    Ridge estimate argmin ‖Y − 𝕏ᵀθ‖² + τ‖θ‖² = (𝕏𝕏ᵀ + τI)⁻¹𝕏Y.

    Raises:
        SingularSystem: If τ = 0 and 𝕏𝕏ᵀ is numerically singular.
    """
    gram = data.x @ data.x.T + tau * np.eye(data.dim)
    return _spd_solve(gram, data.x @ data.y, regularized=tau > 0.0)


def _plugin_report(z, sigma_hat, hp):
    theta = plugin_fit(SufficientStats(z=z, sigma_hat=sigma_hat), hp.lam)
    residual = z - sigma_hat @ theta
    objective = 0.25 * residual @ residual + 0.5 * hp.lam * theta @ theta
    estimate = Triplet(theta=theta, eta=0.5 * (z + sigma_hat @ theta), a=sigma_hat)
    return FitReport(
        estimate=estimate,
        objective_trace=np.array([objective]),
        theta_residuals=np.array([np.linalg.norm(theta)]),
        iterations=1,
        converged=True,
    )


def alternate(z: NDArray[np.float64], sigma_hat: NDArray[np.float64], hp: Hyperparams) -> FitReport:
    """
    Alternating block minimization of L started from (θ₀, A₀) = (0, Σ̂).

    Stops when ‖θ_t − θ_{t−1}‖ ≤ tol·max(1, ‖θ_t‖), when max_iter is spent,
    or when the objective increases by more than 1e-6 relative (reported
    as converged=False). μ = ∞ returns the plug-in closed form.
    """
    if is_infinite_mu(hp.mu):
        return _plugin_report(z, sigma_hat, hp)

    a = np.array(sigma_hat)
    theta = np.zeros_like(z)
    previous = profile_objective(z, sigma_hat, hp, theta, a)
    trace, residuals = [], []
    converged = False
    for t in range(1, hp.max_iter + 1):
        new_theta = theta_update(a, z, hp.lam)
        a = a_update(sigma_hat, z, new_theta, hp.mu)
        step = float(np.linalg.norm(new_theta - theta))
        theta = new_theta
        current = profile_objective(z, sigma_hat, hp, theta, a)
        trace.append(current)
        residuals.append(step)
        if current > previous + DIVERGENCE_SLACK * abs(previous):
            logger.warning("objective increased at iteration %d (%.6e -> %.6e); stopping", t, previous, current)
            break
        previous = current
        if step <= hp.tol * max(1.0, float(np.linalg.norm(theta))):
            converged = True
            break

    estimate = Triplet(theta=theta, eta=0.5 * (z + a @ theta), a=a)
    return FitReport(
        estimate=estimate,
        objective_trace=np.array(trace),
        theta_residuals=np.array(residuals),
        iterations=len(trace),
        converged=converged,
    )


def eio_fit(stats: SufficientStats, hp: Hyperparams) -> FitReport:
    """
    Error-in-operator estimate by alternating minimization.

    Args:
        stats (SufficientStats): Sample moments Z and Σ̂.
        hp (Hyperparams): μ, λ and the iteration controls.

    Returns:
        FitReport: Final triplet (θ_T, ½(Z + A_Tθ_T), A_T) and traces.

    Raises:
        SingularSystem: If λ = 0 and a θ-step Gram matrix is singular.
    """
    return alternate(stats.z, stats.sigma_hat, hp)


def population_fit(pop: PopulationStats, hp: Hyperparams) -> FitReport:
    """Best parametric fit υ* = argmin 𝓛 via the same alternating scheme."""
    return alternate(pop.ez, pop.sigma, hp)


def fit_theta(
    estimator: Estimator,
    hp: Hyperparams,
    stats: SufficientStats,
    data: Optional[Dataset] = None,
) -> NDArray[np.float64]:
    """Point estimate of θ for any of the three estimators."""
    estimator = Estimator(estimator)
    if estimator is Estimator.RIDGE:
        if data is None:
            raise ValueError("ridge needs the raw dataset")
        return ridge_fit(data, hp.tau)
    if estimator is Estimator.PLUGIN:
        return plugin_fit(stats, hp.lam)
    return eio_fit(stats, hp).theta
