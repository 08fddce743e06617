import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import LinAlgError, eigh, solve

from .exceptions import NonmonotoneSpectrum, SingularSystem, TauLambdaMismatch, ZeroTheta
from .models import is_infinite_mu

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BoundConfig:
    """
    Constants the bounds are stated in.

    The bound functions only evaluate formulas; whether a value is a valid
    bound depends on these constants being right for the design.

    Attributes:
        c_x (float): C_X of the quadratic-form moment assumption on X.
        sigma_psi1 (float): ψ₁-norm σ of Σ^{-1/2}X₁ε₁ (a proxy; defaults to
            the design noise level in run configs).
        delta (float): Confidence parameter δ ∈ (0, 1).
    """

    c_x: float = 1.0
    sigma_psi1: float = 0.09
    delta: float = 0.05

    def __post_init__(self):
        if not self.c_x > 0.0:
            raise ValueError("c_x must be positive")
        if not self.sigma_psi1 >= 0.0:
            raise ValueError("sigma_psi1 must be nonnegative")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")


@dataclass(frozen=True)
class SpectralSummary:
    eff_rank: float
    k_star: int
    r2: float
    r4: float


@dataclass(frozen=True)
class InequalityCheck:
    """Both sides of one inequality lhs ≤ rhs."""

    lhs: float
    rhs: float

    def holds(self, slack: float = 1e-12) -> bool:
        return self.lhs <= self.rhs + slack * max(1.0, abs(self.rhs))


@dataclass(frozen=True)
class BiasNormBounds:
    head_tail_split: InequalityCheck
    head_tail_split_cubed: InequalityCheck
    ridge_comparison: InequalityCheck

    def all_hold(self, slack: float = 1e-12) -> bool:
        return all(check.holds(slack) for check in (self.head_tail_split, self.head_tail_split_cubed, self.ridge_comparison))


@dataclass(frozen=True)
class RiskRemainder:
    """
    The remainder ◊ of the risk expansion, split by its μ-dependence.

    `bias_part` and `cross_part` are O(1/μ) and vanish at μ = ∞;
    `sample_part` does not depend on μ.
    """

    bias_part: float
    cross_part: float
    sample_part: float

    @property
    def mu_part(self) -> float:
        return self.bias_part + self.cross_part

    @property
    def total(self) -> float:
        return self.bias_part + self.cross_part + self.sample_part


@dataclass(frozen=True)
class VarianceOrders:
    """Variance orders of ridge at τ and of EiO at λ, both divided by n."""

    k_tilde: int
    ridge_trace: float
    ridge_split: float
    eio_split: float


def _spectrum(values):
    spectrum = np.asarray(values, dtype=float)
    if spectrum.ndim != 1 or spectrum.size == 0:
        raise NonmonotoneSpectrum("spectrum must be a nonempty vector")
    if np.any(spectrum < 0.0) or np.any(np.diff(spectrum) > 0.0):
        raise NonmonotoneSpectrum("spectrum must be nonnegative and nonincreasing")
    return spectrum


def _eig_desc(sigma):
    values, vectors = eigh((sigma + sigma.T) / 2.0)
    order = np.argsort(values)[::-1]
    return np.clip(values[order], 0.0, None), vectors[:, order]


def _psd_power(sigma: NDArray[np.float64], power: float) -> NDArray[np.float64]:
    values, vectors = _eig_desc(sigma)
    return (vectors * np.power(values, power)) @ vectors.T


def _op_norm(sigma: NDArray[np.float64]) -> float:
    return float(_eig_desc(sigma)[0][0])


def sigma_norm(sigma: NDArray[np.float64], vec: NDArray[np.float64], power: int = 1) -> float:
    """‖Σ^{power/2} v‖ computed as √(vᵀΣ^{power}v)."""
    weighted = vec
    for _ in range(power):
        weighted = sigma @ weighted
    return math.sqrt(max(0.0, float(vec @ weighted)))


def effective_rank(b: ArrayLike) -> float:
    """r(B) = Tr(B)/‖B‖ for symmetric PSD B; 0 for the zero matrix."""
    b = np.asarray(b, dtype=float)
    top = _op_norm(b)
    if top == 0.0:
        return 0.0
    return float(np.trace(b)) / top


def tail_ratio_sum(spectrum: ArrayLike, k: int, q: float) -> float:
    """
    r_q(k) = Σ_{j>k} (σ_j/σ_{k+1})^q.

    Empty tails (k = d) and all-zero tails give 0.
    """
    spectrum = np.asarray(spectrum, dtype=float)
    tail = spectrum[k:]
    if tail.size == 0 or tail[0] == 0.0:
        return 0.0
    return float(np.sum(np.power(tail / tail[0], q)))


def k_star(spectrum: ArrayLike, lam: float) -> int:
    """k*(λ) = max{k : σ_k² ≥ 2λ}, 0 when σ₁² < 2λ."""
    spectrum = _spectrum(spectrum)
    return int(np.count_nonzero(spectrum**2 >= 2.0 * lam))


def spectral_summary(spectrum: ArrayLike, lam: float) -> SpectralSummary:
    """
    Effective rank, k*(λ) and the tail sums r₂(k*), r₄(k*).

    Raises:
        NonmonotoneSpectrum: If the spectrum is not nonincreasing.
    """
    spectrum = _spectrum(spectrum)
    k = k_star(spectrum, lam)
    top = spectrum[0]
    return SpectralSummary(
        eff_rank=float(np.sum(spectrum) / top) if top > 0.0 else 0.0,
        k_star=k,
        r2=tail_ratio_sum(spectrum, k, 2),
        r4=tail_ratio_sum(spectrum, k, 4),
    )


def bias_leading_term(sigma: ArrayLike, theta_circ: ArrayLike, lam: float) -> NDArray[np.float64]:
    """
    Leading bias term b_λ = −λ(Σ²/2 + λI)⁻¹θ°.

    θ° + b_λ is the predicted position of the best parametric fit θ*.
    """
    sigma = np.asarray(sigma, dtype=float)
    theta_circ = np.asarray(theta_circ, dtype=float)
    if lam == 0.0:
        return np.zeros_like(theta_circ)
    system = sigma @ sigma / 2.0 + lam * np.eye(theta_circ.size)
    return solve(system, -lam * theta_circ, assume_a="pos")


def predicted_best_fit(sigma: ArrayLike, theta_circ: ArrayLike, lam: float) -> NDArray[np.float64]:
    return np.asarray(theta_circ, dtype=float) + bias_leading_term(sigma, theta_circ, lam)


def variance_leading_term(
    sigma: ArrayLike,
    sigma_hat: ArrayLike,
    u: ArrayLike,
    b_lambda: ArrayLike,
    lam: float,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    Leading stochastic term ζ and its resolvent image ζ̃.

    ζ = ΣU − Σ(Σ̂ − Σ)b_λ − (Σ̂ − Σ)Σb_λ and ζ̃ = (Σ² + 2λI)⁻¹ζ.

    Raises:
        SingularSystem: If λ = 0 and Σ is singular.
    """
    sigma = np.asarray(sigma, dtype=float)
    delta = np.asarray(sigma_hat, dtype=float) - sigma
    b_lambda = np.asarray(b_lambda, dtype=float)
    zeta = sigma @ np.asarray(u, dtype=float) - sigma @ (delta @ b_lambda) - delta @ (sigma @ b_lambda)
    system = sigma @ sigma + 2.0 * lam * np.eye(zeta.size)
    try:
        zeta_tilde = solve(system, zeta, assume_a="pos")
    except LinAlgError as exc:
        raise SingularSystem(f"Σ² + 2λI is singular: {exc}") from exc
    return zeta, zeta_tilde


def excess_risk(sigma: ArrayLike, theta_hat: ArrayLike, theta_circ: ArrayLike) -> float:
    """Excess prediction risk ‖Σ^{1/2}(θ̂ − θ°)‖²."""
    diff = np.asarray(theta_hat, dtype=float) - np.asarray(theta_circ, dtype=float)
    return max(0.0, float(diff @ np.asarray(sigma, dtype=float) @ diff))


def _theta_norm(theta_circ: ArrayLike) -> float:
    norm = float(np.linalg.norm(theta_circ))
    if norm == 0.0:
        raise ZeroTheta("the bound is undefined for theta_circ = 0")
    return norm


def psi_bound(n: int, cfg: BoundConfig, sigma: ArrayLike, theta_circ: ArrayLike) -> float:
    """
    Ψ(n, δ) = 196(σ‖Σ‖^{1/2}/‖θ°‖ + 2C_X‖Σ‖)²(r(Σ)² + log(4/δ))/n.

    Raises:
        ZeroTheta: If θ° = 0.
    """
    theta_norm = _theta_norm(theta_circ)
    sigma = np.asarray(sigma, dtype=float)
    top = _op_norm(sigma)
    rank = effective_rank(sigma)
    scale = cfg.sigma_psi1 * math.sqrt(top) / theta_norm + 2.0 * cfg.c_x * top
    return 196.0 * scale**2 * (rank**2 + math.log(4.0 / cfg.delta)) / n


def risk_remainder(
    n: int,
    cfg: BoundConfig,
    sigma: ArrayLike,
    theta_circ: ArrayLike,
    mu: float,
    lam: float,
) -> RiskRemainder:
    """Remainder ◊ of the risk bound, split into μ-dependent and μ-free parts."""
    sigma = np.asarray(sigma, dtype=float)
    theta_norm = _theta_norm(theta_circ)
    b = bias_leading_term(sigma, theta_circ, lam)
    b_norm = float(np.linalg.norm(b))
    top = _op_norm(sigma)
    psi = psi_bound(n, cfg, sigma, theta_circ)
    if is_infinite_mu(mu):
        bias_part = cross_part = 0.0
    else:
        bias_part = 210.0 * (theta_norm / mu + top * b_norm / (mu * math.sqrt(lam))) * math.sqrt(top) * b_norm
        cross_part = theta_norm / lam**0.25 * ((17.0 * theta_norm / mu) ** 2 + b_norm / (160.0 * mu)) * math.sqrt(psi)
    sample_part = 19.0 * theta_norm / (math.sqrt(3.0) * lam**0.75) * (1.0 + math.sqrt(psi / lam)) * psi
    return RiskRemainder(bias_part=bias_part, cross_part=cross_part, sample_part=sample_part)


def risk_bound_rhs(
    n: int,
    cfg: BoundConfig,
    sigma: ArrayLike,
    theta_circ: ArrayLike,
    mu: float,
    lam: float,
) -> float:
    """
    Upper bound on the root excess risk ‖Σ^{1/2}(θ̂ − θ°)‖.

    ‖Σ^{1/2}b‖ + 4(2σ + C_X‖Σ^{1/2}b‖)√((k* + r₄ + log(4/δ))/n)
    + 2C_X‖Σ^{3/2}b‖/√(2λ) · √((4k* + 4r₂ + log(4/δ))/n) + ◊.

    Args:
        n (int): Sample size.
        cfg (BoundConfig): C_X, σ and δ.
        sigma (array): Population covariance Σ.
        theta_circ (array): Ground truth θ°.
        mu (float): Operator penalty μ (may be the ∞ sentinel).
        lam (float): θ penalty λ > 0.

    Returns:
        float: The bound value; meaningful only if cfg's constants are valid
        for the design.

    Raises:
        ZeroTheta: If θ° = 0.
        ValueError: If λ ≤ 0.
    """
    if not lam > 0.0:
        raise ValueError("risk_bound_rhs needs lambda > 0")
    sigma = np.asarray(sigma, dtype=float)
    summary = spectral_summary(_eig_desc(sigma)[0], lam)
    b = bias_leading_term(sigma, theta_circ, lam)
    half = sigma_norm(sigma, b, 1)
    three_halves = sigma_norm(sigma, b, 3)
    log_term = math.log(4.0 / cfg.delta)
    k = summary.k_star
    noise_part = 4.0 * (2.0 * cfg.sigma_psi1 + cfg.c_x * half) * math.sqrt((k + summary.r4 + log_term) / n)
    design_part = 2.0 * cfg.c_x * three_halves / math.sqrt(2.0 * lam) * math.sqrt((4 * k + 4 * summary.r2 + log_term) / n)
    return half + noise_part + design_part + risk_remainder(n, cfg, sigma, theta_circ, mu, lam).total


def risk_bound_simplified_rhs(
    n: int,
    cfg: BoundConfig,
    sigma: ArrayLike,
    theta_circ: ArrayLike,
    mu: float,
    lam: float,
) -> float:
    """Root excess-risk bound with θ° split at k* in the eigenbasis of Σ."""
    if not lam > 0.0:
        raise ValueError("risk_bound_simplified_rhs needs lambda > 0")
    sigma = np.asarray(sigma, dtype=float)
    values, vectors = _eig_desc(sigma)
    summary = spectral_summary(values, lam)
    k = summary.k_star
    beta = vectors.T @ np.asarray(theta_circ, dtype=float)
    head = float(np.sum(beta[:k] ** 2 / values[:k])) if k else 0.0
    tail = float(np.sum(values[k:] * beta[k:] ** 2))
    bias = math.sqrt((values[k - 1] ** 2 * head if k else 0.0) + tail)
    log_term = math.log(4.0 / cfg.delta)
    design = 1.0 + 8.0 * cfg.c_x * math.sqrt((k + summary.r2 + log_term) / n)
    noise = 8.0 * cfg.sigma_psi1 * math.sqrt((k + summary.r4 + log_term) / n)
    return bias * design + noise + risk_remainder(n, cfg, sigma, theta_circ, mu, lam).total


def _concentration_precondition(name: str, lhs: float, limit: float) -> None:
    if lhs > limit:
        logger.warning("%s: sample-size precondition violated (%.4g > %.4g); bound is indicative only", name, lhs, limit)


def concentration_bound_cov(a: ArrayLike, b: ArrayLike, sigma: ArrayLike, cfg: BoundConfig, n: int) -> float:
    """
    High-probability bound on ‖B(Σ̂ − Σ)Aᵀ‖_F.

    4C_X‖AΣ^{1/2}‖‖BΣ^{1/2}‖√((r(Σ^{1/2}AᵀAΣ^{1/2})·r(Σ^{1/2}BᵀBΣ^{1/2}) + log(2/δ))/n).
    Logs a warning when r_A·r_B + log(2/δ) > 4n.
    """
    root = _psd_power(np.asarray(sigma, dtype=float), 0.5)
    a_root = np.asarray(a, dtype=float) @ root
    b_root = np.asarray(b, dtype=float) @ root
    rank_a = effective_rank(a_root.T @ a_root)
    rank_b = effective_rank(b_root.T @ b_root)
    log_term = math.log(2.0 / cfg.delta)
    _concentration_precondition("concentration_bound_cov", rank_a * rank_b + log_term, 4.0 * n)
    return (
        4.0 * cfg.c_x * np.linalg.norm(a_root, 2) * np.linalg.norm(b_root, 2)
        * math.sqrt((rank_a * rank_b + log_term) / n)
    )


def concentration_bound_noise(b: ArrayLike, sigma: ArrayLike, cfg: BoundConfig, n: int) -> float:
    """
    High-probability bound on ‖(1/n)Σ BX_iε_i‖.

    8σ‖BΣ^{1/2}‖√((r(Σ^{1/2}BᵀBΣ^{1/2}) + log(2/δ))/n).
    """
    root = _psd_power(np.asarray(sigma, dtype=float), 0.5)
    b_root = np.asarray(b, dtype=float) @ root
    rank_b = effective_rank(b_root.T @ b_root)
    log_term = math.log(2.0 / cfg.delta)
    _concentration_precondition("concentration_bound_noise", rank_b + log_term, float(n))
    return 8.0 * cfg.sigma_psi1 * np.linalg.norm(b_root, 2) * math.sqrt((rank_b + log_term) / n)


def bias_norm_bounds(
    spectrum: ArrayLike,
    theta_circ_coords: ArrayLike,
    lam: float,
    tau: Optional[float] = None,
) -> BiasNormBounds:
    """
    Evaluate both sides of the bias-norm inequalities in the eigenbasis of Σ.

    With β = Vᵀθ° and k* = k*(λ):
      ‖Σ^{1/2}b‖² ≤ (σ_{k*}²/4)‖Σ^{-1/2}θ°_{≤k*}‖² + ‖Σ^{1/2}θ°_{>k*}‖²,
      ‖Σ^{3/2}b‖²/(2λ) ≤ σ_{k*}²‖Σ^{-1/2}θ°_{≤k*}‖² + ¼‖Σ^{1/2}θ°_{>k*}‖²,
      max of both left sides ≤ 2τ²‖Σ^{1/2}(Σ + τI)⁻¹θ°‖² when τ² = 2λ.

    Args:
        spectrum (array): Eigenvalues of Σ, nonincreasing.
        theta_circ_coords (array): Coordinates β of θ° in the eigenbasis.
        lam (float): λ > 0.
        tau (float | None): Ridge penalty; defaults to √(2λ).

    Raises:
        TauLambdaMismatch: If τ² differs from 2λ.
        ValueError: If λ ≤ 0.
    """
    if not lam > 0.0:
        raise ValueError("bias_norm_bounds needs lambda > 0")
    spectrum = _spectrum(spectrum)
    beta = np.asarray(theta_circ_coords, dtype=float)
    if tau is None:
        tau = math.sqrt(2.0 * lam)
    if not math.isclose(tau**2, 2.0 * lam, rel_tol=1e-12, abs_tol=0.0):
        raise TauLambdaMismatch(f"tau^2 = {tau**2!r} but 2*lambda = {2.0 * lam!r}")

    k = k_star(spectrum, lam)
    b = -2.0 * lam * beta / (spectrum**2 + 2.0 * lam)
    half_sq = float(np.sum(spectrum * b**2))
    cubed_sq = float(np.sum(spectrum**3 * b**2)) / (2.0 * lam)
    head = float(np.sum(beta[:k] ** 2 / spectrum[:k])) if k else 0.0
    tail = float(np.sum(spectrum[k:] * beta[k:] ** 2))
    lead = spectrum[k - 1] ** 2 if k else 0.0
    ridge = 2.0 * tau**2 * float(np.sum(spectrum * beta**2 / (spectrum + tau) ** 2))
    return BiasNormBounds(
        head_tail_split=InequalityCheck(lhs=half_sq, rhs=lead / 4.0 * head + tail),
        head_tail_split_cubed=InequalityCheck(lhs=cubed_sq, rhs=lead * head + tail / 4.0),
        ridge_comparison=InequalityCheck(lhs=max(half_sq, cubed_sq), rhs=ridge),
    )


def bias_conditions(sigma: ArrayLike, theta_circ: ArrayLike, mu: float, lam: float) -> bool:
    """Whether ‖θ°‖ ≤ μ/420 and ‖θ°‖‖Σ‖ ≤ μ√λ/168 both hold."""
    theta_norm = float(np.linalg.norm(theta_circ))
    if is_infinite_mu(mu):
        return True
    top = _op_norm(np.asarray(sigma, dtype=float))
    return theta_norm <= mu / 420.0 and theta_norm * top <= mu * math.sqrt(lam) / 168.0


def bias_remainder_bound(sigma: ArrayLike, theta_circ: ArrayLike, mu: float, lam: float) -> float:
    """Bound 210(‖θ°‖/μ + ‖Σ‖‖b‖/(μ√λ))‖b‖ on ‖θ* − θ° − b_λ‖."""
    if is_infinite_mu(mu) or lam == 0.0:
        return 0.0
    sigma = np.asarray(sigma, dtype=float)
    b_norm = float(np.linalg.norm(bias_leading_term(sigma, theta_circ, lam)))
    theta_norm = float(np.linalg.norm(theta_circ))
    return 210.0 * (theta_norm / mu + _op_norm(sigma) * b_norm / (mu * math.sqrt(lam))) * b_norm


def variance_remainder_bound(
    n: int,
    cfg: BoundConfig,
    sigma: ArrayLike,
    theta_circ: ArrayLike,
    mu: float,
    lam: float,
) -> float:
    """Bound on ‖Σ^{1/2}(θ̂ − θ* − ζ̃)‖ from the variance expansion."""
    theta_norm = _theta_norm(theta_circ)
    psi = psi_bound(n, cfg, sigma, theta_circ)
    b_norm = float(np.linalg.norm(bias_leading_term(sigma, theta_circ, lam)))
    second_order = 19.0 * theta_norm / (math.sqrt(3.0) * lam**0.75) * (1.0 + math.sqrt(psi / (27.0 * lam))) * psi
    if is_infinite_mu(mu):
        return second_order
    mixed = theta_norm / lam**0.25 * ((17.0 * theta_norm / mu) ** 2 + b_norm / (160.0 * mu)) * math.sqrt(psi)
    return second_order + mixed


def convergence_bound(
    iterations: int,
    rho0: float,
    n: int,
    cfg: BoundConfig,
    sigma: ArrayLike,
    theta_circ: ArrayLike,
    lam: float,
) -> float:
    """ρ₀^{2(T−1)}(‖θ°‖ + 8σ‖Σ‖^{1/2}√((r(Σ) + log(4/δ))/(λn))), the distance of θ_T to θ̂."""
    if not 0.0 < rho0 <= 0.125:
        raise ValueError("rho0 must lie in (0, 1/8]")
    sigma = np.asarray(sigma, dtype=float)
    radius = float(np.linalg.norm(theta_circ)) + 8.0 * cfg.sigma_psi1 * math.sqrt(_op_norm(sigma)) * math.sqrt(
        (effective_rank(sigma) + math.log(4.0 / cfg.delta)) / (lam * n)
    )
    return rho0 ** (2 * (iterations - 1)) * radius


def variance_orders(spectrum: ArrayLike, lam: float, tau: float, n: int) -> VarianceOrders:
    """
    Variance orders of the ridge estimate at τ and of EiO at λ.

    Ridge: Tr(Σ²(Σ + τI)⁻²)/n and (k̃ + r₂(k̃))/n with k̃ = max{k : σ_k ≥ τ};
    EiO: (k* + r₄(k*))/n.
    """
    spectrum = _spectrum(spectrum)
    k_tilde = int(np.count_nonzero(spectrum >= tau))
    summary = spectral_summary(spectrum, lam)
    return VarianceOrders(
        k_tilde=k_tilde,
        ridge_trace=float(np.sum(spectrum**2 / (spectrum + tau) ** 2)) / n,
        ridge_split=(k_tilde + tail_ratio_sum(spectrum, k_tilde, 2)) / n,
        eio_split=(summary.k_star + summary.r4) / n,
    )
