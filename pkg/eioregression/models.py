import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import eigh

from .exceptions import (
    DimensionMismatch,
    InvalidHyperparams,
    NonfiniteValues,
    NonmonotoneSpectrum,
    NonorthogonalEigvecs,
)

MU_INFINITY = math.inf
ORTHOGONALITY_TOL = 1e-10


def is_infinite_mu(mu: float) -> bool:
    """Return True when `mu` is the μ = ∞ sentinel."""
    return math.isinf(mu)


def _as_array(values: ArrayLike, name: str, ndim: int) -> NDArray[np.float64]:
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise DimensionMismatch(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonfiniteValues(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


def sine_spectrum(dim: int) -> NDArray[np.float64]:
    """Eigenvalues k^{-1/4}/2, k = 1..dim, of the sine-feature covariance."""
    k = np.arange(1, dim + 1, dtype=float)
    return np.power(k, -0.25) / 2.0


def power_decay_theta(dim: int, decay: float = 3.0) -> NDArray[np.float64]:
    """Ground truth θ°_k = k^{-decay}, k = 1..dim."""
    k = np.arange(1, dim + 1, dtype=float)
    return np.power(k, -decay)


class DesignKind(str, Enum):
    """Covariate family of a synthetic regression design."""

    SINE_FEATURE = "sine"
    GAUSSIAN_SPECTRUM = "gaussian"
    EXPLICIT_COVARIANCE = "explicit"


@dataclass(frozen=True, eq=False)
class DesignSpec:
    """
    Describes the covariate law, the ground-truth parameter and the noise.

    A DesignSpec is raw user input; pass it through `validate_spec` before
    sampling. For the sine-feature family the spectrum is always derived
    from `dim`, any supplied spectrum is ignored.

    Attributes:
        kind (DesignKind): Covariate family.
        dim (int): Ambient dimension d.
        theta_circ (array): Ground-truth θ° of length d.
        noise_std (float): Standard deviation of the Gaussian noise ε.
        spectrum (array | None): Eigenvalues of Σ, nonincreasing.
        eigvecs (array | None): d×d orthogonal V with Σ = V diag(spectrum) Vᵀ;
            identity when absent.
    """

    kind: DesignKind
    dim: int
    theta_circ: ArrayLike
    noise_std: float = 0.0
    spectrum: Optional[ArrayLike] = None
    eigvecs: Optional[ArrayLike] = None

    @classmethod
    def sine(cls, dim: int, noise_std: float = 0.09, theta_decay: float = 3.0) -> "DesignSpec":
        """Sine-feature design with θ°_k = k^{-theta_decay}."""
        return cls(
            kind=DesignKind.SINE_FEATURE,
            dim=dim,
            theta_circ=power_decay_theta(dim, theta_decay),
            noise_std=noise_std,
        )

    @classmethod
    def from_covariance(cls, sigma: ArrayLike, theta_circ: ArrayLike, noise_std: float = 0.0) -> "DesignSpec":
        """
        Build an explicit-covariance design from a symmetric PSD matrix.

        The matrix is eigendecomposed; eigenvalues are reordered to be
        nonincreasing and round-off negatives are clipped to zero.

        Raises:
            DimensionMismatch: If `sigma` is not square.
        """
        sigma = np.asarray(sigma, dtype=float)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise DimensionMismatch(f"covariance must be square, got shape {sigma.shape}")
        values, vectors = eigh((sigma + sigma.T) / 2.0)
        order = np.argsort(values)[::-1]
        return cls(
            kind=DesignKind.EXPLICIT_COVARIANCE,
            dim=sigma.shape[0],
            theta_circ=theta_circ,
            noise_std=noise_std,
            spectrum=np.clip(values[order], 0.0, None),
            eigvecs=vectors[:, order],
        )


@dataclass(frozen=True, eq=False)
class ValidatedSpec:
    """
    A DesignSpec that passed `validate_spec`, with derived fields filled in.

    `eigvecs` stays None when Σ is diagonal in the standard basis.
    """

    kind: DesignKind
    dim: int
    spectrum: NDArray[np.float64]
    theta_circ: NDArray[np.float64]
    noise_std: float
    eigvecs: Optional[NDArray[np.float64]] = None

    @cached_property
    def covariance(self) -> NDArray[np.float64]:
        """Exact population covariance Σ = V diag(spectrum) Vᵀ."""
        if self.eigvecs is None:
            sigma = np.diag(self.spectrum)
        else:
            sigma = (self.eigvecs * self.spectrum) @ self.eigvecs.T
            sigma = (sigma + sigma.T) / 2.0
        sigma.setflags(write=False)
        return sigma

    def population_stats(self) -> "PopulationStats":
        """Population moments (Σ, 𝔼Z = Σθ°) of this design."""
        return PopulationStats(sigma=self.covariance, ez=self.covariance @ self.theta_circ)


def validate_spec(spec: DesignSpec) -> ValidatedSpec:
    """
    Check a design and fill in its derived fields.

    Args:
        spec (DesignSpec): Raw design description.

    Returns:
        ValidatedSpec: The design with its spectrum materialized.

    Raises:
        DimensionMismatch: If dim < 1 or an array length disagrees with dim.
        NonmonotoneSpectrum: If the spectrum is negative or increases.
        NonorthogonalEigvecs: If ‖VᵀV − I‖_max > 1e-10.
        NonfiniteValues: If any supplied array has NaN/inf entries.
        InvalidHyperparams: If noise_std is negative.
    """
    dim = int(spec.dim)
    if dim < 1:
        raise DimensionMismatch("dim must be ≥ 1")
    if not spec.noise_std >= 0.0:
        raise InvalidHyperparams("noise_std must be nonnegative")

    theta = _as_array(spec.theta_circ, "theta_circ", 1)
    if theta.size != dim:
        raise DimensionMismatch(f"theta_circ has length {theta.size}, expected {dim}")

    kind = DesignKind(spec.kind)
    if kind is DesignKind.SINE_FEATURE:
        spectrum = sine_spectrum(dim)
        spectrum.setflags(write=False)
        return ValidatedSpec(kind=kind, dim=dim, spectrum=spectrum, theta_circ=theta, noise_std=float(spec.noise_std))

    if spec.spectrum is None:
        raise DimensionMismatch(f"{kind.value} design requires a spectrum")
    spectrum = _as_array(spec.spectrum, "spectrum", 1)
    if spectrum.size != dim:
        raise DimensionMismatch(f"spectrum has length {spectrum.size}, expected {dim}")
    if np.any(spectrum < 0.0):
        raise NonmonotoneSpectrum("spectrum must be nonnegative")
    if np.any(np.diff(spectrum) > 0.0):
        raise NonmonotoneSpectrum("spectrum must be nonincreasing")

    eigvecs = None
    if spec.eigvecs is not None:
        eigvecs = _as_array(spec.eigvecs, "eigvecs", 2)
        if eigvecs.shape != (dim, dim):
            raise DimensionMismatch(f"eigvecs has shape {eigvecs.shape}, expected {(dim, dim)}")
        gap = np.max(np.abs(eigvecs.T @ eigvecs - np.eye(dim)))
        if gap > ORTHOGONALITY_TOL:
            raise NonorthogonalEigvecs(f"‖VᵀV − I‖_max = {gap:.3e} exceeds {ORTHOGONALITY_TOL}")

    return ValidatedSpec(
        kind=kind,
        dim=dim,
        spectrum=spectrum,
        theta_circ=theta,
        noise_std=float(spec.noise_std),
        eigvecs=eigvecs,
    )


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    An n-sample of covariates and responses.

    Covariates are stored column-wise, x has shape (d, n). Synthetic draws
    also keep the realized noise vector so U = (1/n)𝕏ε is exact.
    """

    x: NDArray[np.float64]
    y: NDArray[np.float64]
    noise: Optional[NDArray[np.float64]] = None

    def __post_init__(self):
        x = _as_array(self.x, "x", 2)
        y = _as_array(self.y, "y", 1)
        if x.shape[1] != y.size:
            raise DimensionMismatch(f"x has {x.shape[1]} columns but y has {y.size} entries")
        if y.size < 1:
            raise DimensionMismatch("a dataset needs at least one sample")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.noise is not None:
            noise = _as_array(self.noise, "noise", 1)
            if noise.size != y.size:
                raise DimensionMismatch("noise length must equal sample size")
            object.__setattr__(self, "noise", noise)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def dim(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True, eq=False)
class SufficientStats:
    """Sample moments Z = (1/n)𝕏Y, Σ̂ = (1/n)𝕏𝕏ᵀ and, for synthetic data, U."""

    z: NDArray[np.float64]
    sigma_hat: NDArray[np.float64]
    u: Optional[NDArray[np.float64]] = None

    def __post_init__(self):
        z = _as_array(self.z, "z", 1)
        sigma_hat = _as_array(self.sigma_hat, "sigma_hat", 2)
        if sigma_hat.shape != (z.size, z.size):
            raise DimensionMismatch(f"sigma_hat has shape {sigma_hat.shape}, expected {(z.size, z.size)}")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "sigma_hat", sigma_hat)
        if self.u is not None:
            object.__setattr__(self, "u", _as_array(self.u, "u", 1))

    @property
    def dim(self) -> int:
        return self.z.size


@dataclass(frozen=True, eq=False)
class PopulationStats:
    """Population counterparts (Σ, 𝔼Z = Σθ°) of the sufficient statistics."""

    sigma: NDArray[np.float64]
    ez: NDArray[np.float64]

    def as_sufficient_stats(self) -> SufficientStats:
        """View the population moments through the empirical-statistics type."""
        return SufficientStats(z=self.ez, sigma_hat=self.sigma)


@dataclass(frozen=True)
class Hyperparams:
    """
    Tuning parameters of the estimators.

    Attributes:
        mu (float): Operator penalty weight μ > 0; `MU_INFINITY` selects the
            plug-in estimator.
        lam (float): θ penalty weight λ ≥ 0.
        tau (float): Ridge penalty τ ≥ 0 (baseline only).
        max_iter (int): Iteration budget T of the alternating scheme.
        tol (float): Relative stopping tolerance on ‖θ_t − θ_{t−1}‖.
    """

    mu: float = 1e8
    lam: float = 1e-3
    tau: float = 1.0
    max_iter: int = 200
    tol: float = 1e-10

    def __post_init__(self):
        if not self.mu > 0.0:
            raise InvalidHyperparams("mu must be positive")
        if not (self.lam >= 0.0 and math.isfinite(self.lam)):
            raise InvalidHyperparams("lambda must be nonnegative and finite")
        if not (self.tau >= 0.0 and math.isfinite(self.tau)):
            raise InvalidHyperparams("tau must be nonnegative and finite")
        if self.max_iter < 1:
            raise InvalidHyperparams("max_iter must be ≥ 1")
        if not self.tol > 0.0:
            raise InvalidHyperparams("tol must be positive")


@dataclass(frozen=True, eq=False)
class Triplet:
    """A point υ = (θ, η, A) of the joint parameter space."""

    theta: NDArray[np.float64]
    eta: NDArray[np.float64]
    a: NDArray[np.float64]

    def __post_init__(self):
        theta = _as_array(self.theta, "theta", 1)
        eta = _as_array(self.eta, "eta", 1)
        a = _as_array(self.a, "a", 2)
        d = theta.size
        if eta.size != d or a.shape != (d, d):
            raise DimensionMismatch("theta, eta and A must share the dimension d")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "a", a)


@dataclass(frozen=True, eq=False)
class FitReport:
    """Estimator output together with its convergence trace."""

    estimate: Triplet
    objective_trace: NDArray[np.float64] = field(default_factory=lambda: np.zeros(0))
    theta_residuals: NDArray[np.float64] = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0
    converged: bool = False

    @property
    def theta(self) -> NDArray[np.float64]:
        return self.estimate.theta
