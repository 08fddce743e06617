import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from .exceptions import KindMismatch
from .models import Dataset, DesignKind, PopulationStats, SufficientStats, ValidatedSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RngStream:
    """
    Address of an independent random stream.

    The stream is a Philox counter-based generator keyed by
    ``SeedSequence(seed, spawn_key=(stream_id,))``; equal addresses give
    bit-identical draws on one platform.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.Philox(seq))


def _noise(spec, n, gen):
    return spec.noise_std * gen.standard_normal(n)


def gen_sine_design(spec: ValidatedSpec, n: int, rng: RngStream) -> Dataset:
    """
    Draw n samples X_i = (k^{-1/8} sin(πk ξ_k))_{k=1..d}, ξ_k ~ Uniform[−1, 1].

    Fresh ξ are drawn for every sample. Responses are
    Y_i = X_iᵀθ° + ε_i with Gaussian ε of standard deviation spec.noise_std.

    Raises:
        KindMismatch: If the design is not the sine-feature family.
        ValueError: If n < 1.
    """
    if spec.kind is not DesignKind.SINE_FEATURE:
        raise KindMismatch(f"gen_sine_design needs a sine design, got {spec.kind.value}")
    if n < 1:
        raise ValueError("n must be ≥ 1")
    gen = rng.generator()
    k = np.arange(1, spec.dim + 1, dtype=float)[:, None]
    xi = gen.uniform(-1.0, 1.0, size=(spec.dim, n))
    x = np.power(k, -0.125) * np.sin(np.pi * k * xi)
    eps = _noise(spec, n, gen)
    return Dataset(x=x, y=x.T @ spec.theta_circ + eps, noise=eps)


def gen_gaussian_design(spec: ValidatedSpec, n: int, rng: RngStream) -> Dataset:
    """
    Draw n samples X_i = V diag(√σ) g_i with g_i standard normal.

    Explicit-covariance designs are sampled from the same Gaussian law.

    Raises:
        KindMismatch: If the design is the sine-feature family.
        ValueError: If n < 1.
    """
    if spec.kind is DesignKind.SINE_FEATURE:
        raise KindMismatch("gen_gaussian_design needs a Gaussian or explicit-covariance design")
    if n < 1:
        raise ValueError("n must be ≥ 1")
    gen = rng.generator()
    g = gen.standard_normal((spec.dim, n))
    x = np.sqrt(spec.spectrum)[:, None] * g
    if spec.eigvecs is not None:
        x = spec.eigvecs @ x
    eps = _noise(spec, n, gen)
    return Dataset(x=x, y=x.T @ spec.theta_circ + eps, noise=eps)


def generate_dataset(spec: ValidatedSpec, n: int, rng: RngStream) -> Dataset:
    """Sample a dataset with the sampler that matches the design family."""
    if spec.kind is DesignKind.SINE_FEATURE:
        return gen_sine_design(spec, n, rng)
    return gen_gaussian_design(spec, n, rng)


def true_covariance(spec: ValidatedSpec) -> NDArray[np.float64]:
    """Exact Σ: diag(k^{-1/4}/2) for the sine design, V diag(σ) Vᵀ otherwise."""
    return np.array(spec.covariance)


def population_stats(spec: ValidatedSpec) -> PopulationStats:
    return spec.population_stats()


def sufficient_stats(data: Dataset, spec: Optional[ValidatedSpec] = None) -> SufficientStats:
    """
    Compute Z = (1/n)𝕏Y, Σ̂ = (1/n)𝕏𝕏ᵀ and the noise term U = Z − Σ̂θ°.

    Σ̂ is symmetrized after formation. U is (1/n)𝕏ε when the dataset kept
    its noise, else Z − Σ̂θ° when the design is given, else None.

    Args:
        data (Dataset): The sample.
        spec (ValidatedSpec | None): Design that generated the sample.

    Returns:
        SufficientStats: The sample moments.
    """
    n = data.n
    z = data.x @ data.y / n
    sigma_hat = data.x @ data.x.T / n
    sigma_hat = (sigma_hat + sigma_hat.T) / 2.0
    u = None
    if data.noise is not None:
        u = data.x @ data.noise / n
    elif spec is not None:
        u = z - sigma_hat @ spec.theta_circ
    return SufficientStats(z=z, sigma_hat=sigma_hat, u=u)


def write_dataset(data: Dataset, path: Path) -> Path:
    """
    Dump a dataset as CSV with header ``i,x_1..x_d,y``.

    Floats are written with 17 significant digits and LF line endings.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ["i"] + [f"x_{k}" for k in range(1, data.dim + 1)] + ["y"]
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(data.n):
            row = [str(i + 1)] + [format(v, ".17g") for v in data.x[:, i]] + [format(data.y[i], ".17g")]
            writer.writerow(row)
    logger.info("wrote dataset n=%d d=%d to %s", data.n, data.dim, path)
    return path
