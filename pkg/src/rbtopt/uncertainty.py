"""Probabilistic model of the random inputs (load, modulus, Poisson ratio).

Distributions are specified by family, mean, and std; internal
parameters come from moment matching.  All sampling runs through the
inverse-CDF map from standard normal space, which doubles as the
isoprobabilistic transform needed by the subset-simulation chains.
"""

import warnings
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from numpy.typing import NDArray
from scipy.special import ndtr, ndtri

FAMILIES = ("gaussian", "lognormal", "uniform")

U_CLIP = 8.0


@dataclass(frozen=True)
class DistributionSpec:
    family: str
    mean: float
    std: float

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.std < 0:
            raise ValueError("std must be nonnegative")
        if self.family == "lognormal" and self.mean <= 0:
            raise ValueError("lognormal mean must be positive")

    def parameterize(self) -> Tuple[float, float]:
        """Moment-matched internal parameters.

        gaussian -> (mu, sigma); lognormal -> underlying normal
        (mu_l, sigma_l); uniform -> bounds (low, high).
        """
        if self.family == "gaussian":
            return self.mean, self.std
        if self.family == "lognormal":
            m2 = self.mean * self.mean
            sigma_l2 = np.log1p(self.std * self.std / m2)
            mu_l = np.log(m2 / np.sqrt(m2 + self.std * self.std))
            return float(mu_l), float(np.sqrt(sigma_l2))
        half = np.sqrt(3.0) * self.std
        return self.mean - half, self.mean + half

    def from_standard_normal(self, u: NDArray) -> NDArray[np.float64]:
        u = np.asarray(u, dtype=np.float64)
        a, b = self.parameterize()
        if self.family == "gaussian":
            return a + b * u
        if self.family == "lognormal":
            return np.exp(a + b * u)
        return a + (b - a) * ndtr(u)

    def to_standard_normal(self, x: NDArray) -> NDArray[np.float64]:
        x = np.asarray(x, dtype=np.float64)
        a, b = self.parameterize()
        if self.family == "gaussian":
            if b == 0:
                return np.zeros_like(x)
            return (x - a) / b
        if self.family == "lognormal":
            if b == 0:
                return np.zeros_like(x)
            return (np.log(x) - a) / b
        if b == a:
            return np.zeros_like(x)
        p = (x - a) / (b - a)
        if np.any(p <= 0.0) or np.any(p >= 1.0):
            warnings.warn("uniform sample at or outside bounds; "
                          f"normal-space image clipped to +-{U_CLIP}")
        u = ndtri(np.clip(p, 0.0, 1.0))
        return np.clip(u, -U_CLIP, U_CLIP)


@dataclass(frozen=True)
class UncertainSample:
    """One realization of (load magnitude, modulus, Poisson ratio)."""
    load: float
    modulus: float
    poisson: float


@dataclass(frozen=True)
class UncertaintyModel:
    load: DistributionSpec
    modulus: DistributionSpec
    poisson: DistributionSpec

    @property
    def specs(self) -> Tuple[DistributionSpec, ...]:
        return (self.load, self.modulus, self.poisson)

    @property
    def dimension(self) -> int:
        return 3

    def sample_from_u(self, u: NDArray) -> NDArray[np.float64]:
        """Map standard-normal points (n, 3) to physical samples (n, 3).

        The modulus is floored at a tiny positive value and the Poisson
        ratio clamped inside (-1, 0.5) so downstream assembly stays well
        posed even for unbounded spec choices.
        """
        u = np.atleast_2d(np.asarray(u, dtype=np.float64))
        out = np.column_stack([spec.from_standard_normal(u[:, j])
                               for j, spec in enumerate(self.specs)])
        out[:, 1] = np.maximum(out[:, 1], 1e-12 * abs(self.modulus.mean))
        out[:, 2] = np.clip(out[:, 2], -0.99, 0.4999)
        return out

    def to_u(self, x: NDArray) -> NDArray[np.float64]:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return np.column_stack([spec.to_standard_normal(x[:, j])
                                for j, spec in enumerate(self.specs)])

    def draw_arrays(self, rng: np.random.Generator, n: int) -> NDArray[np.float64]:
        if n < 1:
            raise ValueError("need n >= 1 samples")
        return self.sample_from_u(rng.standard_normal((n, self.dimension)))

    def draw(self, rng: np.random.Generator, n: int) -> list:
        return [UncertainSample(*row) for row in self.draw_arrays(rng, n)]


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for a (seed, purpose...) address.

    Counter-based splitting: the key becomes the spawn path of the root
    seed sequence, so streams never depend on draw order elsewhere.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))
