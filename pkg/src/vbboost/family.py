"""Isotropic Gaussians, finite mixtures, and the constrained component family.

Components are N(mu, sigma^2 I_d) with the mean confined to a Euclidean ball
and the standard deviation to a narrow band; mixtures carry simplex weights
over such components. Closed-form divergences between single components live
here as well. Everything is a plain immutable value, safe to share across
workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

# Relative slack for membership tests: projected optimizer outputs sit on the
# constraint boundary up to rounding, and must still count as members.
MEMBERSHIP_SLACK = 1e-12

_LOG_2PI = math.log(2.0 * math.pi)


class ValidityRegionError(ValueError):
    """Raised when a divergence is requested outside its finiteness region."""


def _as_seeded_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


class IsotropicGaussian:
    """One mixture component: N(mean, sigma^2 I_d).

    Args:
        mean: length-d location vector (parameter-space units).
        sigma: positive standard deviation shared by all coordinates.
    """

    __slots__ = ("mean", "sigma")

    def __init__(self, mean, sigma: float):
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        if mean.ndim != 1:
            raise ValueError(f"mean must be a vector, got shape {mean.shape}")
        if not np.all(np.isfinite(mean)):
            raise ValueError("mean must be finite")
        sigma = float(sigma)
        if not (sigma > 0.0 and math.isfinite(sigma)):
            raise ValueError(f"sigma must be a positive finite real, got {sigma}")
        mean.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "sigma", sigma)

    def __setattr__(self, name, value):
        raise AttributeError("IsotropicGaussian is immutable")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def log_density(self, theta) -> np.ndarray:
        """Log density at theta; accepts shape (d,) or (..., d)."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape[-1] != self.dim:
            raise ValueError(
                f"theta has dimension {theta.shape[-1]}, component has {self.dim}"
            )
        sq = np.sum((theta - self.mean) ** 2, axis=-1)
        return -0.5 * self.dim * (_LOG_2PI + 2.0 * math.log(self.sigma)) - sq / (
            2.0 * self.sigma**2
        )

    def sample(self, count: int, seed) -> np.ndarray:
        """Deterministic (count, d) draws for a given seed."""
        if count < 1:
            raise ValueError("count must be >= 1")
        rng = _as_seeded_rng(seed)
        return self.mean + self.sigma * rng.standard_normal((count, self.dim))

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "sigma": self.sigma}

    @classmethod
    def from_dict(cls, payload: dict) -> "IsotropicGaussian":
        return cls(payload["mean"], payload["sigma"])

    def __repr__(self) -> str:
        return f"IsotropicGaussian(mean={self.mean.tolist()}, sigma={self.sigma})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, IsotropicGaussian):
            return NotImplemented
        return self.sigma == other.sigma and np.array_equal(self.mean, other.mean)

    def __hash__(self):
        return hash((self.mean.tobytes(), self.sigma))


class GaussianMixture:
    """Finite mixture of isotropic Gaussians with simplex weights.

    Args:
        components: ordered components, all of the same dimension.
        weights: nonnegative weights summing to 1 within 1e-12.
    """

    __slots__ = ("components", "weights", "_mean_mat", "_sigma_vec")

    def __init__(self, components, weights):
        components = tuple(components)
        if not components:
            raise ValueError("a mixture needs at least one component")
        dim = components[0].dim
        for g in components:
            if not isinstance(g, IsotropicGaussian):
                raise TypeError("components must be IsotropicGaussian values")
            if g.dim != dim:
                raise ValueError("mixture components must share a dimension")
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (len(components),):
            raise ValueError("one weight per component required")
        if np.any(weights < 0.0) or not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite and nonnegative")
        if abs(float(weights.sum()) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1 within 1e-12, got {weights.sum()!r}")
        weights = weights.copy()
        weights.setflags(write=False)
        object.__setattr__(self, "components", components)
        object.__setattr__(self, "weights", weights)
        # Stacked parameter caches keep log_density a fixed number of numpy
        # calls regardless of K; the boosting loop leans on this.
        object.__setattr__(
            self, "_mean_mat", np.stack([g.mean for g in components])
        )
        object.__setattr__(
            self, "_sigma_vec", np.array([g.sigma for g in components])
        )

    def __setattr__(self, name, value):
        raise AttributeError("GaussianMixture is immutable")

    @property
    def dim(self) -> int:
        return self.components[0].dim

    @property
    def n_components(self) -> int:
        return len(self.components)

    def component_log_densities(self, theta) -> np.ndarray:
        """Stack of per-component log densities, shape (K, ...)."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape[-1] != self.dim:
            raise ValueError(
                f"theta has dimension {theta.shape[-1]}, mixture has {self.dim}"
            )
        diff = theta[..., None, :] - self._mean_mat  # (..., K, d)
        sq = np.sum(diff * diff, axis=-1)
        const = -0.5 * self.dim * (_LOG_2PI + 2.0 * np.log(self._sigma_vec))
        out = const - sq / (2.0 * self._sigma_vec**2)  # (..., K)
        return np.moveaxis(out, -1, 0)

    def log_density(self, theta) -> np.ndarray:
        """log sum_j w_j phi_j(theta), evaluated entirely in the log domain.

        Stable down to component log densities of -1e6 and below: the
        log-sum-exp shift never exponentiates anything above 0.
        """
        comp = self.component_log_densities(theta)
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        return logsumexp(comp + logw.reshape((-1,) + (1,) * (comp.ndim - 1)), axis=0)

    def sample(self, count: int, seed) -> np.ndarray:
        """Draw a component index from the weights, then a Gaussian draw."""
        if count < 1:
            raise ValueError("count must be >= 1")
        rng = _as_seeded_rng(seed)
        idx = rng.choice(self.n_components, size=count, p=self.weights)
        means = self._mean_mat[idx]
        sigmas = self._sigma_vec[idx]
        return means + sigmas[:, None] * rng.standard_normal((count, self.dim))

    def to_dict(self) -> dict:
        return {
            "components": [g.to_dict() for g in self.components],
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "GaussianMixture":
        comps = [IsotropicGaussian.from_dict(c) for c in payload["components"]]
        return cls(comps, payload["weights"])

    def __repr__(self) -> str:
        return f"GaussianMixture(k={self.n_components}, dim={self.dim})"


@dataclass(frozen=True)
class FamilyConstraints:
    """Feasible set for components: ||mean|| <= radius, sigma in a narrow band.

    Attributes:
        radius: mean-ball radius (>= 0; zero pins every mean at the origin).
        bandwidth: lower bound on component sigma (> 0).
        bandwidth_factor: variance headroom; sigma may grow to
            sqrt(bandwidth_factor) * bandwidth. Must lie strictly in (1, 2).
        dim: parameter dimension (>= 1).
    """

    radius: float
    bandwidth: float
    bandwidth_factor: float
    dim: int

    def __post_init__(self):
        if not self.radius >= 0.0:
            raise ValueError(f"radius must be nonnegative, got {self.radius}")
        if not self.bandwidth > 0.0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if not 1.0 < self.bandwidth_factor < 2.0:
            raise ValueError(
                f"bandwidth_factor must lie in (1, 2), got {self.bandwidth_factor}"
            )
        if not (int(self.dim) == self.dim and self.dim >= 1):
            raise ValueError(f"dim must be a positive integer, got {self.dim}")

    @property
    def sigma_lo(self) -> float:
        return self.bandwidth

    @property
    def sigma_hi(self) -> float:
        return math.sqrt(self.bandwidth_factor) * self.bandwidth

    def contains(self, g: IsotropicGaussian) -> bool:
        """Membership with 1e-12 relative slack to absorb projection rounding."""
        if g.dim != self.dim:
            return False
        slack = MEMBERSHIP_SLACK
        if float(np.linalg.norm(g.mean)) > self.radius * (1.0 + slack):
            return False
        if g.sigma < self.sigma_lo * (1.0 - slack):
            return False
        if g.sigma > self.sigma_hi * (1.0 + slack):
            return False
        return True

    def contains_mixture(self, m: GaussianMixture) -> bool:
        return all(self.contains(g) for g in m.components)

    def project(self, mean, sigma: float) -> tuple[np.ndarray, float]:
        """Nearest feasible (mean, sigma): radial mean scaling, sigma clamp."""
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        norm = float(np.linalg.norm(mean))
        if norm > self.radius:
            mean = mean * (self.radius / norm)
        sigma = float(np.clip(sigma, self.sigma_lo, self.sigma_hi))
        return mean, sigma


def kl_gaussian_gaussian(g2: IsotropicGaussian, g1: IsotropicGaussian) -> float:
    """KL(g2 || g1) between isotropic Gaussians, in nats.

    Closed form: (1/2)[d s2/s1 - d + d ln(s1/s2) + ||mu1-mu2||^2/s1], writing
    s_i for sigma_i^2.
    """
    _require_same_dim(g2, g1)
    d = g1.dim
    r = (g2.sigma / g1.sigma) ** 2
    sq = float(np.sum((g1.mean - g2.mean) ** 2))
    return 0.5 * (d * r - d - d * math.log(r) + sq / g1.sigma**2)


def chi2_gaussian_gaussian(g2: IsotropicGaussian, g1: IsotropicGaussian) -> float:
    """Chi-square divergence of g2 from g1: integral of g2^2/g1, minus 1.

    Finite only on the validity region 2 sigma1^2 > sigma2^2; outside it the
    integral diverges and ValidityRegionError is raised. Evaluated through
    expm1 of the log form so near-identical components return ~0 without
    cancellation, and extreme separations overflow cleanly to inf.
    """
    _require_same_dim(g2, g1)
    v1 = g1.sigma**2
    v2 = g2.sigma**2
    gap = 2.0 * v1 - v2
    if gap <= 0.0:
        raise ValidityRegionError(
            f"chi-square requires 2*sigma1^2 > sigma2^2; got sigma1={g1.sigma}, "
            f"sigma2={g2.sigma}"
        )
    sq = float(np.sum((g2.mean - g1.mean) ** 2))
    log1p_chi2 = g1.dim * (math.log(v1) - 0.5 * math.log(v2 * gap)) + sq / gap
    with np.errstate(over="ignore"):
        # round-off in the log form can land a hair below zero
        return max(0.0, float(np.expm1(log1p_chi2)))


def hellinger_gaussian(g2: IsotropicGaussian, g1: IsotropicGaussian) -> float:
    """Hellinger distance sqrt(1 - BC), BC the Bhattacharyya coefficient."""
    _require_same_dim(g2, g1)
    v1 = g1.sigma**2
    v2 = g2.sigma**2
    sq = float(np.sum((g1.mean - g2.mean) ** 2))
    log_bc = 0.5 * g1.dim * math.log(g1.sigma * g2.sigma / (0.5 * (v1 + v2))) - sq / (
        4.0 * (v1 + v2)
    )
    # 1 - BC can lose all digits for near-identical pairs; expm1 keeps them.
    return math.sqrt(max(0.0, -math.expm1(log_bc)))


def convex_update(
    m: GaussianMixture, g: IsotropicGaussian, gamma: float
) -> GaussianMixture:
    """(1 - gamma) * m + gamma * g as a new mixture.

    gamma = 0 returns m unchanged; gamma = 1 returns the single-component
    mixture {g} (the greedy step that replaces the initializer). The weight
    simplex is renormalized so the 1e-12 invariant never drifts.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    if g.dim != m.dim:
        raise ValueError("component dimension does not match the mixture")
    if gamma == 0.0:
        return m
    if gamma == 1.0:
        return GaussianMixture((g,), np.array([1.0]))
    weights = np.append((1.0 - gamma) * m.weights, gamma)
    weights /= weights.sum()
    return GaussianMixture(m.components + (g,), weights)


def _require_same_dim(g2: IsotropicGaussian, g1: IsotropicGaussian) -> None:
    if g2.dim != g1.dim:
        raise ValueError(f"dimension mismatch: {g2.dim} vs {g1.dim}")
