"""Synthetic models and posterior targets.

The workhorse is the Gaussian location model with a Gaussian prior, whose
posterior is available in closed form and therefore anchors every exactness
check in the validation harness. A generic unnormalized log-posterior contract
(PosteriorTarget) decouples the boosting loop from any particular model, and
an exponential-family audit verifies the smoothness/convexity conditions the
theory asks of a model before the guarantees apply.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .family import FamilyConstraints, IsotropicGaussian

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Dataset:
    """Simulated observations plus the seed that produced them."""

    points: np.ndarray  # (n, p), finite
    seed: int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("points must be a nonempty (n, p) matrix")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def p(self) -> int:
        return self.points.shape[1]

    @property
    def mean(self) -> np.ndarray:
        return self.points.mean(axis=0)


def save_dataset(data: Dataset, path, model_label: str = "") -> None:
    """CSV of observations (one row each) plus a JSON sidecar of provenance."""
    path = str(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(data.p)])
        for row in data.points:
            writer.writerow([repr(float(v)) for v in row])
    sidecar = {"n": data.n, "p": data.p, "seed": data.seed, "model": model_label}
    with open(path + ".json", "w") as fh:
        json.dump(sidecar, fh, sort_keys=True, indent=2)
        fh.write("\n")


@dataclass(frozen=True)
class PosteriorTarget:
    """Unnormalized log-posterior contract.

    Attributes:
        log_unnorm: vectorized map from theta (shape (..., d)) to the log
            posterior density up to an additive constant.
        dim: parameter dimension d.
        log_normalizer: exact log of the normalizing constant of log_unnorm
            when known (conjugate models), else None.
    """

    log_unnorm: Callable[[np.ndarray], np.ndarray]
    dim: int
    log_normalizer: Optional[float] = None

    def log_target(self, theta) -> np.ndarray:
        """Normalized log density when the normalizer is known, else unnorm."""
        value = self.log_unnorm(np.asarray(theta, dtype=float))
        if self.log_normalizer is not None:
            value = value - self.log_normalizer
        return value

    @property
    def normalized(self) -> bool:
        return self.log_normalizer is not None


def _as_spd_matrix(m, dim_hint: int | None = None, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim == 0:
        d = dim_hint or 1
        m = float(m) * np.eye(d)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    if not np.allclose(m, m.T, rtol=1e-10, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    # Cholesky doubles as the positive-definiteness check.
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"{name} must be positive definite") from exc
    return m


class ConjugateGaussianModel:
    """Gaussian observations with a Gaussian prior on the location.

    Observations are X_i ~ N(theta, likelihood_cov) i.i.d., with prior
    theta ~ N(prior_mean, prior_cov) and data generated at the true value
    `truth`. The posterior is Gaussian with

        post_cov  = (n * likelihood_cov^-1 + prior_cov^-1)^-1
        post_mean = post_cov (n * likelihood_cov^-1 xbar + prior_cov^-1 mu0)

    Args:
        likelihood_cov: d x d SPD matrix (scalars accepted for d inferred
            from prior_mean).
        prior_mean: length-d prior location.
        prior_cov: d x d SPD prior covariance (scalar accepted).
        truth: length-d generating value.
    """

    def __init__(self, likelihood_cov, prior_mean, prior_cov, truth):
        prior_mean = np.atleast_1d(np.asarray(prior_mean, dtype=float))
        truth = np.atleast_1d(np.asarray(truth, dtype=float))
        d = prior_mean.shape[0]
        if truth.shape != (d,):
            raise ValueError("truth and prior_mean must have the same length")
        self.likelihood_cov = _as_spd_matrix(likelihood_cov, d, "likelihood_cov")
        self.prior_cov = _as_spd_matrix(prior_cov, d, "prior_cov")
        if self.likelihood_cov.shape != (d, d) or self.prior_cov.shape != (d, d):
            raise ValueError("covariance dimensions do not match prior_mean")
        self.prior_mean = prior_mean
        self.truth = truth
        self._lik_prec = np.linalg.inv(self.likelihood_cov)
        self._prior_prec = np.linalg.inv(self.prior_cov)
        self._lik_chol = np.linalg.cholesky(self.likelihood_cov)

    @property
    def dim(self) -> int:
        return self.prior_mean.shape[0]

    def simulate(self, n: int, seed: int) -> Dataset:
        """n i.i.d. draws at the true parameter; deterministic given seed."""
        if n < 1:
            raise ValueError("n must be >= 1")
        rng = np.random.default_rng(seed)
        z = rng.standard_normal((n, self.dim))
        return Dataset(points=self.truth + z @ self._lik_chol.T, seed=int(seed))

    def posterior_params(
        self, data: Dataset, simple_mean: bool = False
    ) -> tuple[np.ndarray, np.ndarray]:
        """Exact posterior mean and covariance.

        simple_mean swaps in the shortcut mean (n*xbar + mu0)/(n + 1), which
        agrees with the general update only when prior_cov equals
        likelihood_cov; it exists to reproduce analyses written in that
        special case. The covariance always uses the general formula.
        """
        if data.p != self.dim:
            raise ValueError("data dimension does not match the model")
        n = data.n
        xbar = data.mean
        post_prec = n * self._lik_prec + self._prior_prec
        post_cov = np.linalg.inv(post_prec)
        if simple_mean:
            post_mean = (n * xbar + self.prior_mean) / (n + 1.0)
        else:
            post_mean = post_cov @ (
                n * self._lik_prec @ xbar + self._prior_prec @ self.prior_mean
            )
        post_cov = 0.5 * (post_cov + post_cov.T)
        return post_mean, post_cov

    def loglik_ratio(self, data: Dataset, theta) -> np.ndarray:
        """Sum of log likelihood ratios against the true parameter.

        Vectorized in theta (shape (..., d)); linear plus quadratic in theta,
        so it stays finite everywhere and never touches the raw likelihood
        product.
        """
        theta = np.asarray(theta, dtype=float)
        n = data.n
        p_xbar = self._lik_prec @ data.mean
        lin = n * ((theta - self.truth) @ p_xbar)
        quad_theta = np.einsum("...i,ij,...j->...", theta, self._lik_prec, theta)
        quad_truth = float(self.truth @ self._lik_prec @ self.truth)
        return lin - 0.5 * n * (quad_theta - quad_truth)

    def prior_log_density(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        diff = theta - self.prior_mean
        quad = np.einsum("...i,ij,...j->...", diff, self._prior_prec, diff)
        _, logdet = np.linalg.slogdet(self.prior_cov)
        return -0.5 * (self.dim * _LOG_2PI + logdet + quad)

    def prior_energy(self, theta) -> np.ndarray:
        """Negative prior log density."""
        return -self.prior_log_density(theta)

    def target(self, data: Dataset, simple_mean: bool = False) -> PosteriorTarget:
        """Posterior as a PosteriorTarget with its exact normalizer.

        log_unnorm is the likelihood-ratio form (ratio against the truth)
        plus the prior log density; it differs from the textbook likelihood
        product form by a theta-free constant, which is exactly the freedom
        the PosteriorTarget contract grants. The normalizer is computed in
        closed form from the Gaussian posterior parameters.
        """
        post_mean, post_cov = self.posterior_params(data, simple_mean=simple_mean)

        def log_unnorm(theta: np.ndarray) -> np.ndarray:
            return self.loglik_ratio(data, theta) + self.prior_log_density(theta)

        _, logdet = np.linalg.slogdet(post_cov)
        log_norm = float(log_unnorm(post_mean)) + 0.5 * (self.dim * _LOG_2PI + logdet)
        return PosteriorTarget(
            log_unnorm=log_unnorm, dim=self.dim, log_normalizer=log_norm
        )


def reference_component(
    constraints: FamilyConstraints, truth
) -> IsotropicGaussian:
    """The canonical feasible component: centered at the truth, sigma at the
    bandwidth floor. The truth must lie inside the mean ball."""
    truth = np.atleast_1d(np.asarray(truth, dtype=float))
    norm = float(np.linalg.norm(truth))
    if norm > constraints.radius:
        raise ValueError(
            f"truth norm {norm} exceeds the mean-ball radius {constraints.radius}"
        )
    return IsotropicGaussian(truth, constraints.bandwidth)


# ---------------------------------------------------------------------------
# Exponential families and the assumption audit


@dataclass(frozen=True)
class ExponentialFamilyModel:
    """Canonical exponential family f(x; theta) = exp(theta . T(x) - A(theta)) h(x).

    Attributes:
        suff_stats: map from observations (n, p) to statistics (n, K).
        log_partition: A(theta), scalar.
        grad_log_partition: A'(theta), shape (K,).
        hess_log_partition: A''(theta), shape (K, K).
        sampler: (count, theta, rng) -> (count, p) draws from f(.; theta).
        prior_log_density: log prior on theta, vectorized over (..., K).
        theta0: true canonical parameter, shape (K,).
    """

    suff_stats: Callable[[np.ndarray], np.ndarray]
    log_partition: Callable[[np.ndarray], float]
    grad_log_partition: Callable[[np.ndarray], np.ndarray]
    hess_log_partition: Callable[[np.ndarray], np.ndarray]
    sampler: Callable[[int, np.ndarray, np.random.Generator], np.ndarray]
    prior_log_density: Callable[[np.ndarray], np.ndarray]
    theta0: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        theta0 = np.atleast_1d(np.asarray(self.theta0, dtype=float))
        object.__setattr__(self, "theta0", theta0)

    @property
    def dim(self) -> int:
        return self.theta0.shape[0]

    def kl_from_truth(self, theta) -> float:
        """KL(truth || theta): the Bregman divergence of the log partition."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        a1 = np.atleast_1d(self.grad_log_partition(self.theta0))
        return float(
            self.log_partition(theta)
            - self.log_partition(self.theta0)
            - (theta - self.theta0) @ a1
        )

    def second_moment_from_truth(self, theta) -> float:
        """E[(log ratio)^2] under the truth, in closed form."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        diff = theta - self.theta0
        a2 = np.atleast_2d(self.hess_log_partition(self.theta0))
        return float(diff @ a2 @ diff + self.kl_from_truth(theta) ** 2)


def gaussian_mean_family(dim: int = 1, truth=0.0) -> ExponentialFamilyModel:
    """N(theta, I) location family: T(x) = x, A(theta) = ||theta||^2 / 2."""
    truth = np.broadcast_to(np.atleast_1d(np.asarray(truth, dtype=float)), (dim,))
    return ExponentialFamilyModel(
        suff_stats=lambda x: np.asarray(x, dtype=float),
        log_partition=lambda th: 0.5 * float(np.sum(np.asarray(th) ** 2)),
        grad_log_partition=lambda th: np.asarray(th, dtype=float),
        hess_log_partition=lambda th: np.eye(dim),
        sampler=lambda count, th, rng: th + rng.standard_normal((count, dim)),
        prior_log_density=lambda th: -0.5
        * (np.sum(np.asarray(th) ** 2, axis=-1) + dim * _LOG_2PI),
        theta0=truth,
    )


def bernoulli_family(truth: float = 0.0) -> ExponentialFamilyModel:
    """Bernoulli in canonical form: T(x) = x, A(theta) = log(1 + e^theta)."""

    def _scalar(th) -> float:
        return float(np.asarray(th).reshape(()))

    def _sigmoid(t: float) -> float:
        return float(1.0 / (1.0 + np.exp(-t)))

    def sampler(count, th, rng):
        return (rng.random((count, 1)) < _sigmoid(_scalar(th))).astype(float)

    def hess(th):
        s = _sigmoid(_scalar(th))
        return np.array([[s * (1.0 - s)]])

    return ExponentialFamilyModel(
        suff_stats=lambda x: np.asarray(x, dtype=float),
        log_partition=lambda th: float(np.logaddexp(0.0, _scalar(th))),
        grad_log_partition=lambda th: np.array([_sigmoid(_scalar(th))]),
        hess_log_partition=hess,
        sampler=sampler,
        prior_log_density=lambda th: -0.5
        * (np.sum(np.asarray(th) ** 2, axis=-1) + _LOG_2PI),
        theta0=np.atleast_1d(float(truth)),
    )


@dataclass(frozen=True)
class ExpFamilyAudit:
    """Empirical audit of the regularity conditions on a declared grid.

    All checks are diagnostic: failures are reported, never raised.
    """

    strong_convexity_margin: float
    lipschitz_constants: dict
    kl_identity_max_err: float
    kl_identity_ok: bool
    second_moment_max_sigmas: float
    second_moment_ok: bool
    grid_size: int
    alpha: float

    @property
    def passed(self) -> bool:
        return (
            self.strong_convexity_margin > 0.0
            and self.kl_identity_ok
            and self.second_moment_ok
        )

    def to_dict(self) -> dict:
        return {
            "strong_convexity_margin": self.strong_convexity_margin,
            "lipschitz_constants": dict(self.lipschitz_constants),
            "kl_identity_max_err": self.kl_identity_max_err,
            "kl_identity_ok": self.kl_identity_ok,
            "second_moment_max_sigmas": self.second_moment_max_sigmas,
            "second_moment_ok": self.second_moment_ok,
            "grid_size": self.grid_size,
            "alpha": self.alpha,
            "passed": self.passed,
        }


def _fd_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-5):
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = h
        grad[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return grad


def audit_exponential_family(
    model: ExponentialFamilyModel,
    grid,
    alpha: float = 1.0,
    mc_samples: int = 100_000,
    seed: int = 0,
) -> ExpFamilyAudit:
    """Check the conditions under which the theory's guarantees apply.

    Over the declared compact grid of parameter points this measures:

      * the strong-convexity margin: the minimum eigenvalue of the
        log-partition Hessian across the grid;
      * empirical alpha-Lipschitz constants of the gradient, of
        Hessian(theta) @ theta, of the gradient outer product, and of the
        Hessian itself (vector norms for vectors, spectral norms for
        matrices), maximized over grid pairs;
      * the KL identity: the divergence from the truth computed with a
        finite-difference mean parameter must match the Bregman form built
        from the declared gradient, to 1e-8;
      * the second-moment identity: the closed form against a Monte Carlo
        oracle of E[(log ratio)^2] at the truth, within 3 standard errors.

    Returns an ExpFamilyAudit; nothing raises on a failed check.
    """
    pts = [np.atleast_1d(np.asarray(g, dtype=float)) for g in grid]
    if not pts:
        raise ValueError("grid must be nonempty")
    theta0 = model.theta0

    margin = math.inf
    for th in pts:
        eigs = np.linalg.eigvalsh(np.atleast_2d(model.hess_log_partition(th)))
        margin = min(margin, float(eigs.min()))

    grads = [np.atleast_1d(model.grad_log_partition(th)) for th in pts]
    hesses = [np.atleast_2d(model.hess_log_partition(th)) for th in pts]
    lip = {"grad": 0.0, "hess_theta": 0.0, "grad_outer": 0.0, "hess": 0.0}
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            gap = float(np.linalg.norm(pts[i] - pts[j])) ** alpha
            if gap == 0.0:
                continue
            lip["grad"] = max(
                lip["grad"], float(np.linalg.norm(grads[i] - grads[j])) / gap
            )
            lip["hess_theta"] = max(
                lip["hess_theta"],
                float(np.linalg.norm(hesses[i] @ pts[i] - hesses[j] @ pts[j])) / gap,
            )
            outer_gap = np.outer(grads[i], grads[i]) - np.outer(grads[j], grads[j])
            lip["grad_outer"] = max(
                lip["grad_outer"], float(np.linalg.norm(outer_gap, ord=2)) / gap
            )
            lip["hess"] = max(
                lip["hess"], float(np.linalg.norm(hesses[i] - hesses[j], ord=2)) / gap
            )

    # KL identity: mean parameter from central differences of A vs declared
    # gradient; the two Bregman forms differ by (theta - theta0) . (mismatch).
    nu_fd = _fd_gradient(model.log_partition, theta0)
    nu_decl = np.atleast_1d(model.grad_log_partition(theta0))
    kl_err = 0.0
    for th in pts:
        kl_err = max(kl_err, abs(float((th - theta0) @ (nu_fd - nu_decl))))
    kl_ok = kl_err <= 1e-8

    rng = np.random.default_rng(seed)
    draws = model.sampler(mc_samples, theta0, rng)
    stats = np.asarray(model.suff_stats(draws), dtype=float)
    if stats.ndim == 1:
        stats = stats[:, None]
    a_theta0 = model.log_partition(theta0)
    max_sigmas = 0.0
    for th in pts:
        ratio = stats @ (th - theta0) - (model.log_partition(th) - a_theta0)
        sq = ratio**2
        mc = float(sq.mean())
        se = float(sq.std(ddof=1) / math.sqrt(mc_samples))
        closed = model.second_moment_from_truth(th)
        if se == 0.0:
            sigmas = 0.0 if abs(mc - closed) < 1e-12 else math.inf
        else:
            sigmas = abs(mc - closed) / se
        max_sigmas = max(max_sigmas, sigmas)
    mom_ok = max_sigmas <= 3.0

    return ExpFamilyAudit(
        strong_convexity_margin=margin,
        lipschitz_constants=lip,
        kl_identity_max_err=kl_err,
        kl_identity_ok=kl_ok,
        second_moment_max_sigmas=max_sigmas,
        second_moment_ok=mom_ok,
        grid_size=len(pts),
        alpha=alpha,
    )
