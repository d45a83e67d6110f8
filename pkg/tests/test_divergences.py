import math

import numpy as np
import pytest

from vbboost import (
    ConjugateGaussianModel,
    Dataset,
    FamilyConstraints,
    GaussianMixture,
    IsotropicGaussian,
    MonteCarloBudget,
    QuadratureBudget,
    ValidityRegionError,
    bregman_divergence,
    chi2_pair_bound,
    convex_update,
    curvature_bound,
    curvature_bound_optimistic,
    kl_between_mixtures,
    kl_gaussian_gaussian,
    kl_to_target,
    sample_curvature,
)


def unit_posterior_target():
    """Posterior N(1, 1): one observation at 2 with variance-2 likelihood and prior."""
    m = ConjugateGaussianModel(2.0 * np.eye(1), np.zeros(1), 2.0 * np.eye(1), np.zeros(1))
    return m.target(Dataset(np.array([[2.0]]), seed=0))


def single(mu, sigma=1.0, d=1):
    return GaussianMixture((IsotropicGaussian(np.full(d, float(mu)), sigma),), [1.0])


def mixture_pair_oracle(m2, m1):
    xs = np.linspace(-30.0, 30.0, 300001)[:, None]
    l2, l1 = m2.log_density(xs), m1.log_density(xs)
    return np.trapezoid(np.exp(l2) * (l2 - l1), xs[:, 0])


# ---------------------------------------------------------------- kl_to_target


def test_kl_to_target_half_nat():
    # KL(N(0,1) || N(1,1)) = 1/2 exactly
    t = unit_posterior_target()
    est = kl_to_target(single(0.0), t, QuadratureBudget())
    assert est.method == "quadrature"
    assert est.std_error == 0.0
    assert est.normalized
    assert est.value == pytest.approx(0.5, abs=1e-7)


def test_kl_to_target_monte_carlo_agrees():
    t = unit_posterior_target()
    est = kl_to_target(single(0.0), t, MonteCarloBudget(200_000, seed=0))
    assert est.method == "monte_carlo"
    assert est.std_error > 0.0
    assert abs(est.value - 0.5) < 4.0 * est.std_error
    again = kl_to_target(single(0.0), t, MonteCarloBudget(200_000, seed=0))
    assert again.value == est.value


def test_kl_to_target_unnormalized_offset():
    m = ConjugateGaussianModel(2.0 * np.eye(1), np.zeros(1), 2.0 * np.eye(1), np.zeros(1))
    data = Dataset(np.array([[2.0]]), seed=0)
    t = m.target(data)
    t_raw = type(t)(log_unnorm=t.log_unnorm, dim=t.dim, log_normalizer=None)
    q = single(0.3)
    a = kl_to_target(q, t, QuadratureBudget())
    b = kl_to_target(q, t_raw, QuadratureBudget())
    assert not t_raw.normalized
    assert not b.normalized
    # dropping the normalizer shifts the estimate by exactly -log Z
    assert b.value - a.value == pytest.approx(-t.log_normalizer, abs=1e-9)


def test_kl_to_target_of_exact_posterior_is_zero():
    m = ConjugateGaussianModel(1.0 * np.eye(1), np.zeros(1), 1.0 * np.eye(1), np.zeros(1))
    data = Dataset(np.array([[2.0]]), seed=0)
    t = m.target(data)
    # posterior is N(1, 1/2); a mixture equal to it has zero divergence
    q = single(1.0, math.sqrt(0.5))
    est = kl_to_target(q, t, QuadratureBudget())
    assert est.value == pytest.approx(0.0, abs=1e-9)


# ---------------------------------------------------------------- mixtures


def test_kl_between_mixtures_matches_oracle():
    m2 = GaussianMixture(
        (IsotropicGaussian([0.2], 0.9), IsotropicGaussian([-1.0], 1.4)), [0.6, 0.4]
    )
    m1 = GaussianMixture(
        (IsotropicGaussian([0.0], 1.0), IsotropicGaussian([1.5], 0.8)), [0.5, 0.5]
    )
    est = kl_between_mixtures(m2, m1, QuadratureBudget())
    assert est.value == pytest.approx(mixture_pair_oracle(m2, m1), abs=1e-7)


def test_kl_between_identical_mixtures_is_zero():
    m = GaussianMixture(
        (IsotropicGaussian([0.0], 1.0), IsotropicGaussian([2.0], 1.1)), [0.7, 0.3]
    )
    est = kl_between_mixtures(m, m, QuadratureBudget())
    assert est.value == pytest.approx(0.0, abs=1e-10)


def test_kl_between_single_components_matches_closed_form():
    g2, g1 = IsotropicGaussian([0.4], 0.8), IsotropicGaussian([0.0], 1.2)
    est = kl_between_mixtures(
        GaussianMixture((g2,), [1.0]), GaussianMixture((g1,), [1.0]), QuadratureBudget()
    )
    assert est.value == pytest.approx(kl_gaussian_gaussian(g2, g1), abs=1e-8)


# ---------------------------------------------------------------- bregman


def test_bregman_equals_kl_quadrature():
    t = unit_posterior_target()
    psi1 = GaussianMixture(
        (IsotropicGaussian([0.0], 1.0), IsotropicGaussian([1.0], 1.2)), [0.5, 0.5]
    )
    phi = IsotropicGaussian([0.5], 0.9)
    psi2 = convex_update(psi1, phi, 0.35)
    breg = bregman_divergence(psi2, psi1, t, QuadratureBudget())
    direct = kl_between_mixtures(psi2, psi1, QuadratureBudget())
    assert breg.value == pytest.approx(direct.value, abs=1e-6)


def test_bregman_equals_kl_random_pairs():
    rng = np.random.default_rng(11)
    t = unit_posterior_target()
    for _ in range(10):
        comps = tuple(
            IsotropicGaussian([rng.uniform(-2, 2)], rng.uniform(0.6, 1.6))
            for _ in range(int(rng.integers(1, 4)))
        )
        w = rng.dirichlet(np.ones(len(comps)))
        psi1 = GaussianMixture(comps, w)
        phi = IsotropicGaussian([rng.uniform(-2, 2)], rng.uniform(0.6, 1.6))
        psi2 = convex_update(psi1, phi, float(rng.uniform(0.05, 0.95)))
        breg = bregman_divergence(psi2, psi1, t, QuadratureBudget())
        direct = kl_between_mixtures(psi2, psi1, QuadratureBudget())
        assert breg.value == pytest.approx(direct.value, abs=1e-5)


def test_bregman_monte_carlo_within_noise():
    t = unit_posterior_target()
    psi1 = single(0.0)
    psi2 = convex_update(psi1, IsotropicGaussian([0.8], 1.1), 0.4)
    mc = bregman_divergence(psi2, psi1, t, MonteCarloBudget(100_000, seed=3))
    quad = kl_between_mixtures(psi2, psi1, QuadratureBudget())
    assert mc.std_error > 0.0
    assert abs(mc.value - quad.value) < 4.0 * mc.std_error


# ---------------------------------------------------------------- pair bound


def test_chi2_pair_bound_frozen_symmetric_case():
    phi = IsotropicGaussian([0.0], 1.0)
    m = GaussianMixture(
        (IsotropicGaussian([0.5], 1.0), IsotropicGaussian([-0.5], 1.0)), [0.5, 0.5]
    )
    # unit variances: each direction costs e^{0.25} - 1
    expected = 2.0 * (math.exp(0.25) - 1.0)
    assert chi2_pair_bound(phi, m) == pytest.approx(expected, rel=1e-12)


def test_chi2_pair_bound_skips_zero_weights():
    phi = IsotropicGaussian([0.0], 1.0)
    # the zero-weight component sits outside the validity region and must not raise
    m = GaussianMixture(
        (IsotropicGaussian([0.0], 1.0), IsotropicGaussian([0.0], 2.0)), [1.0, 0.0]
    )
    assert chi2_pair_bound(phi, m) == pytest.approx(0.0, abs=1e-12)


def test_chi2_pair_bound_propagates_validity_error():
    phi = IsotropicGaussian([0.0], 1.0)
    m = GaussianMixture((IsotropicGaussian([0.0], 2.0),), [1.0])
    with pytest.raises(ValidityRegionError):
        chi2_pair_bound(phi, m)


# ---------------------------------------------------------------- bounds


def constraints(M=1.0, c0=1.5, d=2, sigma_n=1.0):
    return FamilyConstraints(radius=M, bandwidth=sigma_n, bandwidth_factor=c0, dim=d)


def test_curvature_bound_optimistic_frozen():
    # 2 (2-c0)^{-d/2} exp(2M^2/((2-c0) sigma_n)) = 4 e^4 at these parameters
    c = constraints(M=1.0, c0=1.5, d=2, sigma_n=1.0)
    assert curvature_bound_optimistic(c) == pytest.approx(4.0 * math.exp(4.0), rel=1e-12)
    assert curvature_bound_optimistic(c) == pytest.approx(218.3926001, rel=1e-9)


def test_curvature_bound_frozen():
    # 2 c0^d (2-c0)^{-d/2} exp(4M^2/((2-c0) sigma_n^2)) = 9 e^8 at these parameters
    c = constraints(M=1.0, c0=1.5, d=2, sigma_n=1.0)
    assert curvature_bound(c) == pytest.approx(9.0 * math.exp(8.0), rel=1e-12)


def test_curvature_bounds_zero_radius():
    c = constraints(M=0.0, c0=1.5, d=2, sigma_n=1.0)
    assert curvature_bound(c) == pytest.approx(2.0 * 1.5**2 / 0.5, rel=1e-12)
    assert curvature_bound_optimistic(c) == pytest.approx(2.0 / 0.5, rel=1e-12)


def test_curvature_bound_explodes_near_band_limit():
    vals = [curvature_bound(constraints(c0=c0, d=1)) for c0 in (1.3, 1.6, 1.9, 1.99)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    # far enough out the bound saturates to inf rather than raising
    tight = FamilyConstraints(radius=3.0, bandwidth=0.01, bandwidth_factor=1.999, dim=2)
    assert curvature_bound(tight) == math.inf


def test_curvature_bound_dominates_pair_bound_randomly():
    rng = np.random.default_rng(23)
    c = constraints(M=0.5, c0=1.5, d=1, sigma_n=0.3)
    bound = curvature_bound(c)
    for _ in range(50):
        k = int(rng.integers(1, 4))
        comps, raw = [], rng.uniform(0.2, 1.0, size=k)
        for _ in range(k):
            mu = rng.uniform(-1, 1, size=1)
            mu = mu / max(1.0, np.linalg.norm(mu) / c.radius)
            comps.append(IsotropicGaussian(mu, rng.uniform(c.sigma_lo, c.sigma_hi)))
        m = GaussianMixture(tuple(comps), raw / raw.sum())
        phi_mu = rng.uniform(-c.radius, c.radius, size=1)
        phi = IsotropicGaussian(phi_mu, rng.uniform(c.sigma_lo, c.sigma_hi))
        assert chi2_pair_bound(phi, m) <= bound


# ---------------------------------------------------------------- curvature sampling


def test_sample_curvature_chain_and_records():
    c = constraints(M=0.5, c0=1.5, d=1, sigma_n=0.1)
    rep = sample_curvature(c, trials=200, seed=0)
    assert rep.records.shape == (200, 3)
    alphas, scaled, pair = rep.records.T
    assert np.all((alphas > 0) & (alphas <= 1))
    assert np.all(scaled <= pair * (1 + 1e-9) + 1e-12)
    assert np.all(pair <= rep.bound)
    assert rep.empirical_sup == pytest.approx(scaled.max())
    assert rep.empirical_sup <= rep.bound
    assert rep.trials == 200


def test_sample_curvature_deterministic():
    c = constraints(M=0.5, c0=1.5, d=1, sigma_n=0.1)
    a = sample_curvature(c, trials=50, seed=9)
    b = sample_curvature(c, trials=50, seed=9)
    np.testing.assert_array_equal(a.records, b.records)
    assert a.witness[2] == b.witness[2]


def test_sample_curvature_taylor_plateau():
    # (2/alpha^2) KL(psi1 + alpha(phi - psi1) || psi1) stabilizes as alpha -> 0,
    # the quadratic Taylor structure of KL along mixture segments
    psi1 = single(0.1, 0.12)
    phi = IsotropicGaussian([0.05], 0.13)
    vals = []
    for alpha in (0.1, 0.01, 0.001):
        psi2 = convex_update(psi1, phi, alpha)
        kl = kl_between_mixtures(psi2, psi1, QuadratureBudget()).value
        vals.append(2.0 * kl / alpha**2)
    assert vals[1] == pytest.approx(vals[2], rel=0.05)
    assert vals[0] == pytest.approx(vals[2], rel=0.5)


def test_sample_curvature_rejects_high_dim():
    c = FamilyConstraints(radius=1.0, bandwidth=0.5, bandwidth_factor=1.5, dim=3)
    with pytest.raises(ValueError):
        sample_curvature(c, trials=5, seed=0)


def test_curvature_report_dict():
    c = constraints(M=0.5, c0=1.5, d=1, sigma_n=0.1)
    rep = sample_curvature(c, trials=20, seed=1)
    d = rep.to_dict()
    assert d["trials"] == 20
    assert d["empirical_sup"] <= d["bound"]
    assert "witness" in d and "alpha" in d["witness"]
    assert set(d["scaled_kl_quantiles"]) == {"50", "95", "99"}
