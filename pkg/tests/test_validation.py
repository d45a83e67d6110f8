import math

import numpy as np
import pytest
import scipy.stats as sps

from vbboost import (
    ConjugateGaussianModel,
    FamilyConstraints,
    boundedness_experiment,
    bvm_experiment,
    convergence_experiment,
    convergence_sweep,
    decompose_reference_kl,
    derive_seed,
    gaussian_hellinger,
    gaussian_kl,
    ks_distance,
    ReplicationPlan,
    tv_bounds_from_hellinger,
)


def unit_model(d=1, prior=1.0):
    return ConjugateGaussianModel(
        np.eye(d), np.zeros(d), prior * np.eye(d), np.zeros(d)
    )


# ---------------------------------------------------------------- gaussian forms


def test_gaussian_kl_identity_and_shift():
    assert gaussian_kl(np.zeros(2), np.eye(2), np.zeros(2), np.eye(2)) == pytest.approx(0.0, abs=1e-14)
    # unit-covariance mean shift: ||delta||^2 / 2
    got = gaussian_kl(np.array([1.0, 1.0]), np.eye(2), np.zeros(2), np.eye(2))
    assert got == pytest.approx(1.0, rel=1e-12)


def test_gaussian_kl_full_covariance_oracle():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(2, 2))
    b = rng.normal(size=(2, 2))
    cov2 = a @ a.T + 0.5 * np.eye(2)
    cov1 = b @ b.T + 0.5 * np.eye(2)
    mu2, mu1 = rng.normal(size=2), rng.normal(size=2)
    inv1 = np.linalg.inv(cov1)
    diff = mu1 - mu2
    expected = 0.5 * (
        np.trace(inv1 @ cov2)
        - 2
        + diff @ inv1 @ diff
        + math.log(np.linalg.det(cov1) / np.linalg.det(cov2))
    )
    assert gaussian_kl(mu2, cov2, mu1, cov1) == pytest.approx(expected, rel=1e-10)


def test_gaussian_kl_scalar_covariance_broadcast():
    got = gaussian_kl(np.array([1.0]), 1.0, np.array([0.0]), 1.0)
    assert got == pytest.approx(0.5, rel=1e-14)


def test_gaussian_hellinger_quadrature_oracle():
    mu2, s2, mu1, s1 = 0.4, 0.8, -0.1, 1.2
    xs = np.linspace(-20, 20, 400001)
    bc = np.trapezoid(
        np.sqrt(sps.norm.pdf(xs, mu2, s2) * sps.norm.pdf(xs, mu1, s1)), xs
    )
    expected = math.sqrt(1 - bc)
    got = gaussian_hellinger(
        np.array([mu2]), s2**2, np.array([mu1]), s1**2
    )
    assert got == pytest.approx(expected, rel=1e-8)


def test_tv_sandwich_brackets_true_tv():
    # Eq-style sandwich h^2 <= TV <= sqrt(2) h, checked against numerical TV
    mu2, s2, mu1, s1 = 0.5, 1.0, 0.0, 1.3
    xs = np.linspace(-25, 25, 400001)
    tv = 0.5 * np.trapezoid(
        np.abs(sps.norm.pdf(xs, mu2, s2) - sps.norm.pdf(xs, mu1, s1)), xs
    )
    h = gaussian_hellinger(np.array([mu2]), s2**2, np.array([mu1]), s1**2)
    lo, hi = tv_bounds_from_hellinger(h)
    assert lo == pytest.approx(h**2, rel=1e-12)
    assert hi == pytest.approx(math.sqrt(2) * h, rel=1e-12)
    assert lo <= tv <= hi


# ---------------------------------------------------------------- KS distance


def test_ks_distance_matches_scipy():
    rng = np.random.default_rng(0)
    values = rng.chisquare(df=1, size=400) / 2.0
    cdf = lambda s: sps.chi2.cdf(2.0 * s, df=1)
    expected = sps.kstest(values, cdf).statistic
    assert ks_distance(values, cdf) == pytest.approx(expected, abs=1e-12)


def test_ks_distance_single_point():
    assert ks_distance(np.array([0.5]), lambda x: np.clip(x, 0, 1)) == pytest.approx(0.5)


def test_ks_distance_detects_wrong_law():
    rng = np.random.default_rng(1)
    values = rng.normal(size=500)
    good = ks_distance(values, sps.norm.cdf)
    bad = ks_distance(values, lambda x: sps.norm.cdf(x, loc=1.0))
    assert good < 0.08 < bad


# ---------------------------------------------------------------- plan


def test_plan_accepts_canonical_rule():
    plan = ReplicationPlan(
        model=unit_model(),
        n_grid=(100, 1000),
        replicates=5,
        base_seed=0,
        radius=2.0,
        bandwidth_factor=1.5,
    )
    assert plan.sigma_n(100) == pytest.approx(0.1, rel=1e-12)
    c = plan.constraints_for(100)
    assert isinstance(c, FamilyConstraints)
    assert c.bandwidth == pytest.approx(0.1)
    assert c.radius == 2.0


def test_plan_rejects_rule_leaving_band():
    # sigma_n = n^{-1} pushes n^{-1/2} above sqrt(c0) sigma_n for n > c0
    with pytest.raises(ValueError, match="leaves the bandwidth band at n="):
        ReplicationPlan(
            model=unit_model(),
            n_grid=(100,),
            replicates=2,
            base_seed=0,
            radius=2.0,
            bandwidth_factor=1.5,
            sigma_power=1.0,
        )


def test_plan_rejects_bad_grid():
    with pytest.raises(ValueError):
        ReplicationPlan(
            model=unit_model(), n_grid=(100, 100), replicates=2, base_seed=0,
            radius=1.0, bandwidth_factor=1.5,
        )
    with pytest.raises(ValueError):
        ReplicationPlan(
            model=unit_model(), n_grid=(), replicates=2, base_seed=0,
            radius=1.0, bandwidth_factor=1.5,
        )


# ---------------------------------------------------------------- experiments


def test_boundedness_experiment_structure():
    plan = ReplicationPlan(
        model=unit_model(), n_grid=(50, 200), replicates=30, base_seed=0,
        radius=2.0, bandwidth_factor=1.5,
    )
    rep = boundedness_experiment(plan)
    assert rep.name == "boundedness"
    assert set(rep.stats["reference_kl"]) == {50, 200}
    assert all(len(v) == 30 for v in rep.stats["reference_kl"].values())
    assert np.all(rep.stats["reference_kl"][50] >= 0.0)
    assert "quantile95_ratio" in rep.summaries
    row = rep.raw_rows[0]
    assert row[0] == 50 and row[1] == 0 and row[2] == "reference_kl"
    assert row[4] == derive_seed(0, 50, 0)
    d = rep.to_dict()
    assert "stats" not in d
    assert d["replicates"] == 30


def test_boundedness_parallel_matches_serial():
    plan = ReplicationPlan(
        model=unit_model(), n_grid=(50,), replicates=12, base_seed=3,
        radius=2.0, bandwidth_factor=1.5,
    )
    serial = boundedness_experiment(plan, jobs=1)
    parallel = boundedness_experiment(plan, jobs=2)
    np.testing.assert_array_equal(
        serial.stats["reference_kl"][50], parallel.stats["reference_kl"][50]
    )


def test_bvm_experiment_structure_and_limits():
    rep = bvm_experiment(unit_model(), n=400, replicates=80, base_seed=1)
    s = rep.summaries
    assert 0.0 <= s["ks_distance"] <= 1.0
    assert s["kl_mean_median"] < s["kl_truth_median"]
    assert s["tv_median_lower"] == pytest.approx(s["hellinger_mean_median"] ** 2, rel=1e-12)
    assert s["tv_median_upper"] == pytest.approx(
        math.sqrt(2) * s["hellinger_mean_median"], rel=1e-12
    )
    names = {r[2] for r in rep.raw_rows}
    assert names == {
        "kl_truth_centered", "kl_mean_centered",
        "hellinger_truth_centered", "hellinger_mean_centered",
    }


# ---------------------------------------------------------------- decomposition


def test_decompose_constant_term_frozen():
    # at sigma_n = 1 the entropy term is -(log sqrt(2 pi) + 1/2)
    model = unit_model()
    data = model.simulate(4, seed=0)
    c = FamilyConstraints(radius=2.0, bandwidth=1.0, bandwidth_factor=1.5, dim=1)
    dec = decompose_reference_kl(model, data, c, samples=10_000, seed=0)
    assert dec.entropy_term == pytest.approx(-1.4189385332046727, abs=1e-12)


def test_decompose_sum_matches_direct_kl():
    model = unit_model()
    data = model.simulate(25, seed=7)
    c = FamilyConstraints(radius=2.0, bandwidth=25**-0.5, bandwidth_factor=1.5, dim=1)
    dec = decompose_reference_kl(model, data, c, samples=100_000, seed=1)
    assert dec.samples == 100_000
    assert dec.combined_se > 0.0
    assert abs(dec.gap) <= 3.0 * dec.combined_se
    assert dec.within_noise()
    assert dec.total == pytest.approx(
        dec.entropy_term + dec.log_marginal + dec.loglik_term + dec.prior_term
    )


def test_decompose_loglik_term_closed_form():
    # E_q0[-L_n] = (n sigma_n^2 / 2) tr(Sigma^-1) for the conjugate model
    model = unit_model()
    n = 16
    data = model.simulate(n, seed=2)
    sigma_n = n**-0.5
    c = FamilyConstraints(radius=2.0, bandwidth=sigma_n, bandwidth_factor=1.5, dim=1)
    dec = decompose_reference_kl(model, data, c, samples=200_000, seed=3)
    expected = 0.5 * n * sigma_n**2  # = 1/2 at the canonical rule
    assert abs(dec.loglik_term - expected) <= 3.0 * dec.loglik_se


def test_decompose_log_marginal_is_exact_normalizer():
    model = unit_model()
    data = model.simulate(9, seed=5)
    c = FamilyConstraints(radius=2.0, bandwidth=1 / 3, bandwidth_factor=1.5, dim=1)
    dec = decompose_reference_kl(model, data, c, samples=1000, seed=0)
    assert dec.log_marginal == pytest.approx(model.target(data).log_normalizer, rel=1e-12)


def test_decompose_direct_matches_gaussian_kl():
    model = unit_model()
    n = 9
    data = model.simulate(n, seed=4)
    sigma_n = n**-0.5
    c = FamilyConstraints(radius=2.0, bandwidth=sigma_n, bandwidth_factor=1.5, dim=1)
    dec = decompose_reference_kl(model, data, c, samples=1000, seed=0)
    mean, cov = model.posterior_params(data)
    direct = gaussian_kl(model.truth, sigma_n**2, mean, cov)
    assert dec.direct_kl == pytest.approx(direct, rel=1e-12)


# ---------------------------------------------------------------- convergence


def test_convergence_experiment_schedule_and_summaries():
    model = unit_model(prior=10.0)
    n = 1
    c = FamilyConstraints(
        radius=1.0, bandwidth=(1.5 * n) ** -0.5, bandwidth_factor=1.5, dim=1
    )
    rep = convergence_experiment(model, n, c, base_seed=0, curvature_trials=100)
    s = rep.summaries
    assert s["n"] == 1
    assert s["iterations"] == 3  # ceil(exp(1))
    assert s["final_kl"] >= 0.0
    assert s["reference_kl"] >= 0.0
    assert "max_gap_vs_reference" in s
    assert s["certificate_violations"] == 0
    assert s["empirical_curvature"] > 0.0
    assert len(rep.raw_rows) == 3


def test_convergence_sweep_small():
    model = unit_model(prior=10.0)
    rep = convergence_sweep(model, n_values=(1, 4), base_seed=0)
    s = rep.summaries
    assert s["iterations_by_n"] == {"1": 3, "4": 8}
    assert set(s["final_kl_by_n"]) == {"1", "4"}
    assert s["max_final_kl"] == max(s["final_kl_by_n"].values())
    assert rep.n_grid == (1, 4)
