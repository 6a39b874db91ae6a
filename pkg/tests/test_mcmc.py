import warnings

import numpy as np
import pytest
from scipy import stats

from gibbs_tda.utils.diagrams import Ppd
from gibbs_tda.utils.errors import CovarianceFloorWarning, ParameterError, PreconditionError
from gibbs_tda.utils.gibbs_model import GibbsModel, neighborhood
from gibbs_tda.utils.mcmc import (
    ChainState,
    McmcConfig,
    ProposalDistribution,
    acceptance_prob,
    burn_in_curve,
    conditional_energy,
    mcmc_sweep,
    propose,
    read_replica_set,
    replicate,
    run_chain,
    suggest_burn_in,
    write_replica_set,
)


def free_model(theta_H=2.0, theta_V=3.0, xbar1=0.0, K=1):
    return GibbsModel(theta_H, theta_V, (0.0,) * K, delta=0.1, xbar1=xbar1, K=K)


def test_config_counts():
    config = McmcConfig(burn_in=0, n_b=500, n_r=10, n_R=100)
    assert config.M == 1000
    assert config.label() == "(500,10,100)"
    with pytest.raises(ParameterError):
        McmcConfig(n_r=0).validate()


def test_proposal_mean_of_symmetric_ppd():
    ppd = Ppd(np.array([[-1.0, 0.5], [1.0, 0.5], [-2.0, 1.0], [2.0, 1.0]]))
    _, log_q = propose(ppd, np.random.default_rng(0))
    assert ProposalDistribution.from_points(ppd.points).mean[0] == 0.0
    assert np.isfinite(log_q([0.0, 0.7]))


def test_proposal_needs_two_points():
    with pytest.raises(PreconditionError):
        propose(Ppd(np.array([[0.0, 1.0]])), np.random.default_rng(0))


def test_proposal_draws_match_truncated_moments():
    mean = np.array([0.2, 0.3])
    cov = np.array([[0.5, 0.1], [0.1, 0.4]])
    proposal = ProposalDistribution(mean, cov)
    rng = np.random.default_rng(1)
    draws = np.array([proposal.sample(rng) for _ in range(100_000)])
    assert np.all(draws[:, 1] > 0)

    s22 = np.sqrt(cov[1, 1])
    x2 = stats.truncnorm((0.0 - mean[1]) / s22, np.inf, loc=mean[1], scale=s22)
    expected2 = x2.mean()
    expected1 = mean[0] + cov[0, 1] / cov[1, 1] * (expected2 - mean[1])
    stderr = draws.std(axis=0, ddof=1) / np.sqrt(len(draws))
    assert abs(draws[:, 1].mean() - expected2) < 4 * stderr[1]
    assert abs(draws[:, 0].mean() - expected1) < 4 * stderr[0]
    assert abs(draws[:, 1].var(ddof=1) - x2.var()) < 0.01


def test_proposal_log_density_includes_truncation():
    mean = np.array([0.0, 0.1])
    cov = np.array([[1.0, 0.0], [0.0, 0.25]])
    proposal = ProposalDistribution(mean, cov)
    y = np.array([0.3, 0.2])
    expected = stats.multivariate_normal(mean, cov).logpdf(y) - stats.norm.logcdf(0.1 / 0.5)
    assert proposal.log_density(y) == pytest.approx(expected, abs=1e-12)


def test_acceptance_of_unchanged_point_is_one(small_ppd, interacting_model):
    x = small_ppd.points[3]
    assert acceptance_prob(x, x, small_ppd, small_ppd, interacting_model) == pytest.approx(1.0)


def swapped(ppd, index, y):
    points = ppd.points.copy()
    points[index] = y
    return ppd.replace_points(points)


def test_interaction_free_acceptance_matches_closed_form(small_ppd):
    model = free_model(xbar1=-1.0)
    x, y = small_ppd.points[0], np.array([-0.7, 0.15])
    star = swapped(small_ppd, 0, y)

    def log_target(z):
        return -model.theta_H * (z[0] - model.xbar1) ** 2 - model.theta_V * z[1] ** 2

    def log_q(points, z):
        m, c = points.mean(axis=0), np.cov(points, rowvar=False)
        return stats.multivariate_normal(m, c).logpdf(z) - stats.norm.logcdf(m[1] / np.sqrt(c[1, 1]))

    log_ratio = log_target(y) + log_q(star.points, x) - log_target(x) - log_q(small_ppd.points, y)
    expected = min(1.0, float(np.exp(log_ratio)))
    assert acceptance_prob(x, y, small_ppd, star, model) == pytest.approx(expected, abs=1e-10)


def test_acceptance_ratio_is_antisymmetric(small_ppd):
    model = free_model(xbar1=-1.0)
    x, y = small_ppd.points[5], np.array([-1.4, 0.05])
    star = swapped(small_ppd, 5, y)
    forward = acceptance_prob(x, y, small_ppd, star, model)
    backward = acceptance_prob(y, x, star, small_ppd, model)
    assert max(forward, backward) == pytest.approx(1.0)
    assert min(forward, backward) == pytest.approx(forward * backward, rel=1e-12)


def test_acceptance_satisfies_detailed_balance_with_interactions(small_ppd, interacting_model):
    model = interacting_model
    for index in (2, 11, 27):
        x = small_ppd.points[index]
        y = x + np.array([0.04, 0.03])
        star = swapped(small_ppd, index, y)
        centers = neighborhood(small_ppd.points, index, model.K, model.delta).within()
        q_here = ProposalDistribution.from_points(small_ppd.points)
        q_there = ProposalDistribution.from_points(star.points)

        forward = acceptance_prob(x, y, small_ppd, star, model)
        backward = acceptance_prob(y, x, star, small_ppd, model)
        flow_out = -conditional_energy(x, centers, model) + q_here.log_density(y) + np.log(forward)
        flow_in = -conditional_energy(y, centers, model) + q_there.log_density(x) + np.log(backward)
        assert flow_out == pytest.approx(flow_in, abs=1e-10)


def test_proposal_matches_dense_linear_algebra():
    rng = np.random.default_rng(4)
    for _ in range(20):
        root = rng.normal(size=(2, 2))
        cov = root @ root.T + 0.05 * np.eye(2)
        mean = rng.normal(size=2)
        proposal = ProposalDistribution(mean, cov)
        assert np.allclose(proposal._chol, np.linalg.cholesky(cov), atol=1e-12)
        y = np.array([rng.normal(), abs(rng.normal())])
        expected = stats.multivariate_normal(mean, cov).logpdf(y) - stats.norm.logcdf(mean[1] / np.sqrt(cov[1, 1]))
        assert proposal.log_density(y) == pytest.approx(expected, abs=1e-10)


def test_degenerate_proposal_covariance_is_floored():
    with pytest.warns(CovarianceFloorWarning):
        proposal = ProposalDistribution([0.0, 1.0], np.array([[1.0, 1.0], [1.0, 1.0]]))
    assert np.all(np.linalg.eigvalsh(proposal.covariance) > 0)
    assert np.isfinite(proposal.log_density([0.5, 0.5]))


def test_sweep_with_cached_proposals_matches_a_rebuilt_proposal_per_update(small_ppd, interacting_model):
    fast_rng, slow_rng = np.random.default_rng(21), np.random.default_rng(21)
    state = ChainState(small_ppd.points)
    points = small_ppd.points.copy()
    for _ in range(3):
        state.sweep(interacting_model, fast_rng)
        for k in range(len(points)):
            current = small_ppd.replace_points(points.copy())
            y = ProposalDistribution.from_points(points).sample(slow_rng)
            rho = acceptance_prob(points[k], y, current, swapped(current, k, y), interacting_model)
            if slow_rng.uniform() < rho:
                points[k] = y
    assert np.allclose(state.points, points, atol=1e-9)




def test_acceptance_rejects_points_outside_the_half_plane(small_ppd, interacting_model):
    with pytest.raises(ParameterError):
        acceptance_prob(small_ppd.points[0], [0.0, -0.1], small_ppd, small_ppd, interacting_model)


def test_sweep_preserves_size_and_support(small_ppd, interacting_model):
    out = mcmc_sweep(small_ppd, interacting_model, np.random.default_rng(0))
    assert out.n == small_ppd.n
    assert np.all(out.points[:, 1] > 0)
    assert out.source_degree == small_ppd.source_degree


def test_huge_vertical_weight_pulls_points_down(small_ppd):
    model = free_model(theta_H=1.0, theta_V=1e4, xbar1=-1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out = run_chain(small_ppd, model, sweeps=30, seed=2)
    assert out.points[:, 1].mean() < small_ppd.points[:, 1].mean()


def test_minimal_replication(small_ppd, interacting_model):
    replicas = replicate(small_ppd, interacting_model, McmcConfig(burn_in=0, n_b=1, n_r=1, n_R=1))
    assert len(replicas) == 1
    assert replicas[0].n == small_ppd.n
    assert int((replicas[0].points != small_ppd.points).any(axis=1).sum()) <= small_ppd.n


def test_replica_count_provenance_and_determinism(small_ppd, interacting_model):
    config = McmcConfig(burn_in=2, n_b=2, n_r=3, n_R=2, seed=5)
    one = replicate(small_ppd, interacting_model, config)
    two = replicate(small_ppd, interacting_model, config)
    assert len(one) == config.M == 6
    assert one.provenance["chain"].tolist() == [0, 0, 0, 1, 1, 1]
    assert one.provenance["block"].tolist() == [0, 1, 2, 0, 1, 2]
    for a, b in zip(one, two):
        assert np.array_equal(a.points, b.points)
        assert np.all(a.points[:, 1] > 0)
    assert 0.0 <= one.acceptance_rate <= 1.0


def test_worker_count_does_not_change_replicas(small_ppd, interacting_model):
    serial = replicate(small_ppd, interacting_model, McmcConfig(burn_in=1, n_b=1, n_r=2, n_R=2, seed=3, workers=1))
    parallel = replicate(small_ppd, interacting_model, McmcConfig(burn_in=1, n_b=1, n_r=2, n_R=2, seed=3, workers=2))
    for a, b in zip(serial, parallel):
        assert np.array_equal(a.points, b.points)


def test_replica_directory_round_trip(tmp_path, small_ppd, interacting_model):
    replicas = replicate(small_ppd, interacting_model, McmcConfig(burn_in=0, n_b=1, n_r=2, n_R=1, seed=1))
    directory = write_replica_set(replicas, str(tmp_path / "replicas"), {"degree": 1})
    loaded = read_replica_set(directory)
    assert len(loaded) == 2
    assert loaded.config == replicas.config
    assert loaded.model_hash == replicas.model_hash
    assert np.array_equal(loaded[1].points, replicas[1].points)


def test_burn_in_curve_starts_at_zero(small_ppd, interacting_model):
    curve = burn_in_curve(small_ppd, interacting_model, max_steps=4, n_chains=2, seed=0)
    assert list(curve.columns) == ["step", "bottleneck", "wasserstein"]
    assert curve["step"].tolist() == [0, 1, 2, 3, 4]
    assert curve.loc[0, "bottleneck"] == 0.0 and curve.loc[0, "wasserstein"] == 0.0
    assert (curve["bottleneck"] <= curve["wasserstein"] + 1e-12).all()


def test_suggested_burn_in_on_saturating_curve():
    steps = np.arange(101)
    curve = 1.0 - np.exp(-steps / 10.0)
    knee = suggest_burn_in(curve)
    assert 25 <= knee <= 40
    assert suggest_burn_in(np.zeros(10)) == 0


@pytest.mark.slow
def test_frozen_kernel_samples_the_interaction_free_target():
    xbar1 = 0.3
    model = free_model(theta_H=1.0, theta_V=1.0, xbar1=xbar1)
    state = ChainState(np.array([[xbar1, 0.5], [xbar1 + 1.0, 1.0]]))
    frozen = ProposalDistribution([xbar1, 0.5], np.eye(2))
    rng = np.random.default_rng(12)

    samples = []
    for step in range(50_000):
        state.sweep(model, rng, frozen=frozen)
        if step % 5 == 4:
            samples.append(state.points[0].copy())
    samples = np.array(samples)

    assert stats.kstest(samples[:, 0], stats.norm(xbar1, np.sqrt(0.5)).cdf).statistic < 0.05
    assert stats.kstest(samples[:, 1], stats.halfnorm(scale=np.sqrt(0.5)).cdf).statistic < 0.05
