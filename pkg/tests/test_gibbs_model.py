import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from gibbs_tda.utils.diagrams import Ppd
from gibbs_tda.utils.errors import (
    DegenerateDeltaWarning,
    NeighborCountWarning,
    NonNormalizableModelError,
    ParameterError,
    PreconditionError,
)
from gibbs_tda.utils.gibbs_model import (
    GibbsModel,
    NeighborhoodView,
    PseudolikelihoodProblem,
    cluster_term,
    conditional_log_density,
    default_delta_star_grid,
    delta_rule,
    fit,
    hamiltonian,
    load_model,
    log_pseudolikelihood,
    neighborhoods,
    pseudolikelihood_gradient,
    save_model,
    simulate_interaction_free,
    spread_stats,
)
from gibbs_tda.utils.mcmc import conditional_energy


def random_ppd(seed, n=20, scale=1.0):
    rng = np.random.default_rng(seed)
    return Ppd(np.column_stack([rng.normal(0.0, scale, n), rng.uniform(0.01, scale, n)]))


def brute_cluster_term(points, k, delta):
    total = 0.0
    for i, x in enumerate(points):
        dist = sorted((np.linalg.norm(x - y), j) for j, y in enumerate(points) if j != i)
        kth = dist[k - 1][0]
        if kth <= delta:
            total += kth
    return total


# ── Spread and cluster statistics ────────────────────────────────────────


def test_spread_stats_single_point():
    assert spread_stats(Ppd(np.array([[0.3, 0.7]]))) == pytest.approx((0.0, 0.49, 0.3))


def test_spread_stats_two_points():
    assert spread_stats(Ppd(np.array([[0.0, 1.0], [2.0, 1.0]]))) == (2.0, 2.0, 1.0)


def test_spread_stats_matches_direct_sums():
    ppd = random_ppd(0, n=100)
    x1, x2 = ppd.points.T
    mean = sum(x1) / len(x1)
    expected = (sum((v - mean) ** 2 for v in x1), sum(v * v for v in x2), mean)
    assert spread_stats(ppd) == pytest.approx(expected, rel=1e-12)


def test_cluster_term_pair():
    ppd = Ppd(np.array([[0.0, 1.0], [0.5, 1.0]]))
    assert cluster_term(ppd, 1, delta=1.0) == pytest.approx(1.0)
    assert cluster_term(ppd, 1, delta=0.4) == 0.0


@pytest.mark.parametrize("k", [1, 2, 3])
def test_cluster_term_matches_pairwise_scan(k):
    ppd = random_ppd(1)
    assert cluster_term(ppd, k, 0.8) == pytest.approx(brute_cluster_term(ppd.points, k, 0.8), rel=1e-12)


def test_cluster_term_without_kth_neighbor_warns():
    with pytest.warns(NeighborCountWarning):
        assert cluster_term(Ppd(np.array([[0.0, 1.0], [0.5, 1.0]])), 2, 1.0) == 0.0


def test_neighborhood_distances_are_nondecreasing():
    for view in neighborhoods(random_ppd(2), K=3, delta=0.5):
        assert np.all(np.diff(view.distances) >= 0)
        assert len(view.within()) <= 3


# ── Hamiltonian and δ ────────────────────────────────────────────────────


def test_hamiltonian_zero_parameters():
    model = GibbsModel(0.0, 0.0, (0.0, 0.0, 0.0), delta=0.5, xbar1=0.0)
    assert hamiltonian(random_ppd(3), model) == 0.0


def test_hamiltonian_single_point_vertical_term():
    model = GibbsModel(0.0, 2.0, (0.0, 0.0, 0.0), delta=0.5, xbar1=0.0)
    assert hamiltonian(Ppd(np.array([[0.4, 0.3]])), model) == pytest.approx(2.0 * 0.09)


def test_hamiltonian_recombines_its_terms(interacting_model):
    ppd = random_ppd(4)
    sigma_h, sigma_v, _ = spread_stats(ppd)
    expected = interacting_model.theta_H * sigma_h + interacting_model.theta_V * sigma_v
    for k, theta_k in enumerate(interacting_model.theta, start=1):
        expected += theta_k * brute_cluster_term(ppd.points, k, interacting_model.delta) / interacting_model.delta ** 2
    assert hamiltonian(ppd, interacting_model) == pytest.approx(expected, rel=1e-12)


def test_hamiltonian_invariances(interacting_model):
    ppd = random_ppd(5)
    shuffled = Ppd(np.random.default_rng(0).permutation(ppd.points))
    assert hamiltonian(shuffled, interacting_model) == pytest.approx(hamiltonian(ppd, interacting_model), rel=1e-12)

    free = interacting_model.with_parameters(4.0, 6.0, (0.0, 0.0, 0.0))
    moved = Ppd(ppd.points + np.array([3.0, 0.0]))
    assert hamiltonian(moved, free) == pytest.approx(hamiltonian(ppd, free), rel=1e-9)


def test_delta_rule_hand_value():
    ppd = Ppd(np.array([[0.0, 1.0], [1.0, 3.0]]))
    assert delta_rule(ppd, 1.0, k=1, d=2) == pytest.approx(2.0 / 2.0 ** 0.25)
    assert delta_rule(ppd, 2.0, k=1, d=2) == pytest.approx(2.0 * delta_rule(ppd, 1.0, k=1, d=2))
    assert delta_rule(ppd, 1.0, k=0, d=2) == pytest.approx(2.0 / 2.0 ** 0.5)


def test_delta_rule_degenerate_points():
    ppd = Ppd(np.array([[0.5, 0.5], [0.5, 0.5]]))
    with pytest.warns(DegenerateDeltaWarning):
        assert delta_rule(ppd, 1.0, k=3, d=2) > 0


def test_delta_rule_preconditions():
    with pytest.raises(PreconditionError):
        delta_rule(Ppd(np.array([[0.0, 1.0]])), 1.0, 1, 2)
    with pytest.raises(ParameterError):
        delta_rule(random_ppd(0), 1.0, 1, 0)


def test_default_delta_star_grid():
    grid = default_delta_star_grid(100)
    assert any(abs(g - 0.1) < 1e-12 for g in grid)
    assert min(grid) == pytest.approx(0.01)
    assert max(grid) == pytest.approx(1.0)


def test_model_invariants():
    with pytest.raises(ParameterError):
        GibbsModel(1.0, 1.0, (0.0,), delta=0.1, xbar1=0.0, K=3)
    with pytest.raises(ParameterError):
        GibbsModel(1.0, 1.0, (0.0,), delta=0.0, xbar1=0.0, K=1)


# ── Conditional density ──────────────────────────────────────────────────


def test_interaction_free_conditional_is_gaussian_times_half_gaussian():
    theta_H, theta_V, xbar1 = 3.0, 5.0, -0.4
    model = GibbsModel(theta_H, theta_V, (0.0, 0.0, 0.0), delta=0.2, xbar1=xbar1)
    x = np.array([0.1, 0.3])
    nbhd = NeighborhoodView(x, np.empty((0, 2)), np.empty(0), 0.2)
    expected = (
        -theta_H * (x[0] - xbar1) ** 2 - theta_V * x[1] ** 2
        - np.log(np.sqrt(np.pi / theta_H) * 0.5 * np.sqrt(np.pi / theta_V))
    )
    assert conditional_log_density(x, nbhd, model) == pytest.approx(expected, abs=1e-8)


def test_non_normalizable_model():
    model = GibbsModel(0.0, 1.0, (0.0,), delta=0.2, xbar1=0.0, K=1)
    nbhd = NeighborhoodView(np.array([0.0, 1.0]), np.empty((0, 2)), np.empty(0), 0.2)
    with pytest.raises(NonNormalizableModelError):
        conditional_log_density([0.0, 1.0], nbhd, model)


def one_neighbor_setup(height=0.2):
    model = GibbsModel(4.0, 6.0, (1.5,), delta=0.3, xbar1=0.0, K=1)
    neighbor = np.array([[0.1, height]])
    x = np.array([0.2, height + 0.05])
    nbhd = NeighborhoodView(x, neighbor, np.linalg.norm(neighbor - x, axis=1), model.delta)
    return model, neighbor, x, nbhd


def test_density_ratio_is_the_energy_difference():
    model, neighbor, x, nbhd = one_neighbor_setup()
    y = np.array([-0.5, 0.6])
    ratio = conditional_log_density(x, nbhd, model) - conditional_log_density(y, nbhd, model)
    expected = conditional_energy(y, neighbor, model) - conditional_energy(x, neighbor, model)
    assert ratio == pytest.approx(expected, abs=1e-10)


def test_conditional_density_integrates_to_one():
    model, neighbor, x, nbhd = one_neighbor_setup()
    log_z = -conditional_energy(x, neighbor, model) - conditional_log_density(x, nbhd, model)

    h = 2.0e-3
    z1 = np.arange(-3.0 + h / 2, 3.0, h)
    z2 = np.arange(h / 2, 2.5, h)
    g1, g2 = np.meshgrid(z1, z2, indexing="ij")
    energy = model.theta_H * g1 ** 2 + model.theta_V * g2 ** 2
    dist = np.hypot(g1 - neighbor[0, 0], g2 - neighbor[0, 1])
    energy += np.where(dist <= model.delta, dist, 0.0) * model.theta[0] / model.delta ** 2
    riemann = np.exp(-energy).sum() * h * h
    assert riemann == pytest.approx(np.exp(log_z), rel=5e-3)


def test_normalizer_is_stable_under_node_doubling():
    model, neighbor, x, _ = one_neighbor_setup(height=0.6)
    coarse = PseudolikelihoodProblem(x[None, :], [neighbor], model.delta, 1, 0.0)
    fine = PseudolikelihoodProblem(
        x[None, :], [neighbor], model.delta, 1, 0.0,
        base_nodes=512, angular_panels=8, angular_nodes=16, radial_nodes=24,
    )
    args = (model.theta_H, model.theta_V, model.theta)
    assert coarse.normalizers(*args)[0] == pytest.approx(fine.normalizers(*args)[0], rel=1e-6)


def overlapping_setup():
    delta = 0.15
    x = np.array([0.05, 0.2])
    neighbors = np.array([[0.0, 0.2], [0.1, 0.25]])
    return x, neighbors, delta, (4.0, 6.0, (-0.5, 0.4, 0.0))


def nested_quad_normalizer(centers, delta, theta_H, theta_V, theta, xbar1):
    """Z_base in closed form plus the disk excess by adaptive quadrature split at every boundary."""
    centers = np.asarray(centers, dtype=float)
    theta = np.asarray(theta, dtype=float)[: len(centers)]

    def excess(z2, z1):
        r = np.hypot(z1 - centers[:, 0], z2 - centers[:, 1])
        inside = r <= delta
        base = np.exp(-theta_H * (z1 - xbar1) ** 2 - theta_V * z2 ** 2)
        return base * (np.exp(-np.sum(theta[inside] * r[inside]) / delta ** 2) - 1.0)

    def column(z1):
        half = np.sqrt(np.maximum(delta ** 2 - (z1 - centers[:, 0]) ** 2, 0.0))
        covering = np.abs(z1 - centers[:, 0]) < delta
        if not covering.any():
            return 0.0
        ends = np.concatenate([centers[covering, 1] - half[covering], centers[covering, 1] + half[covering]])
        lo, hi = max(0.0, ends.min()), ends.max()
        if hi <= lo:
            return 0.0
        marks = np.concatenate([ends, centers[covering, 1]])
        marks = sorted({m for m in marks if lo < m < hi})
        return quad(excess, lo, hi, args=(z1,), points=marks or None, epsabs=1e-14, epsrel=1e-12, limit=200)[0]

    lo, hi = centers[:, 0].min() - delta, centers[:, 0].max() + delta
    marks = [*centers[:, 0], *(centers[:, 0] - delta), *(centers[:, 0] + delta)]
    for a in range(len(centers)):
        if abs(centers[a, 1]) < delta:
            reach = np.sqrt(delta ** 2 - centers[a, 1] ** 2)
            marks += [centers[a, 0] - reach, centers[a, 0] + reach]
        for b in range(a + 1, len(centers)):
            gap = centers[b] - centers[a]
            d = np.linalg.norm(gap)
            if 0 < d < 2 * delta:
                h = np.sqrt(delta ** 2 - d ** 2 / 4)
                mid = (centers[a] + centers[b]) / 2
                marks += [mid[0] + h * gap[1] / d, mid[0] - h * gap[1] / d]
    marks = sorted({m for m in marks if lo < m < hi})
    disk_part = quad(column, lo, hi, points=marks, epsabs=1e-14, epsrel=1e-11, limit=400)[0]
    return np.sqrt(np.pi / theta_H) * 0.5 * np.sqrt(np.pi / theta_V) + disk_part


def test_normalizer_with_overlapping_neighbors_is_stable_under_node_doubling():
    x, neighbors, delta, (theta_H, theta_V, theta) = overlapping_setup()
    coarse = PseudolikelihoodProblem(x[None, :], [neighbors], delta, 3, 0.0)
    fine = PseudolikelihoodProblem(
        x[None, :], [neighbors], delta, 3, 0.0,
        base_nodes=512, angular_panels=8, angular_nodes=16, radial_nodes=24,
    )
    assert coarse.normalizers(theta_H, theta_V, theta)[0] == pytest.approx(
        fine.normalizers(theta_H, theta_V, theta)[0], rel=1e-6
    )


def test_normalizer_with_overlapping_neighbors_matches_adaptive_quadrature():
    x, neighbors, delta, (theta_H, theta_V, theta) = overlapping_setup()
    problem = PseudolikelihoodProblem(x[None, :], [neighbors], delta, 3, 0.0)
    expected = nested_quad_normalizer(neighbors, delta, theta_H, theta_V, theta, 0.0)
    assert problem.normalizers(theta_H, theta_V, theta)[0] == pytest.approx(expected, rel=1e-6)


def test_normalizer_with_neighbors_cut_by_the_floor_matches_adaptive_quadrature():
    delta = 0.2
    x = np.array([0.0, 0.05])
    neighbors = np.array([[0.02, 0.03], [-0.1, 0.08], [0.12, 0.0]])
    theta = (1.2, -0.7, 2.0)
    problem = PseudolikelihoodProblem(x[None, :], [neighbors], delta, 3, 0.0)
    expected = nested_quad_normalizer(neighbors, delta, 5.0, 8.0, theta, 0.0)
    assert problem.normalizers(5.0, 8.0, theta)[0] == pytest.approx(expected, rel=1e-6)


@pytest.mark.slow
def test_normalizer_matches_adaptive_quadrature_on_random_neighborhoods():
    rng = np.random.default_rng(11)
    for _ in range(20):
        delta = rng.uniform(0.05, 0.3)
        x = np.array([rng.uniform(-0.3, 0.3), rng.uniform(0.0, 0.3)])
        count = int(rng.integers(1, 4))
        radius = delta * np.sqrt(rng.uniform(0.0, 1.0, count))
        angle = rng.uniform(0.0, 2 * np.pi, count)
        neighbors = x + np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
        neighbors[:, 1] = np.abs(neighbors[:, 1])
        neighbors = neighbors[np.argsort(np.linalg.norm(neighbors - x, axis=1))]
        theta_H, theta_V = rng.uniform(1.0, 10.0, 2)
        theta = rng.uniform(-1.0, 3.0, 3)

        problem = PseudolikelihoodProblem(x[None, :], [neighbors], delta, 3, 0.0)
        expected = nested_quad_normalizer(neighbors, delta, theta_H, theta_V, theta, 0.0)
        assert problem.normalizers(theta_H, theta_V, theta)[0] == pytest.approx(expected, rel=1e-6)


# ── Pseudolikelihood ─────────────────────────────────────────────────────


def test_single_point_pseudolikelihood(interacting_model):
    ppd = Ppd(np.array([[-0.8, 0.2]]))
    nbhd = NeighborhoodView(ppd.points[0], np.empty((0, 2)), np.empty(0), interacting_model.delta)
    assert log_pseudolikelihood(ppd, interacting_model) == pytest.approx(
        conditional_log_density(ppd.points[0], nbhd, interacting_model), rel=1e-12
    )


def test_pseudolikelihood_is_the_sum_of_conditionals(interacting_model):
    ppd = random_ppd(6, n=30, scale=0.4)
    views = neighborhoods(ppd, interacting_model.K, interacting_model.delta)
    expected = sum(conditional_log_density(v.point, v, interacting_model) for v in views)
    assert log_pseudolikelihood(ppd, interacting_model) == pytest.approx(expected, rel=1e-10)


def test_theta_v_optimum_for_interaction_free_model():
    ppd = simulate_interaction_free(10.0, 20.0, 0.0, 200, seed=1)
    sigma_h, sigma_v, xbar1 = spread_stats(ppd)
    best = ppd.n / (2.0 * sigma_v)
    model = GibbsModel(ppd.n / (2.0 * sigma_h), best, (0.0,), delta=1e-3, xbar1=xbar1, K=1)
    top = log_pseudolikelihood(ppd, model)
    for factor in (0.8, 1.25):
        assert log_pseudolikelihood(ppd, model.with_parameters(model.theta_H, best * factor, (0.0,))) < top


def test_pseudolikelihood_is_concave_in_interaction_weights(small_ppd, interacting_model):
    problem = PseudolikelihoodProblem.from_ppd(small_ppd, interacting_model.delta, 3, interacting_model.xbar1)
    rng = np.random.default_rng(3)
    for _ in range(10):
        a, b = rng.normal(0.0, 0.5, 3), rng.normal(0.0, 0.5, 3)
        mid = problem.value(4.0, 6.0, (a + b) / 2)
        assert mid >= (problem.value(4.0, 6.0, a) + problem.value(4.0, 6.0, b)) / 2 - 1e-7


def test_gradient_matches_central_differences(small_ppd, interacting_model):
    gradient = pseudolikelihood_gradient(small_ppd, interacting_model)
    base = np.array([interacting_model.theta_H, interacting_model.theta_V, *interacting_model.theta])
    problem = PseudolikelihoodProblem.from_ppd(small_ppd, interacting_model.delta, 3, interacting_model.xbar1)
    for i in range(len(base)):
        h = 1e-5 * max(1.0, abs(base[i]))
        up, down = base.copy(), base.copy()
        up[i] += h
        down[i] -= h
        numeric = (problem.value(up[0], up[1], up[2:]) - problem.value(down[0], down[1], down[2:])) / (2 * h)
        assert gradient[i] == pytest.approx(numeric, rel=1e-4, abs=1e-6)


# ── Fitting ──────────────────────────────────────────────────────────────


def test_fit_recovers_interaction_free_scales():
    ppd = simulate_interaction_free(72.8, 39.5, -0.3, 110, seed=2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        model = fit(ppd, K=1, d=2, delta_star_grid=[ppd.n ** -0.5], starts=1, max_evaluations=400)
    assert model.theta_H > 0 and model.theta_V > 0
    assert 72.8 / 2 < model.theta_H < 72.8 * 2
    assert 39.5 / 2 < model.theta_V < 39.5 * 2
    assert model.delta_star == pytest.approx(ppd.n ** -0.5)
    assert np.isfinite(model.diagnostics.pseudolikelihood)


def test_fit_drops_unidentifiable_interactions():
    ppd = random_ppd(7, n=12)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        model = fit(ppd, K=2, delta_star_grid=[1e-9], starts=1, max_evaluations=300)
    assert model.diagnostics.interactions_dropped
    assert model.theta == (0.0, 0.0)


def test_fit_with_duplicated_points_stays_positive():
    ppd = random_ppd(8, n=15, scale=0.5)
    doubled = Ppd(np.vstack([ppd.points, ppd.points]))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        model = fit(doubled, K=1, delta_star_grid=[doubled.n ** -0.5], starts=1, max_evaluations=300)
    assert model.theta_H > 0 and model.theta_V > 0
    assert all(np.isfinite(model.theta))


def test_fit_needs_enough_points():
    with pytest.raises(PreconditionError):
        fit(random_ppd(0, n=4), K=3)


@pytest.mark.slow
def test_fit_consistency_over_seeds():
    hits = 0
    for seed in range(20):
        ppd = simulate_interaction_free(72.8, 39.5, 0.0, 110, seed=seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model = fit(ppd, K=1, d=2, starts=2, seed=seed)
        if 72.8 / 2 < model.theta_H < 145.6 and 39.5 / 2 < model.theta_V < 79.0:
            hits += 1
    assert hits >= 16


def test_model_file_round_trip(tmp_path, interacting_model):
    path = save_model(interacting_model, str(tmp_path / "model.yaml"), {"degree": 1})
    loaded = load_model(path)
    assert loaded.theta == interacting_model.theta
    assert loaded.delta == interacting_model.delta
    assert loaded.xbar1 == interacting_model.xbar1
