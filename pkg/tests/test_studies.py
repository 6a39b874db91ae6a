import numpy as np
import pandas as pd
import pytest

from gibbs_tda.utils.config import ExperimentConfig
from gibbs_tda.utils.diagrams import Ppd
from gibbs_tda.utils.errors import ParameterError, PreconditionError
from gibbs_tda.utils.point_clouds import SamplerSpec, sample
from gibbs_tda.utils.studies import (
    estimate_histograms,
    parameter_study,
    resampled_ppds,
    setting_burn_in_curves,
)


def test_diagram_setting_keeps_size_and_draws_existing_points(small_ppd):
    copies = resampled_ppds("diagram", small_ppd, 3, seed=1)
    assert len(copies) == 3
    original = {tuple(p) for p in small_ppd.points}
    for copy in copies:
        assert copy.n == small_ppd.n
        assert {tuple(p) for p in copy.points} <= original
    assert not np.array_equal(copies[0].points, copies[1].points)


def test_simulated_setting_runs_chains_from_the_model(small_ppd, interacting_model):
    copies = resampled_ppds("simulated", small_ppd, 2, seed=3, model=interacting_model, burn_in=1, n_b=2)
    assert all(c.n == small_ppd.n for c in copies)
    assert all(np.all(c.points[:, 1] > 0) for c in copies)
    again = resampled_ppds("simulated", small_ppd, 2, seed=3, model=interacting_model, burn_in=1, n_b=2)
    np.testing.assert_array_equal(copies[1].points, again[1].points)


def test_data_setting_recomputes_persistence():
    config = ExperimentConfig(shape="circles", n=80, sampler_params={"circles": [[1.0, 80]]}, eta=0.2, resolution=24)
    cloud = sample(config.sampler_spec())
    ppd = Ppd(np.array([[-0.1, 0.05]]), source_degree=1)
    copies = resampled_ppds("data", ppd, 2, seed=0, cloud=cloud, config=config)
    assert len(copies) == 2
    assert all(c.source_degree == 1 for c in copies)


def test_settings_check_their_inputs(small_ppd):
    with pytest.raises(ParameterError):
        resampled_ppds("bootstrap", small_ppd, 2)
    with pytest.raises(ParameterError):
        resampled_ppds("diagram", small_ppd, 0)
    with pytest.raises(PreconditionError):
        resampled_ppds("simulated", small_ppd, 2)
    with pytest.raises(PreconditionError):
        resampled_ppds("data", small_ppd, 2)


def test_parameter_study_skips_small_diagrams(small_ppd):
    tiny = Ppd(np.array([[-1.0, 0.1], [-0.9, 0.2]]))
    table = parameter_study([small_ppd, tiny], K=1, d=2, starts=1, seed=0)

    assert table["set"].tolist() == [0]
    assert list(table.columns) == [
        "set", "N", "delta", "delta_star", "theta_H", "theta_V", "theta_1",
        "pseudolikelihood", "interactions_dropped", "converged",
    ]
    assert table["N"].iloc[0] == small_ppd.n
    assert table["theta_H"].iloc[0] > 0
    assert table["theta_V"].iloc[0] > 0


def test_histograms_leave_out_dropped_interactions():
    table = pd.DataFrame({
        "theta_H": [1.0, 2.0, 100.0],
        "theta_V": [3.0, 4.0, 100.0],
        "theta_1": [0.1, 0.2, 0.0],
        "interactions_dropped": [False, False, True],
    })
    hist = estimate_histograms(table, bins=4)

    assert set(hist["parameter"]) == {"theta_H", "theta_V", "theta_1"}
    theta_h = hist[hist["parameter"] == "theta_H"]
    assert theta_h["bin_right"].max() == pytest.approx(2.0)
    widths = theta_h["bin_right"] - theta_h["bin_left"]
    assert (theta_h["density"] * widths).sum() == pytest.approx(1.0)


def test_histograms_of_an_empty_table():
    empty = pd.DataFrame(columns=["theta_H", "theta_V", "interactions_dropped"])
    assert estimate_histograms(empty).empty


def test_setting_burn_in_curves_start_at_zero(small_ppd, interacting_model):
    curves = setting_burn_in_curves("diagram", small_ppd, interacting_model, n_sets=2, max_steps=3, seed=5)

    assert list(curves.columns) == ["setting", "step", "bottleneck", "wasserstein"]
    assert curves["step"].tolist() == [0, 1, 2, 3]
    assert (curves["setting"] == "diagram").all()
    assert curves["bottleneck"].iloc[0] == 0.0
    assert (curves["wasserstein"] >= curves["bottleneck"] - 1e-12).all()
