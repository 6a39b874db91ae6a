import numpy as np
import pytest

from gibbs_tda.utils.diagrams import PersistenceDiagram, Ppd
from gibbs_tda.utils.gibbs_model import GibbsModel


@pytest.fixture
def small_ppd() -> Ppd:
    rng = np.random.default_rng(7)
    x1 = rng.normal(-1.0, 0.3, 40)
    x2 = np.abs(rng.normal(0.0, 0.2, 40)) + 1e-3
    return Ppd(np.column_stack([x1, x2]), source_degree=1)


@pytest.fixture
def interacting_model() -> GibbsModel:
    return GibbsModel(theta_H=4.0, theta_V=6.0, theta=(0.5, -0.2, 0.1), delta=0.15, xbar1=-1.0, K=3)


@pytest.fixture
def h0_diagram() -> PersistenceDiagram:
    points = np.array([[-0.9, 0.0], [-0.6, -0.1], [-0.5, -0.45], [-0.3, -0.25]])
    essential = np.array([True, False, False, False])
    return PersistenceDiagram(0, points, essential)
