"""
Signal/noise separation on a persistence diagram.

T_j is the j-th largest lifetime |b − d|. Its bootstrap distribution comes
from M replicated diagrams; a point is signal when the real T_j exceeds the
upper end c₂ of the one-sided interval [0, c₂] at level α.
"""

import warnings
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from gibbs_tda.utils.diagrams import PersistenceDiagram
from gibbs_tda.utils.errors import NeighborCountWarning, ParameterError, PreconditionError

MIN_REPLICAS = 20
DEFAULT_ALPHA = 0.05

REPORT_COLUMNS = [
    "homology", "statistic", "real_value", "config", "ci_lower", "ci_upper",
    "p_value", "significant", "M", "essential_added_back",
]


@dataclass(frozen=True)
class SignalReport:
    statistic_index: int
    t_hat: float
    ci: Tuple[float, float]
    p_value: float
    significant: bool
    M: int
    homology_degree: int
    essential_added_back: bool = False
    alpha: float = DEFAULT_ALPHA
    config_label: str = ""

    def to_row(self) -> dict:
        return {
            "homology": f"H{self.homology_degree}",
            "statistic": f"T{self.statistic_index}",
            "real_value": self.t_hat,
            "config": self.config_label,
            "ci_lower": self.ci[0],
            "ci_upper": self.ci[1],
            "p_value": self.p_value,
            "significant": bool(self.significant),
            "M": self.M,
            "essential_added_back": bool(self.essential_added_back),
        }


def order_statistic(diagram: PersistenceDiagram, j: int) -> float:
    """j-th largest finite lifetime; 0 (with a warning) when the diagram has fewer than j points."""
    if j < 1:
        raise ParameterError("j", f"statistic index must be >= 1, got {j}")
    lifetimes = np.sort(diagram.lifetimes())[::-1]
    if j > len(lifetimes):
        warnings.warn(f"diagram has {len(lifetimes)} finite points, T_{j} taken as 0", NeighborCountWarning)
        return 0.0
    return float(lifetimes[j - 1])


def replica_statistics(replicas: Sequence[PersistenceDiagram], j: int) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NeighborCountWarning)
        return np.array([order_statistic(r, j) for r in replicas], dtype=float)


def significance_test(
    real: PersistenceDiagram,
    replicas: Sequence[PersistenceDiagram],
    j: int,
    alpha: float = DEFAULT_ALPHA,
    config_label: str = "",
) -> SignalReport:
    """Percentile-bootstrap test of T_j: c₂ = (1 − α) percentile, p = mean(T* ≥ T̂)."""
    if not 0 < alpha < 1:
        raise ParameterError("alpha", f"alpha must lie in (0, 1), got {alpha}")
    M = len(replicas)
    if M < MIN_REPLICAS:
        raise PreconditionError(f"significance testing needs at least {MIN_REPLICAS} replicas, got {M}")

    t_hat = order_statistic(real, j)
    stats = replica_statistics(replicas, j)
    c2 = float(np.percentile(stats, 100.0 * (1.0 - alpha), method="linear"))
    p_value = float(np.count_nonzero(stats >= t_hat)) / M
    return SignalReport(
        statistic_index=j,
        t_hat=t_hat,
        ci=(0.0, c2),
        p_value=p_value,
        significant=bool(t_hat > c2),
        M=M,
        homology_degree=real.degree,
        alpha=alpha,
        config_label=config_label,
    )


def count_significant(
    real: PersistenceDiagram,
    replicas: Sequence[PersistenceDiagram],
    alpha: float = DEFAULT_ALPHA,
    j_max: Optional[int] = None,
    config_label: str = "",
) -> Tuple[int, List[SignalReport]]:
    """Test T_1, T_2, … until the first insignificant one.

    Returns the number of features (significant points, plus the essential
    point for H₀) and every report produced along the way.
    """
    available = len(real.lifetimes())
    limit = available if j_max is None else min(j_max, available)

    reports: List[SignalReport] = []
    significant = 0
    for j in range(1, limit + 1):
        report = significance_test(real, replicas, j, alpha, config_label)
        reports.append(report)
        if not report.significant:
            break
        significant += 1

    essential = bool(real.essential.any()) or real.degree == 0
    if essential and reports:
        reports = [replace(r, essential_added_back=True) for r in reports]
    return significant + (1 if essential else 0), reports


def reports_to_frame(reports: Sequence[SignalReport]) -> pd.DataFrame:
    return pd.DataFrame([r.to_row() for r in reports], columns=REPORT_COLUMNS)
