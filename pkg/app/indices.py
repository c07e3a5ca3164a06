# =============================================================================
# indices.py - V1.3.0
# Module: empirical poverty indices (generic GPI sum and dedicated closed forms)
# Notes:
#   - [Add] compute_gpi walks the (A, B, w, mu, d) slots of a MeasureSpec
#   - [Add] closed_form_index keeps one hand-written formula per family, used
#           as the oracle for the generic path
#   - [Fix] Q = 0 returns 0 with no_poor set instead of raising
# =============================================================================

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np

from errors import DomainError
from measures import MeasureSpec, measure_spec
from survey_data import EmpiricalDist

logger = logging.getLogger("gpi_indices")

Values = Union[EmpiricalDist, np.ndarray, list]


@dataclass(frozen=True)
class IndexValue:
    value: float
    Q: int
    n: int
    no_poor: bool = False

    @property
    def ratio(self) -> float:
        return self.Q / self.n


def _as_dist(values: Values) -> EmpiricalDist:
    if isinstance(values, EmpiricalDist):
        return values
    return EmpiricalDist.from_values(values)


def _check_line(Z: float) -> float:
    Z = float(Z)
    if not (np.isfinite(Z) and Z > 0):
        raise DomainError(f"poverty line must be finite and > 0, got {Z}")
    return Z


def headcount(values: Values, Z: float) -> Tuple[int, float]:
    dist = _as_dist(values)
    Q = dist.headcount(_check_line(Z))
    return Q, Q / dist.n


def compute_gpi(values: Values, Z: float, spec: MeasureSpec) -> IndexValue:
    dist = _as_dist(values)
    Z = _check_line(Z)
    n = dist.n
    Q = dist.headcount(Z)
    if Q == 0:
        logger.debug(f"no income at or below Z={Z:g} ({spec.label})")
        return IndexValue(0.0, 0, n, no_poor=True)

    mu1, mu2, mu3, mu4 = spec.mu
    j = np.arange(1, Q + 1, dtype=float)
    weights = spec.w(mu1 * n + mu2 * Q - mu3 * j + mu4)
    gaps = spec.relative_gap(dist.sorted_values[:Q], Z)
    value = spec.A(Q, n, Z) / (n * spec.B(Q, n)) * float(np.sum(weights * gaps))
    return IndexValue(float(spec.delta(value)), Q, n)


# ---------------------------------------------------------
# Closed forms: (poor order statistics, n, Z, parameter) -> value
# ---------------------------------------------------------
def _fgt(poor: np.ndarray, n: int, Z: float, alpha: float) -> float:
    return float(np.sum(((Z - poor) / Z) ** alpha)) / n


def _chakravarty(poor: np.ndarray, n: int, Z: float, alpha: float) -> float:
    return float(np.sum(1.0 - (poor / Z) ** alpha)) / n


def _sen(poor: np.ndarray, n: int, Z: float, _) -> float:
    Q = poor.size
    ranks = Q - np.arange(1, Q + 1, dtype=float) + 1.0
    return 2.0 / (n * (Q + 1.0)) * float(np.sum(ranks * (Z - poor) / Z))


def _shorrocks_sum(poor: np.ndarray, n: int, Z: float) -> float:
    ranks = 2.0 * n - 2.0 * np.arange(1, poor.size + 1, dtype=float) + 1.0
    return float(np.sum(ranks * (Z - poor) / Z))


def _shorrocks(poor: np.ndarray, n: int, Z: float, _) -> float:
    return _shorrocks_sum(poor, n, Z) / (float(n) * n)


def _thon(poor: np.ndarray, n: int, Z: float, _) -> float:
    return _shorrocks_sum(poor, n, Z) / (float(n) * (n + 1.0))


def _kakwani(poor: np.ndarray, n: int, Z: float, k: float) -> float:
    Q = poor.size
    j = np.arange(1, Q + 1, dtype=float)
    norm = Q / (n * float(np.sum(j ** k)))
    return norm * float(np.sum((Q - j + 1.0) ** k * (Z - poor) / Z))


CLOSED_FORMS: Dict[str, Callable[[np.ndarray, int, float, Optional[float]], float]] = {
    "fgt": _fgt,
    "chakravarty": _chakravarty,
    "sen": _sen,
    "shorrocks": _shorrocks,
    "thon": _thon,
    "kakwani": _kakwani,
}


def closed_form_index(values: Values, Z: float, measure_id: str,
                      parameter: Optional[float] = None) -> IndexValue:
    spec = measure_spec(measure_id, parameter)  # validates id / parameter
    dist = _as_dist(values)
    Z = _check_line(Z)
    Q = dist.headcount(Z)
    if Q == 0:
        return IndexValue(0.0, 0, dist.n, no_poor=True)
    value = CLOSED_FORMS[spec.id](dist.sorted_values[:Q], dist.n, Z, spec.parameter)
    return IndexValue(value, Q, dist.n)
