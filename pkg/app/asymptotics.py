# =============================================================================
# asymptotics.py - V1.3.0
# Module: exact index J(G), H/K functionals and influence functions (g0, nu0)
# Notes:
#   - [Add] closed forms for sen / kakwani(k) / shorrocks / thon and the generic
#           (c, π) construction share one InfluencePair type
#   - [Add] works on EmpiricalDist (exact step sums) and parametric laws
#           (Gauss-Legendre), both through dist.poor_integral()
#   - [Fix] sen closed form groups K outside the factor 2 (k = 1 case of kakwani)
#   - [Fix] fixed-normalizer measures skip the π-branch, so K = 0 for shorrocks
# =============================================================================

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Tuple

import numpy as np

from errors import DomainError, HypothesisError, ParameterError
from measures import CLOSED_FORM_INFLUENCE, MeasureSpec

logger = logging.getLogger("gpi_asymptotics")

HD_SWEEP = (100, 1000, 10000)


@dataclass(frozen=True)
class Functionals:
    H_c: float
    H_pi: float
    K_c: float
    K_pi: float
    K: float
    J: float
    q: float


@dataclass(frozen=True)
class InfluencePair:
    """g0(y) = g0_bar(y)·1(y ≤ Z), nu0(y) = nu0_bar(y)·1(y ≤ Z)."""

    g0_bar: Callable
    nu0_bar: Callable
    measure: MeasureSpec
    dist: object
    Z: float
    K: float
    J: float

    def _restricted(self, fn: Callable, y):
        y = np.asarray(y, dtype=float)
        poor = y <= self.Z
        out = np.where(poor, fn(np.where(poor, y, self.Z)), 0.0)
        return float(out) if out.ndim == 0 else out

    def g0(self, y):
        return self._restricted(self.g0_bar, y)

    def nu0(self, y):
        return self._restricted(self.nu0_bar, y)


def _headcount_level(dist, Z: float) -> float:
    q = float(dist.cdf(Z))
    if q >= 1.0:
        logger.warning(f"⚠️ every income is at or below Z={Z:g}: headcount hypothesis violated, proceeding")
    return q


def exact_index(measure: MeasureSpec, dist, Z: float, cfg: Optional[dict] = None) -> float:
    """J(G) = ∫₀^{G(Z)} L(G(Z), s)·γ(G⁻¹(s)) ds with the measure's kernel L."""
    q = _headcount_level(dist, Z)
    if q <= 0.0:
        logger.warning(f"⚠️ no mass at or below Z={Z:g}: exact index is 0")
        return 0.0
    return dist.poor_integral(lambda s, y: measure.kernel(q, s) * measure.relative_gap(y, Z), Z, cfg)


def functionals(measure: MeasureSpec, dist, Z: float, cfg: Optional[dict] = None,
                strict: bool = True) -> Functionals:
    q = _headcount_level(dist, Z)
    if q <= 0.0:
        raise HypothesisError(f"H_pi = 0: no mass at or below Z={Z:g}")
    gap = lambda y: measure.relative_gap(y, Z)
    one = lambda s, y: np.ones(np.broadcast(np.asarray(s), np.asarray(y)).shape)

    H_c = dist.poor_integral(lambda s, y: measure.c(q, s) * gap(y), Z, cfg)
    H_pi = dist.poor_integral(lambda s, y: measure.pi(q, s) * one(s, y), Z, cfg)
    K_c = dist.poor_integral(lambda s, y: measure.dc_dx(q, s) * gap(y), Z, cfg)
    K_pi = dist.poor_integral(lambda s, y: measure.dpi_dx(q, s) * one(s, y), Z, cfg)

    if not H_pi > 0.0:
        raise HypothesisError(f"H_pi = {H_pi:g} is not positive ({measure.label}, Z={Z:g})")
    if not H_c > 0.0:
        if strict:
            raise HypothesisError(f"H_c = {H_c:g} is not positive ({measure.label}, Z={Z:g})")
        logger.warning(f"⚠️ H_c = {H_c:g}: every poor income sits on the line ({measure.label})")

    if measure.fixed_normalizer:
        K = K_c / H_pi
    else:
        K = K_c / H_pi - H_c * K_pi / H_pi ** 2
    return Functionals(H_c=H_c, H_pi=H_pi, K_c=K_c, K_pi=K_pi, K=K, J=H_c / H_pi, q=q)


def influence_generic(measure: MeasureSpec, dist, Z: float, cfg: Optional[dict] = None,
                      strict: bool = True) -> InfluencePair:
    """Assemble g0, nu0 from the measure's (c, π) kernels and their partials."""
    f = functionals(measure, dist, Z, cfg, strict)
    q, H_c, H_pi = f.q, f.H_c, f.H_pi
    fixed = measure.fixed_normalizer

    def g0_bar(y):
        G = np.asarray(dist.cdf(y), dtype=float)
        out = measure.c(q, G) * measure.relative_gap(y, Z) / H_pi + f.K
        if not fixed:
            out = out - H_c / H_pi ** 2 * measure.pi(q, G)
        return out

    def nu0_bar(y):
        G = np.asarray(dist.cdf(y), dtype=float)
        out = measure.dc_dy(q, G) * measure.relative_gap(y, Z) / H_pi
        if not fixed:
            out = out - H_c / H_pi ** 2 * measure.dpi_dy(q, G)
        return out

    return InfluencePair(g0_bar, nu0_bar, measure, dist, float(Z), f.K, f.J)


def influence_closed_form(measure: MeasureSpec, dist, Z: float,
                          cfg: Optional[dict] = None) -> InfluencePair:
    if measure.id not in CLOSED_FORM_INFLUENCE:
        raise ParameterError(f"no closed-form influence function for '{measure.label}'")
    q = _headcount_level(dist, Z)
    if q <= 0.0:
        raise HypothesisError(f"no mass at or below Z={Z:g}")
    J = exact_index(measure, dist, Z, cfg)
    gap = lambda y: measure.relative_gap(y, Z)

    if measure.id in ("shorrocks", "thon"):
        g0_bar = lambda y: 2.0 * (1.0 - np.asarray(dist.cdf(y), dtype=float)) * gap(y)
        nu0_bar = lambda y: -2.0 * gap(y)
        return InfluencePair(g0_bar, nu0_bar, measure, dist, float(Z), 0.0, J)

    if measure.id == "sen":
        k = 1.0
        mean_poor = dist.poor_integral(lambda s, y: np.broadcast_to(y, np.broadcast(s, y).shape), Z, cfg)
        K = 2.0 * (1.0 - mean_poor / (Z * q)) + J / q
    else:
        k = float(measure.parameter)
        tail = dist.poor_integral(lambda s, y: np.clip(1.0 - s / q, 0.0, None) ** (k - 1.0) * gap(y), Z, cfg)
        K = k * (k + 1.0) / q * tail + J / q

    def g0_bar(y):
        r = np.asarray(dist.cdf(y), dtype=float) / q
        return (k + 1.0) * (np.clip(1.0 - r, 0.0, None) ** k * gap(y) - (J / q) * r ** k) + K

    def nu0_bar(y):
        r = np.asarray(dist.cdf(y), dtype=float) / q
        return -(k * (k + 1.0) / q) * (np.clip(1.0 - r, 0.0, None) ** (k - 1.0) * gap(y) + (J / q) * r ** (k - 1.0))

    return InfluencePair(g0_bar, nu0_bar, measure, dist, float(Z), K, J)


def influence_pair(measure: MeasureSpec, dist, Z: float, cfg: Optional[dict] = None,
                   strict: bool = True) -> InfluencePair:
    """Closed form when the family has one, generic construction otherwise."""
    if measure.id in CLOSED_FORM_INFLUENCE:
        return influence_closed_form(measure, dist, Z, cfg)
    return influence_generic(measure, dist, Z, cfg, strict)


# ---------------------------------------------------------
# HD1 / HD2 diagnostics
# ---------------------------------------------------------
def hd_diagnostic(measure: MeasureSpec, n: int, Q: int) -> Tuple[float, float]:
    n, Q = int(n), int(Q)
    if not (1 <= Q <= n):
        raise DomainError(f"need 1 <= Q <= n, got Q={Q}, n={n}")
    mu1, mu2, mu3, mu4 = measure.mu
    j = np.arange(1, Q + 1, dtype=float)
    x, y = Q / n, j / n
    h = float(measure.h(n, Q))
    A = float(measure.A(Q, n, 1.0))
    dev1 = np.max(np.abs(A / h * measure.w(mu1 * n + mu2 * Q - mu3 * j + mu4) - measure.c(x, y)))
    dev2 = np.max(np.abs(measure.w(j) / h - measure.pi(x, y) / n))
    return float(dev1), float(dev2)


def hd_sweep(measure: MeasureSpec, ratio: float = 0.4,
             sizes: Iterable[int] = HD_SWEEP) -> List[dict]:
    """Scaled deviations √n·dev1 and n^{3/2}·dev2 over a grid of sample sizes."""
    if not (0.0 < ratio <= 1.0):
        raise DomainError(f"headcount ratio must lie in (0, 1], got {ratio}")
    rows = []
    for n in sizes:
        Q = max(1, int(round(ratio * n)))
        dev1, dev2 = hd_diagnostic(measure, n, Q)
        rows.append({"n": int(n), "Q": Q, "dev1": dev1, "dev2": dev2,
                     "scaled_dev1": np.sqrt(n) * dev1, "scaled_dev2": n ** 1.5 * dev2})
    return rows
