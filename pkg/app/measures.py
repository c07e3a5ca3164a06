# =============================================================================
# measures.py - V1.3.0
# Module: poverty measure registry (GPI parameters, c/π kernels, HD normalizers)
# Notes:
#   - [Add] MEASURE_MAP: one builder per family, parameter arity checked at lookup
#   - [Add] fixed_normalizer flag: B/h is identically 1 for fgt, chakravarty,
#           shorrocks and thon, so their influence functions carry no π-branch
#   - [Fix] kakwani h default = Q·n^k (matches sen's nQ at k = 1)
# =============================================================================

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from errors import ParameterError

logger = logging.getLogger("gpi_measures")

MEASURE_GRAMMAR = "sen | shorrocks | thon | kakwani:k (k >= 1) | fgt:a (a >= 0) | chakravarty:a (a >= 0)"

# Weight / deformation lambdas (vectorised, float arrays in and out)
w_unit     = lambda u: np.ones_like(np.asarray(u, dtype=float))
w_identity = lambda u: np.asarray(u, dtype=float)
d_identity = lambda u: np.asarray(u, dtype=float)
delta_id   = lambda v: v

# Partial-derivative helpers
zeros_xy = lambda x, y: np.zeros(np.broadcast(np.asarray(x, dtype=float), np.asarray(y, dtype=float)).shape)
ones_xy  = lambda x, y: np.ones(np.broadcast(np.asarray(x, dtype=float), np.asarray(y, dtype=float)).shape)


def _power_sum(Q: int, k: float) -> float:
    if Q <= 0:
        return 0.0
    return float(np.sum(np.arange(1, Q + 1, dtype=float) ** k))


def _pos(v):
    return np.clip(np.asarray(v, dtype=float), 0.0, None)


@dataclass(frozen=True)
class MeasureSpec:
    """Everything a measure needs: GPI slots, (c, π) kernels and their partials,
    the HD normalizer h and the exact-index kernel L with J = ∫₀^q L(q,s)γ(G⁻¹(s))ds."""

    id: str
    parameter: Optional[float]
    w: Callable
    d: Callable
    A: Callable[[int, int, float], float]
    B: Callable[[int, int], float]
    mu: Tuple[float, float, float, float]
    c: Callable
    pi: Callable
    dc_dx: Callable
    dc_dy: Callable
    dpi_dx: Callable
    dpi_dy: Callable
    h: Callable[[int, int], float]
    kernel: Callable
    delta: Callable = delta_id
    transform: Optional[Callable] = None
    fixed_normalizer: bool = False
    decomposable: bool = False

    @property
    def label(self) -> str:
        if self.parameter is None:
            return self.id
        return f"{self.id}:{self.parameter:g}"

    def relative_gap(self, y, Z: float) -> np.ndarray:
        """γ(y) = d((Z − y)/Z)·1(y ≤ Z), on transformed incomes when the measure asks for it."""
        y = np.asarray(y, dtype=float)
        poor = y <= Z
        if self.transform is None:
            u = (Z - y) / Z
        else:
            tz = self.transform(Z)
            u = (tz - self.transform(np.where(poor, y, Z))) / tz
        u = np.where(poor, u, 0.0)
        return np.where(poor, self.d(u), 0.0)


# ---------------------------------------------------------
# Builders
# ---------------------------------------------------------
def _fgt(alpha: float) -> MeasureSpec:
    return MeasureSpec(
        id="fgt", parameter=alpha,
        w=w_unit, d=lambda u: np.asarray(u, dtype=float) ** alpha,
        A=lambda Q, n, Z: Q, B=lambda Q, n: Q, mu=(0.0, 0.0, 0.0, 0.0),
        c=ones_xy, pi=lambda x, y: ones_xy(x, y) / x,
        dc_dx=zeros_xy, dc_dy=zeros_xy,
        dpi_dx=lambda x, y: -ones_xy(x, y) / x ** 2, dpi_dy=zeros_xy,
        h=lambda n, Q: Q,
        kernel=lambda q, s: ones_xy(q, s),
        fixed_normalizer=True, decomposable=True,
    )


def _chakravarty(alpha: float) -> MeasureSpec:
    base = _fgt(1.0)
    return MeasureSpec(
        **{**base.__dict__, "id": "chakravarty", "parameter": alpha, "d": d_identity,
           "transform": lambda v: np.asarray(v, dtype=float) ** alpha}
    )


def _kakwani(k: float, label: str = "kakwani") -> MeasureSpec:
    return MeasureSpec(
        id=label, parameter=None if label == "sen" else k,
        w=lambda u: np.asarray(u, dtype=float) ** k, d=d_identity,
        A=lambda Q, n, Z: Q, B=lambda Q, n: _power_sum(Q, k), mu=(0.0, 1.0, 1.0, 1.0),
        c=lambda x, y: _pos(np.asarray(x) - np.asarray(y)) ** k,
        pi=lambda x, y: np.asarray(y, dtype=float) ** k / x,
        dc_dx=lambda x, y: k * _pos(np.asarray(x) - np.asarray(y)) ** (k - 1),
        dc_dy=lambda x, y: -k * _pos(np.asarray(x) - np.asarray(y)) ** (k - 1),
        dpi_dx=lambda x, y: -np.asarray(y, dtype=float) ** k / x ** 2,
        dpi_dy=lambda x, y: k * np.asarray(y, dtype=float) ** (k - 1) / x,
        h=lambda n, Q: Q * float(n) ** k,
        kernel=lambda q, s: (k + 1.0) * _pos(1.0 - np.asarray(s) / q) ** k,
    )


def _sen() -> MeasureSpec:
    spec = _kakwani(1.0, label="sen")
    # closed-form normalizers for k = 1
    return MeasureSpec(**{**spec.__dict__, "B": lambda Q, n: Q * (Q + 1) / 2.0,
                          "h": lambda n, Q: float(n) * Q})


def _rank_weighted(label: str, n_shift: int) -> MeasureSpec:
    # shorrocks (n_shift=0) normalises by n², thon (n_shift=1) by n(n+1)
    return MeasureSpec(
        id=label, parameter=None,
        w=w_identity, d=d_identity,
        A=lambda Q, n, Z: Q * (Q + 1) / (2.0 * (n + n_shift)),
        B=lambda Q, n: Q * (Q + 1) / 2.0, mu=(2.0, 0.0, 2.0, 1.0),
        c=lambda x, y: 2.0 * (1.0 - np.asarray(y, dtype=float)) * ones_xy(x, y),
        pi=lambda x, y: 2.0 * np.asarray(y, dtype=float) / np.asarray(x, dtype=float) ** 2,
        dc_dx=zeros_xy, dc_dy=lambda x, y: -2.0 * ones_xy(x, y),
        dpi_dx=lambda x, y: -4.0 * np.asarray(y, dtype=float) / np.asarray(x, dtype=float) ** 3,
        dpi_dy=lambda x, y: 2.0 * ones_xy(x, y) / np.asarray(x, dtype=float) ** 2,
        h=lambda n, Q: Q * (Q + 1) / 2.0,
        kernel=lambda q, s: 2.0 * (1.0 - np.asarray(s, dtype=float)) * ones_xy(q, s),
        fixed_normalizer=True,
    )


# ---------------------------------------------------------
# Registry: id -> (parameter required, builder, description)
# ---------------------------------------------------------
MEASURE_MAP: Dict[str, Tuple[bool, Callable[..., MeasureSpec], str]] = {
    "fgt":         (True,  _fgt,                                  "Foster-Greer-Thorbecke, d(u)=u^a"),
    "chakravarty": (True,  _chakravarty,                          "Chakravarty, 1-(Y/Z)^a"),
    "sen":         (False, _sen,                                  "Sen rank-weighted index"),
    "shorrocks":   (False, lambda: _rank_weighted("shorrocks", 0), "Shorrocks, normalised by n^2"),
    "thon":        (False, lambda: _rank_weighted("thon", 1),      "Thon, normalised by n(n+1)"),
    "kakwani":     (True,  _kakwani,                              "Kakwani generalisation of Sen"),
}

CLOSED_FORM_INFLUENCE = {"sen", "shorrocks", "thon", "kakwani"}


def measure_spec(measure_id: str, parameter: Optional[float] = None,
                 h: Optional[Callable[[int, int], float]] = None) -> MeasureSpec:
    """Build a populated MeasureSpec; `h` overrides the HD normalizer."""
    entry = MEASURE_MAP.get(measure_id)
    if entry is None:
        raise ParameterError(f"unknown measure '{measure_id}', expected {MEASURE_GRAMMAR}")
    needs_param, builder, _ = entry

    if needs_param and parameter is None:
        raise ParameterError(f"measure '{measure_id}' needs a parameter, expected {MEASURE_GRAMMAR}")
    if not needs_param and parameter is not None:
        raise ParameterError(f"measure '{measure_id}' takes no parameter, expected {MEASURE_GRAMMAR}")

    if needs_param:
        parameter = float(parameter)
        if not np.isfinite(parameter):
            raise ParameterError(f"measure '{measure_id}' parameter must be finite")
        if measure_id == "kakwani" and parameter < 1.0:
            raise ParameterError(f"kakwani needs k >= 1, got {parameter:g}")
        if measure_id in ("fgt", "chakravarty") and parameter < 0.0:
            raise ParameterError(f"{measure_id} needs a >= 0, got {parameter:g}")
        spec = builder(parameter)
    else:
        spec = builder()

    if h is not None:
        spec = MeasureSpec(**{**spec.__dict__, "h": h})
    return spec


def parse_measure(text: str) -> Tuple[str, Optional[float]]:
    """'kakwani:2' -> ('kakwani', 2.0); 'sen' -> ('sen', None)."""
    raw = (text or "").strip().lower()
    name, sep, param = raw.partition(":")
    if not name or name not in MEASURE_MAP:
        raise ParameterError(f"malformed measure '{text}', expected {MEASURE_GRAMMAR}")
    if not sep:
        return name, None
    try:
        return name, float(param)
    except ValueError:
        raise ParameterError(f"malformed measure parameter in '{text}', expected {MEASURE_GRAMMAR}") from None


def spec_from_string(text: str) -> MeasureSpec:
    name, param = parse_measure(text)
    return measure_spec(name, param)
