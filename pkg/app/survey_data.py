# =============================================================================
# survey_data.py - V1.3.1
# Module: survey ingestion (CSV / legacy dep-eq-labels triple) and empirical laws
# Notes:
#   - [Add] BaseSurveyReader + create_reader() factory, one reader per format
#   - [Add] per-capita scaling happens here; downstream never sees eq_adults
#   - [Fix] quantile index uses ceil(round(t·n, 9)) so grid points j/n do not
#           overshoot by one on float noise
#   - [Fix] save_survey writes repr() floats: load -> save -> load is bit-exact
#   - [Fix] V1.3.1 legacy tokens parsed by numpy float conversion (pd.to_numeric
#           is off by one ulp on some inputs); undecodable bytes are a format error
# =============================================================================

import io
import logging
import os
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Optional, Tuple, Union

import numpy as np
import pandas as pd

from errors import DomainError, SurveyFormatError

logger = logging.getLogger("gpi_survey")

CSV_COLUMNS = ("income", "eq_adults", "group")
LEGACY_MAX_GROUPS = 15
DEFAULT_STEP_NODES = 8

Source = Union[str, os.PathLike, io.IOBase]


@dataclass(frozen=True)
class HouseholdRecord:
    income: float
    equiv_adults: float
    group_label: Any


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------
# Empirical distribution
# ---------------------------------------------------------
@dataclass(frozen=True)
class EmpiricalDist:
    """Right-continuous step cdf over a sorted sample."""

    sorted_values: np.ndarray
    n: int

    @classmethod
    def from_values(cls, values: Iterable[float]) -> "EmpiricalDist":
        arr = np.sort(np.asarray(values, dtype=float), kind="stable")
        if arr.size == 0:
            raise DomainError("empirical distribution needs at least one value")
        return cls(sorted_values=_frozen(arr), n=int(arr.size))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.searchsorted(self.sorted_values, x, side="right") / self.n
        return float(out) if out.ndim == 0 else out

    def quantile(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(~(t > 0.0)) or np.any(t > 1.0):
            raise DomainError("quantile level must lie in (0, 1]")
        idx = np.ceil(np.round(t * self.n, 9)).astype(np.int64) - 1
        out = self.sorted_values[np.clip(idx, 0, self.n - 1)]
        return float(out) if out.ndim == 0 else out

    def headcount(self, Z: float) -> int:
        return int(np.searchsorted(self.sorted_values, Z, side="right"))

    def poor(self, Z: float) -> np.ndarray:
        return self.sorted_values[: self.headcount(Z)]

    def poor_integral(self, F: Callable, Z: float, cfg: Optional[dict] = None) -> float:
        """∫₀^{G(Z)} F(s, G⁻¹(s)) ds, summed step by step (width 1/n) with
        Gauss-Legendre nodes inside each step; exact for polynomial F in s."""
        Q = self.headcount(Z)
        if Q == 0:
            return 0.0
        m = int((cfg or {}).get("step_nodes", DEFAULT_STEP_NODES))
        x, w = np.polynomial.legendre.leggauss(m)
        steps = np.arange(Q, dtype=float)[:, None]
        s = (steps + (x[None, :] + 1.0) / 2.0) / self.n
        y = self.sorted_values[:Q, None]
        vals = np.broadcast_to(F(s, y), s.shape)
        return float(np.sum(vals * (w / (2.0 * self.n))[None, :]))

    @property
    def support(self) -> Tuple[float, float]:
        return float(self.sorted_values[0]), float(self.sorted_values[-1])


def empirical_cdf(dist: EmpiricalDist, x: float) -> float:
    return dist.cdf(x)


def empirical_quantile(dist: EmpiricalDist, t: float) -> float:
    return dist.quantile(t)


# ---------------------------------------------------------
# Grouped sample
# ---------------------------------------------------------
@dataclass(frozen=True)
class GroupedSample:
    per_capita_incomes: np.ndarray
    group_of: np.ndarray          # 1..K, aligned with incomes
    labels: Tuple[Any, ...]       # original label of stratum i at position i-1
    K: int
    n_i: np.ndarray
    p_hat: np.ndarray

    @property
    def n(self) -> int:
        return int(self.per_capita_incomes.size)

    @classmethod
    def from_arrays(cls, incomes, raw_labels, max_groups: Optional[int] = None) -> "GroupedSample":
        incomes = np.asarray(incomes, dtype=float)
        raw = np.asarray(raw_labels)
        if incomes.shape != raw.shape or incomes.ndim != 1:
            raise SurveyFormatError("incomes and group labels must be aligned 1-d arrays")
        if incomes.size == 0:
            raise SurveyFormatError("survey holds no records")
        if raw.dtype == object:
            raw = raw.astype(str)
        uniq, inverse = np.unique(raw, return_inverse=True)
        if max_groups is not None and uniq.size > max_groups:
            raise SurveyFormatError(f"{uniq.size} strata exceed the limit of {max_groups}")
        labels = tuple(v.item() if hasattr(v, "item") else v for v in uniq)
        return cls.build(incomes, inverse.astype(np.int64) + 1, labels)

    @classmethod
    def build(cls, incomes, group_of, labels: Tuple[Any, ...]) -> "GroupedSample":
        incomes = np.array(incomes, dtype=float)
        group_of = np.array(group_of, dtype=np.int64)
        K = len(labels)
        counts = np.bincount(group_of, minlength=K + 1)[1:]
        if counts.size != K or np.any(counts == 0):
            empty = [labels[i] for i in range(min(K, counts.size)) if counts[i] == 0]
            raise SurveyFormatError(f"empty stratum {empty}")
        n = incomes.size
        return cls(
            per_capita_incomes=_frozen(incomes),
            group_of=_frozen(group_of),
            labels=tuple(labels),
            K=K,
            n_i=_frozen(counts.astype(np.int64)),
            p_hat=_frozen(counts / n),
        )

    @classmethod
    def from_records(cls, records: Iterable[HouseholdRecord]) -> "GroupedSample":
        recs = list(records)
        income = np.array([r.income for r in recs], dtype=float)
        eq = np.array([r.equiv_adults for r in recs], dtype=float)
        labels = np.array([r.group_label for r in recs])
        return cls.from_arrays(_per_capita(income, eq), labels)

    def group_values(self, i: int) -> np.ndarray:
        return self.per_capita_incomes[self.group_of == i]

    def group_distribution(self, i: int) -> EmpiricalDist:
        return EmpiricalDist.from_values(self.group_values(i))


def pooled_distribution(sample: GroupedSample) -> EmpiricalDist:
    return EmpiricalDist.from_values(sample.per_capita_incomes)


# ---------------------------------------------------------
# Validation (first offending record is reported, 1-based)
# ---------------------------------------------------------
def _first_bad(mask: np.ndarray) -> Optional[int]:
    bad = np.flatnonzero(mask)
    return int(bad[0]) + 1 if bad.size else None


def _per_capita(income: np.ndarray, eq: np.ndarray) -> np.ndarray:
    row = _first_bad(~np.isfinite(income))
    if row is not None:
        raise SurveyFormatError(f"record {row}: income is missing or not numeric")
    row = _first_bad(income < 0)
    if row is not None:
        raise SurveyFormatError(f"record {row}: negative income ({income[row - 1]:g})")
    row = _first_bad(~np.isfinite(eq))
    if row is not None:
        raise SurveyFormatError(f"record {row}: eq_adults is missing or not numeric")
    row = _first_bad(eq <= 0)
    if row is not None:
        raise SurveyFormatError(f"record {row}: nonpositive eq_adults ({eq[row - 1]:g})")
    return income / eq


# ---------------------------------------------------------
# Readers
# ---------------------------------------------------------
class BaseSurveyReader(ABC):
    def __init__(self, cfg: Optional[dict] = None):
        self.cfg = cfg or {}

    @abstractmethod
    def read(self) -> GroupedSample:
        pass


class CsvSurveyReader(BaseSurveyReader):
    """UTF-8 CSV with header income,eq_adults,group."""

    def __init__(self, source: Source, cfg: Optional[dict] = None):
        super().__init__(cfg)
        self.source = source

    def read(self) -> GroupedSample:
        try:
            frame = pd.read_csv(self.source, encoding="utf-8", float_precision="round_trip",
                                skipinitialspace=True)
        except pd.errors.EmptyDataError:
            raise SurveyFormatError("survey file is empty") from None
        except pd.errors.ParserError as exc:
            raise SurveyFormatError(f"malformed CSV: {exc}") from None
        except UnicodeDecodeError as exc:
            raise SurveyFormatError(f"survey file is not valid UTF-8 (byte {exc.start})") from None

        columns = [str(c).strip() for c in frame.columns]
        missing = [c for c in CSV_COLUMNS if c not in columns]
        unknown = [c for c in columns if c not in CSV_COLUMNS]
        if missing or unknown:
            raise SurveyFormatError(
                f"CSV header must be {','.join(CSV_COLUMNS)} (missing: {missing or '-'}, unknown: {unknown or '-'})")
        frame.columns = columns

        income = pd.to_numeric(frame["income"], errors="coerce").to_numpy(dtype=float)
        eq = pd.to_numeric(frame["eq_adults"], errors="coerce").to_numpy(dtype=float)
        row = _first_bad(frame["group"].isna().to_numpy())
        if row is not None:
            raise SurveyFormatError(f"record {row}: missing group label")

        sample = GroupedSample.from_arrays(_per_capita(income, eq), frame["group"].to_numpy())
        logger.info(f"✅ CSV survey loaded: n={sample.n}, K={sample.K}")
        return sample


def _read_tokens(source: Source, what: str) -> np.ndarray:
    try:
        if hasattr(source, "read"):
            text = source.read()
        else:
            with open(source, "r", encoding="utf-8") as f:
                text = f.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise SurveyFormatError(f"{what} file is not valid UTF-8 (byte {exc.start})") from None

    tokens = text.split()
    try:
        # correctly rounded: a repr() written by save_survey reads back bit-exact
        values = np.array(tokens, dtype=float)
    except ValueError:
        values = pd.to_numeric(pd.Series(tokens, dtype=object), errors="coerce").to_numpy(dtype=float)
    row = _first_bad(np.isnan(values))
    if row is not None:
        raise SurveyFormatError(f"{what} file, record {row}: '{tokens[row - 1]}' is not numeric")
    return values


class LegacyTripleReader(BaseSurveyReader):
    """Three aligned whitespace-separated files: incomes, eq factors, integer labels 1..15."""

    def __init__(self, dep: Source, eq: Source, labels: Source, cfg: Optional[dict] = None):
        super().__init__(cfg)
        self.dep, self.eq, self.labels = dep, eq, labels

    def read(self) -> GroupedSample:
        max_groups = int(self.cfg.get("legacy_max_groups", LEGACY_MAX_GROUPS))
        income = _read_tokens(self.dep, "income")
        eq = _read_tokens(self.eq, "eq")
        labels = _read_tokens(self.labels, "labels")
        if not (income.size == eq.size == labels.size):
            raise SurveyFormatError(
                f"legacy files are not aligned: {income.size} incomes, {eq.size} eq factors, {labels.size} labels")

        row = _first_bad((labels != np.round(labels)) | (labels < 1) | (labels > max_groups))
        if row is not None:
            raise SurveyFormatError(
                f"labels file, record {row}: label {labels[row - 1]:g} is not an integer in 1..{max_groups}")

        sample = GroupedSample.from_arrays(_per_capita(income, eq), labels.astype(np.int64),
                                           max_groups=max_groups)
        logger.info(f"✅ legacy survey loaded: n={sample.n}, K={sample.K}")
        return sample


def create_reader(fmt: str, source: Any, cfg: Optional[dict] = None) -> BaseSurveyReader:
    """`source` is a path/stream for csv, a (dep, eq, labels) triple for legacy."""
    if fmt == "csv":
        return CsvSurveyReader(source, cfg)
    if fmt in ("legacy", "legacy-triple"):
        if not isinstance(source, (tuple, list)) or len(source) != 3:
            raise SurveyFormatError("legacy format needs three sources: dep, eq, labels")
        return LegacyTripleReader(*source, cfg=cfg)
    raise SurveyFormatError(f"unknown survey format '{fmt}' (csv | legacy)")


def load_survey(source: Any, fmt: str = "csv", cfg: Optional[dict] = None) -> GroupedSample:
    return create_reader(fmt, source, cfg).read()


# ---------------------------------------------------------
# Writers
# ---------------------------------------------------------
def _write_text(path: Union[str, os.PathLike], text: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)


def save_survey(sample: GroupedSample, target: Any, fmt: str = "csv") -> None:
    """Canonical form: income = per-capita income, eq_adults = 1."""
    labels = [sample.labels[g - 1] for g in sample.group_of]
    if fmt == "csv":
        frame = pd.DataFrame({
            "income": [repr(float(v)) for v in sample.per_capita_incomes],
            "eq_adults": ["1.0"] * sample.n,
            "group": labels,
        })
        _write_text(target, frame.to_csv(index=False, lineterminator="\n"))
        return
    if fmt in ("legacy", "legacy-triple"):
        dep, eq, lab = target
        if not all(isinstance(v, (int, np.integer)) for v in sample.labels):
            raise SurveyFormatError("legacy format needs integer stratum labels")
        _write_text(dep, "\n".join(repr(float(v)) for v in sample.per_capita_incomes) + "\n")
        _write_text(eq, "\n".join("1.0" for _ in range(sample.n)) + "\n")
        _write_text(lab, "\n".join(str(int(v)) for v in labels) + "\n")
        return
    raise SurveyFormatError(f"unknown survey format '{fmt}' (csv | legacy)")
