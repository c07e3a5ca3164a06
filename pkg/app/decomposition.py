# =============================================================================
# decomposition.py - V1.3.1
# Module: gap of decomposability, plug-in variance components, intervals
# Notes:
#   - [Add] single integrals over (0, G_i(Z)] are means over the stratum's poor
#           observations; double integrals use the s∧t − st bridge kernel on
#           jump-inclusive empirical cdf values
#   - [Add] CROSS_WEIGHTS table: "proof" (default) carries the √(n_i/n_h) factor
#           of the linearisation, "display" keeps the printed weights
#   - [Add] pair terms may run on a thread pool; reduction order is the task
#           list order, so output is identical for any worker count
#   - [Fix] θ₂², θ₃² computed as Σ p_h (F_h − F̄)², never negative
#   - [Fix] V1.3.1 a subsampled stratum uses the same weighted subsample in
#           A2, A3x, B1, B2 and B3, so θ₁² stays a stratified variance
# =============================================================================

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from asymptotics import influence_pair
from errors import DomainError, NoPoorError, NumericalError
from indices import compute_gpi
from measures import MeasureSpec
from survey_data import EmpiricalDist, GroupedSample, pooled_distribution

logger = logging.getLogger("gpi_decomposition")

DEFAULT_CFG = {
    "clamp_tolerance": 1e-10,
    "poor_subsample_threshold": 20000,
    "subsample_seed": 20240601,
    "cross_weights": "proof",
    "workers": 1,
    "chunk": 2048,
}

# name -> (A31 weight(p_i, p_h), A32 weight(p_i, p_j, p_h), B2/B3 weight(p_i, p_j))
CROSS_WEIGHTS = {
    "proof":   (lambda pi, ph: pi * pi * ph,
                lambda pi, pj, ph: pi * pj * ph,
                lambda pi, pj: pi * pj),
    "display": (lambda pi, ph: pi * ph * ph,
                lambda pi, pj, ph: math.sqrt(pi * pj) * ph * ph,
                lambda pi, pj: pi ** 1.5 * math.sqrt(pj)),
}


@dataclass(frozen=True)
class VarianceComponents:
    A1: float
    A2: float
    A31: float
    A32: float
    B1: float
    B2: float
    B3: float
    F: np.ndarray
    M: np.ndarray
    H: np.ndarray
    theta1_sq: float
    theta2_sq: float
    theta3_sq: float
    cross_weights: str = "proof"
    subsample: Dict[Any, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "A1": self.A1, "A2": self.A2, "A31": self.A31, "A32": self.A32,
            "B1": self.B1, "B2": self.B2, "B3": self.B3,
            "F": [float(v) for v in self.F],
            "M": [float(v) for v in self.M],
            "H": [float(v) for v in self.H],
            "theta1_sq": self.theta1_sq, "theta2_sq": self.theta2_sq, "theta3_sq": self.theta3_sq,
            "cross_weights": self.cross_weights,
            "subsample": {str(k): v for k, v in self.subsample.items()},
        }


@dataclass(frozen=True)
class GroupIndex:
    label: Any
    n_i: int
    index: float


@dataclass(frozen=True)
class GapReport:
    measure: str
    parameter: Optional[float]
    Z: float
    n: int
    global_index: float
    group_indices: Tuple[GroupIndex, ...]
    gd_n: float
    decomposed_index: float
    components: VarianceComponents
    ci_gd: Tuple[float, float]
    ci_gd0: Tuple[float, float]
    ci_global: Tuple[float, float]
    level: float
    decomposable: bool = False

    def to_dict(self) -> dict:
        return {
            "measure": self.measure,
            "parameter": self.parameter,
            "Z": self.Z,
            "n": self.n,
            "level": self.level,
            "global_index": self.global_index,
            "group_indices": [{"label": g.label, "n_i": g.n_i, "index": g.index} for g in self.group_indices],
            "gd_n": self.gd_n,
            "decomposed_index": self.decomposed_index,
            "decomposable": self.decomposable,
            "components": self.components.to_dict(),
            "ci_gd": list(self.ci_gd),
            "ci_gd0": list(self.ci_gd0),
            "ci_global": list(self.ci_global),
        }


# ---------------------------------------------------------
# Gap
# ---------------------------------------------------------
def gap(sample: GroupedSample, Z: float, measure: MeasureSpec) -> Tuple[float, float, Tuple[GroupIndex, ...]]:
    global_index = compute_gpi(pooled_distribution(sample), Z, measure).value
    groups = tuple(
        GroupIndex(sample.labels[i - 1], int(sample.n_i[i - 1]),
                   compute_gpi(sample.group_values(i), Z, measure).value)
        for i in range(1, sample.K + 1)
    )
    decomposed = math.fsum(float(p) * g.index for p, g in zip(sample.p_hat, groups))
    return global_index - decomposed, global_index, groups


# ---------------------------------------------------------
# Plug-in kernels
# ---------------------------------------------------------
def bridge_sum(u: np.ndarray, x: np.ndarray, v: np.ndarray, y: np.ndarray, chunk: int = 2048) -> float:
    """Σ_a Σ_b [min(u_a, v_b) − u_a·v_b]·x_a·y_b, row-chunked."""
    if u.size == 0 or v.size == 0:
        return 0.0
    total = 0.0
    for start in range(0, u.size, chunk):
        sl = slice(start, start + chunk)
        total += float(x[sl] @ (np.minimum.outer(u[sl], v) @ y))
    return total - float(u @ x) * float(v @ y)


def lower_sums(points: np.ndarray, weights: np.ndarray, query: np.ndarray) -> np.ndarray:
    """For each query t: Σ_{points_b ≤ t} weights_b (points sorted ascending)."""
    csum = np.concatenate(([0.0], np.cumsum(weights)))
    return csum[np.searchsorted(points, query, side="right")]


@dataclass
class _Stratum:
    label: Any
    n: int
    p: float
    dist: EmpiricalDist
    poor: np.ndarray          # sorted poor incomes
    s: np.ndarray             # own cdf at poor incomes
    nu: np.ndarray            # pooled ν at poor incomes
    ell: np.ndarray           # g − g_i at poor incomes
    c: np.ndarray             # p_i ν − ν_i at poor incomes
    sub: np.ndarray           # poor indices used as integration points (c, ν side)
    scale: float              # Q_i / len(sub); the ℓ side always uses every observation

    @property
    def mean_ell(self) -> float:
        return float(np.sum(self.ell)) / self.n


def _prepare(sample: GroupedSample, Z: float, measure: MeasureSpec, cfg: dict,
             qcfg: Optional[dict]) -> Tuple[EmpiricalDist, Any, List[_Stratum], Dict[Any, int]]:
    pooled = pooled_distribution(sample)
    Q = pooled.headcount(Z)
    if Q == 0:
        raise NoPoorError(f"no income at or below Z={Z:g} in the pooled sample: no inference possible")
    pooled_inf = influence_pair(measure, pooled, Z, qcfg, strict=False)

    threshold = int(cfg.get("poor_subsample_threshold", DEFAULT_CFG["poor_subsample_threshold"]))
    seed = int(cfg.get("subsample_seed", DEFAULT_CFG["subsample_seed"]))
    strata, subsampled = [], {}
    for i in range(1, sample.K + 1):
        label = sample.labels[i - 1]
        dist = sample.group_distribution(i)
        p = float(sample.p_hat[i - 1])
        poor = dist.poor(Z)
        Qi = poor.size
        if Qi == 0:
            logger.warning(f"⚠️ stratum {label}: no poor observation, contributes nothing to the integrals")
            empty = np.zeros(0)
            strata.append(_Stratum(label, dist.n, p, dist, poor, empty, empty, empty, empty,
                                   np.zeros(0, dtype=np.int64), 1.0))
            continue
        if Qi == dist.n:
            logger.warning(f"⚠️ stratum {label}: every observation is poor")
        group_inf = influence_pair(measure, dist, Z, qcfg, strict=False)
        nu = np.asarray(pooled_inf.nu0(poor), dtype=float)
        ell = np.asarray(pooled_inf.g0(poor), dtype=float) - np.asarray(group_inf.g0(poor), dtype=float)
        c = p * nu - np.asarray(group_inf.nu0(poor), dtype=float)

        sub = np.arange(Qi)
        if Qi > threshold:
            rng = np.random.default_rng([seed, i])
            sub = np.sort(rng.choice(Qi, size=threshold, replace=False))
            subsampled[label] = int(threshold)
            logger.warning(f"⚠️ stratum {label}: {Qi} poor observations, integration points subsampled to {threshold}")
        strata.append(_Stratum(label, dist.n, p, dist, poor, np.asarray(dist.cdf(poor), dtype=float),
                               nu, ell, c, sub, Qi / sub.size))
    return pooled, pooled_inf, strata, subsampled


# ---------------------------------------------------------
# Component terms (each already divided by the stratum sizes)
# ---------------------------------------------------------
def _term_A1(si: _Stratum) -> float:
    return float(np.sum(si.ell ** 2)) / si.n - si.mean_ell ** 2


def _term_A2(si: _Stratum, chunk: int) -> float:
    a = si.sub
    return si.scale ** 2 * bridge_sum(si.s[a], si.c[a], si.s[a], si.c[a], chunk) / (si.n * si.n)


def _term_B1(si: _Stratum) -> float:
    a = si.sub
    if a.size == 0:
        return 0.0
    inner = lower_sums(si.poor, si.ell, si.poor[a]) / si.n - si.s[a] * si.mean_ell
    return si.scale * float(inner @ si.c[a]) / si.n


def _term_I(si: _Stratum, sj: _Stratum, sh: _Stratum, chunk: int) -> float:
    a, b = si.sub, sj.sub
    if a.size == 0 or b.size == 0:
        return 0.0
    u = np.asarray(sh.dist.cdf(si.poor[a]), dtype=float)
    v = np.asarray(sh.dist.cdf(sj.poor[b]), dtype=float)
    return si.scale * sj.scale * bridge_sum(u, si.nu[a], v, sj.nu[b], chunk) / (si.n * sj.n)


def _term_B2(si: _Stratum, sj: _Stratum, chunk: int) -> float:
    a, b = si.sub, sj.sub
    if a.size == 0 or b.size == 0:
        return 0.0
    v = np.asarray(si.dist.cdf(sj.poor[b]), dtype=float)
    return si.scale * sj.scale * bridge_sum(si.s[a], si.c[a], v, sj.nu[b], chunk) / (si.n * sj.n)


def _term_B3(si: _Stratum, sj: _Stratum) -> float:
    b = sj.sub
    if si.poor.size == 0 or b.size == 0:
        return 0.0
    u = np.asarray(si.dist.cdf(sj.poor[b]), dtype=float)
    inner = lower_sums(si.poor, si.ell, sj.poor[b]) / si.n - u * si.mean_ell
    return sj.scale * float(inner @ sj.nu[b]) / sj.n


def _run_tasks(tasks: Sequence[Tuple], workers: int) -> List[float]:
    run = lambda task: task[0](*task[1:])
    if workers <= 1 or len(tasks) < 2:
        return [run(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, tasks))


def _spread(values: np.ndarray, p: np.ndarray) -> float:
    """Σ p_h v_h² − (Σ p_h v_h)², evaluated as Σ p_h (v_h − v̄)²."""
    mean = math.fsum(p * values)
    return math.fsum(p * (values - mean) ** 2)


def variance_components(sample: GroupedSample, Z: float, measure: MeasureSpec,
                        cfg: Optional[dict] = None, qcfg: Optional[dict] = None) -> VarianceComponents:
    cfg = {**DEFAULT_CFG, **(cfg or {})}
    scheme = str(cfg.get("cross_weights", "proof"))
    if scheme not in CROSS_WEIGHTS:
        raise DomainError(f"cross_weights must be one of {sorted(CROSS_WEIGHTS)}, got '{scheme}'")
    w31, w32, wB = CROSS_WEIGHTS[scheme]
    chunk = int(cfg.get("chunk", DEFAULT_CFG["chunk"]))

    pooled, pooled_inf, strata, subsampled = _prepare(sample, Z, measure, cfg, qcfg)
    K = len(strata)
    p = np.array([s.p for s in strata])

    # task = (fn, *args); weights applied after the ordered reduction
    tasks, keys = [], []
    for i, si in enumerate(strata):
        tasks += [(_term_A1, si), (_term_A2, si, chunk), (_term_B1, si)]
        keys += [("A1", si.p), ("A2", si.p), ("B1", si.p)]
    for i, si in enumerate(strata):
        for h, sh in enumerate(strata):
            if h != i:
                tasks.append((_term_I, si, si, sh, chunk))
                keys.append(("A31", w31(si.p, sh.p)))
        for j, sj in enumerate(strata):
            if j == i:
                continue
            for h, sh in enumerate(strata):
                if h not in (i, j):
                    tasks.append((_term_I, si, sj, sh, chunk))
                    keys.append(("A32", w32(si.p, sj.p, sh.p)))
            tasks += [(_term_B2, si, sj, chunk), (_term_B3, si, sj)]
            keys += [("B2", wB(si.p, sj.p)), ("B3", wB(si.p, sj.p))]

    values = _run_tasks(tasks, int(cfg.get("workers", 1)))
    parts: Dict[str, List[float]] = {k: [] for k in ("A1", "A2", "A31", "A32", "B1", "B2", "B3")}
    for (name, weight), value in zip(keys, values):
        parts[name].append(weight * value)
    comp = {name: math.fsum(vals) for name, vals in parts.items()}

    theta1_sq = comp["A1"] + comp["A2"] + (comp["A31"] + comp["A32"]) + 2.0 * (comp["B1"] + comp["B2"] + comp["B3"])
    tol = float(cfg.get("clamp_tolerance", DEFAULT_CFG["clamp_tolerance"]))
    if theta1_sq < 0.0:
        if theta1_sq < -tol:
            raise NumericalError(f"plug-in theta1^2 = {theta1_sq:.3e} is below -{tol:g}")
        logger.warning(f"⚠️ theta1^2 = {theta1_sq:.3e} clamped to 0")
        theta1_sq = 0.0

    # F_h, M_h
    all_poor = pooled.poor(Z)
    all_nu = np.asarray(pooled_inf.nu0(all_poor), dtype=float)
    H = np.array([float(np.asarray(s.dist.cdf(all_poor), dtype=float) @ all_nu) / pooled.n for s in strata])
    Eg = np.array([float(np.sum(pooled_inf.g0(s.poor))) / s.n if s.poor.size else 0.0 for s in strata])
    J = np.array([compute_gpi(s.dist, Z, measure).value for s in strata])
    F = Eg - J + H
    M = Eg + H

    logger.debug(f"📊 components {comp} theta1^2={theta1_sq:.6e} ({scheme} weights, K={K})")
    return VarianceComponents(
        A1=comp["A1"], A2=comp["A2"], A31=comp["A31"], A32=comp["A32"],
        B1=comp["B1"], B2=comp["B2"], B3=comp["B3"],
        F=F, M=M, H=H,
        theta1_sq=theta1_sq, theta2_sq=_spread(F, p), theta3_sq=_spread(M, p),
        cross_weights=scheme, subsample=subsampled,
    )


# ---------------------------------------------------------
# Intervals and full report
# ---------------------------------------------------------
def confidence_interval(gd_n: float, theta_sq: float, n: int, level: float) -> Tuple[float, float]:
    if not (0.0 < level < 1.0):
        raise DomainError(f"confidence level must lie in (0, 1), got {level}")
    if not theta_sq >= 0.0:
        raise DomainError(f"variance must be >= 0, got {theta_sq}")
    if n < 1:
        raise DomainError(f"sample size must be >= 1, got {n}")
    z = float(stats.norm.ppf(0.5 + level / 2.0))
    half = z * math.sqrt(theta_sq / n)
    return gd_n - half, gd_n + half


def decompose(sample: GroupedSample, Z: float, measure: MeasureSpec, level: float = 0.95,
              cfg: Optional[dict] = None, qcfg: Optional[dict] = None) -> GapReport:
    if not (0.0 < level < 1.0):
        raise DomainError(f"confidence level must lie in (0, 1), got {level}")
    gd_n, global_index, groups = gap(sample, Z, measure)
    comp = variance_components(sample, Z, measure, cfg, qcfg)
    n = sample.n
    ci_gd = confidence_interval(gd_n, comp.theta1_sq + comp.theta2_sq, n, level)
    ci_gd0 = confidence_interval(gd_n, comp.theta1_sq + comp.theta3_sq, n, level)
    decomposed = math.fsum(float(p) * g.index for p, g in zip(sample.p_hat, groups))
    logger.info(f"📊 {measure.label}: gd_n={gd_n:.6e} over K={sample.K}, n={n}")
    return GapReport(
        measure=measure.id, parameter=measure.parameter, Z=float(Z), n=n,
        global_index=global_index, group_indices=groups, gd_n=gd_n,
        decomposed_index=decomposed, components=comp,
        ci_gd=ci_gd, ci_gd0=ci_gd0,
        ci_global=(ci_gd[0] + decomposed, ci_gd[1] + decomposed),
        level=float(level), decomposable=measure.decomposable,
    )
