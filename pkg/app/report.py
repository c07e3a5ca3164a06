# =============================================================================
# report.py - V1.3.0
# Module: output rendering (aligned TSV tables and canonical JSON)
# Notes:
#   - [Add] indices as percentages with 2 decimals, gaps / variances / bounds in
#           scientific notation, JSON keeps full double precision
#   - [Fix] allow_nan=False: a NaN reaching the output is a bug, not a value
# =============================================================================

import json
import logging
from typing import Any, Iterable, List, Optional, Sequence

from decomposition import GapReport, GroupIndex

logger = logging.getLogger("gpi_report")

GLOBAL_AREA = "all"
COMPONENT_KEYS = ("A1", "A2", "A31", "A32", "B1", "B2", "B3")
ZERO_GAP_TOL = 1e-12


def pct(v: float) -> str:
    return f"{100.0 * v:.2f}%"


def sci(v: Optional[float]) -> str:
    if v is None:
        return "-"
    return f"{v:.6e}"


def interval(bounds: Sequence[float]) -> str:
    return f"[{sci(bounds[0])}, {sci(bounds[1])}]"


def _table(rows: Iterable[Sequence[Any]]) -> List[str]:
    rows = [[str(c) for c in r] for r in rows]
    if not rows:
        return []
    widths = [max(len(r[k]) for r in rows if k < len(r)) for k in range(max(len(r) for r in rows))]
    return ["\t".join(c.ljust(widths[k]) if k < len(r) - 1 else c for k, c in enumerate(r)) for r in rows]


def _dump_json(payload: dict) -> str:
    return json.dumps(payload, allow_nan=False, indent=2, ensure_ascii=False) + "\n"


def _text(blocks: List[List[str]]) -> str:
    return "\n\n".join("\n".join(b) for b in blocks if b) + "\n"


def _header(measure: str, Z: float, extra: Sequence[Sequence[Any]] = (), stamp: Optional[str] = None) -> List[str]:
    rows = [("measure", measure), ("poverty_line", f"{Z:g}")] + [tuple(r) for r in extra]
    if stamp:
        rows.append(("generated", stamp))
    return _table(rows)


def area_rows(groups: Sequence[GroupIndex], global_index: float, n: int) -> List[Sequence[Any]]:
    rows: List[Sequence[Any]] = [("area", "index", "size")]
    rows += [(g.label, pct(g.index), g.n_i) for g in groups]
    rows.append((GLOBAL_AREA, pct(global_index), n))
    return rows


def render_index(measure: str, Z: float, groups: Sequence[GroupIndex], global_index: float, n: int,
                 fmt: str = "table", stamp: Optional[str] = None) -> str:
    if fmt == "json":
        payload = {
            "measure": measure, "Z": Z, "n": n, "global_index": global_index,
            "group_indices": [{"label": g.label, "n_i": g.n_i, "index": g.index} for g in groups],
        }
        if stamp:
            payload["generated"] = stamp
        return _dump_json(payload)
    return _text([_header(measure, Z, stamp=stamp), _table(area_rows(groups, global_index, n))])


def render_report(report: GapReport, fmt: str = "table", stamp: Optional[str] = None) -> str:
    if fmt == "json":
        payload = report.to_dict()
        if stamp:
            payload["generated"] = stamp
        return _dump_json(payload)

    label = report.measure if report.parameter is None else f"{report.measure}:{report.parameter:g}"
    comp = report.components
    exact_zero = report.decomposable and abs(report.gd_n) <= ZERO_GAP_TOL
    stats_rows = [
        ("gd_n", "0" if exact_zero else sci(report.gd_n)),
        ("decomposed_index", pct(report.decomposed_index)),
        ("theta1_sq", sci(comp.theta1_sq)),
        ("theta2_sq", sci(comp.theta2_sq)),
        ("theta3_sq", sci(comp.theta3_sq)),
    ]
    stats_rows += [(k, sci(getattr(comp, k))) for k in COMPONENT_KEYS]
    stats_rows += [
        ("ci_gd", interval(report.ci_gd)),
        ("ci_gd0", interval(report.ci_gd0)),
        ("ci_global", interval(report.ci_global)),
    ]
    if comp.subsample:
        stats_rows.append(("subsample", ", ".join(f"{k}:{v}" for k, v in comp.subsample.items())))
    if report.decomposable:
        stats_rows.append(("note", "decomposable measure: gd_n is identically 0"))

    header = _header(label, report.Z, [("n", report.n), ("level", f"{report.level:g}"),
                                       ("cross_weights", comp.cross_weights)], stamp)
    return _text([header, _table(area_rows(report.group_indices, report.global_index, report.n)),
                  _table(stats_rows)])


def render_sim_result(result, fmt: str = "table", stamp: Optional[str] = None) -> str:
    if fmt == "json":
        payload = result.to_dict()
        if stamp:
            payload["generated"] = stamp
        return _dump_json(payload)
    ratio = result.empirical_var / result.mean_plugin_theta_sq if result.mean_plugin_theta_sq > 0 else None
    rows = [
        ("reps", result.reps),
        ("n", result.n),
        ("seed", result.seed),
        ("level", f"{result.level:g}"),
        ("true_gap", sci(result.true_gap)),
        ("mean_gd", sci(result.mean_gd)),
        ("bias", sci(result.bias)),
        ("bias_sd", "-" if result.bias_sd is None else f"{result.bias_sd:.4f}"),
        ("coverage", f"{result.coverage:.4f}"),
        ("empirical_var", sci(result.empirical_var)),
        ("mean_plugin_theta_sq", sci(result.mean_plugin_theta_sq)),
        ("variance_ratio", "-" if ratio is None else f"{ratio:.4f}"),
        ("ks_stat", sci(result.ks_stat)),
        ("ks_pvalue", sci(result.ks_pvalue)),
        ("ks_centered_stat", sci(result.ks_centered_stat)),
        ("ks_centered_pvalue", sci(result.ks_centered_pvalue)),
    ]
    extra = [("generated", stamp)] if stamp else []
    return _text([_table([("measure", result.measure)] + extra), _table(rows)])


def render_diagnostics(measure: str, rows: Sequence[dict], fmt: str = "table",
                       stamp: Optional[str] = None) -> str:
    if fmt == "json":
        payload = {"measure": measure, "sweep": list(rows)}
        if stamp:
            payload["generated"] = stamp
        return _dump_json(payload)
    table = [("n", "Q", "dev1", "dev2", "sqrt_n_dev1", "n32_dev2")]
    table += [(r["n"], r["Q"], sci(r["dev1"]), sci(r["dev2"]), sci(r["scaled_dev1"]), sci(r["scaled_dev2"]))
              for r in rows]
    extra = [("generated", stamp)] if stamp else []
    return _text([_table([("measure", measure)] + extra), _table(table)])
