import json

import pytest

from conftest import EXPERIMENT_YAML, LEGACY_DIR, TOY_CSV
from decomposition import GapReport, GroupIndex, VarianceComponents
from main import load_config, run
from report import pct, render_report


def _rows(text):
    """Table output -> {first cell: remaining cells}."""
    out = {}
    for line in text.splitlines():
        cells = [c.strip() for c in line.split("\t")]
        if len(cells) > 1:
            out[cells[0]] = cells[1:]
    return out


def _run(capsys, *argv):
    code = run(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_decompose_toy(capsys):
    code, out, _ = _run(capsys, "decompose", "--input", TOY_CSV, "--poverty-line", "3.5", "--measure", "sen")
    assert code == 0
    rows = _rows(out)
    assert rows["gd_n"] == ["3.809524e-02"]
    assert rows["all"] == ["31.43%", "5"]
    assert rows["1"] == ["35.71%", "2"]
    assert rows["2"] == ["22.22%", "3"]
    assert "note" not in rows


def test_kakwani_one_prints_sen_column(capsys):
    _, sen, _ = _run(capsys, "index", "--input", TOY_CSV, "--poverty-line", "3.5", "--measure", "sen")
    _, kak, _ = _run(capsys, "index", "--input", TOY_CSV, "--poverty-line", "3.5", "--measure", "kakwani:1")
    assert {k: v for k, v in _rows(sen).items() if k != "measure"} == \
           {k: v for k, v in _rows(kak).items() if k != "measure"}


def test_decomposable_measure_note(capsys):
    code, out, _ = _run(capsys, "decompose", "--input", TOY_CSV, "--poverty-line", "3.5", "--measure", "fgt:1")
    assert code == 0
    rows = _rows(out)
    assert rows["gd_n"] == ["0"]
    assert "decomposable measure" in rows["note"][0]


@pytest.mark.parametrize("measure", ["gini", "kakwani:x", "kakwani:0.5", "fgt"])
def test_bad_measure_is_usage_error(capsys, measure):
    code, out, err = _run(capsys, "index", "--input", TOY_CSV, "--poverty-line", "3.5", "--measure", measure)
    assert code == 2
    assert out == ""
    assert err.startswith("error: ")
    assert len(err.strip().splitlines()) == 1


def test_malformed_measure_mentions_grammar(capsys):
    _, _, err = _run(capsys, "index", "--input", TOY_CSV, "--poverty-line", "3.5", "--measure", "kakwani:x")
    assert "kakwani:k" in err


def test_missing_file_is_data_error(capsys, tmp_path):
    missing = str(tmp_path / "absent.csv")
    code, _, err = _run(capsys, "index", "--input", missing, "--poverty-line", "3.5")
    assert code == 1
    assert err.startswith("error: ") and "absent.csv" in err


def test_bad_record_is_data_error(capsys, tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("income,eq_adults,group\n1,1,1\n2,0,1\n", encoding="utf-8")
    code, _, err = _run(capsys, "index", "--input", str(path), "--poverty-line", "3.5")
    assert code == 1
    assert "record 2" in err


def test_undecodable_file_is_one_line_data_error(capsys, tmp_path):
    path = tmp_path / "bad.csv"
    path.write_bytes(b"income,eq_adults,group\n1,1,\xff\xfe\n")
    code, out, err = _run(capsys, "decompose", "--input", str(path), "--poverty-line", "3.5")
    assert code == 1 and out == ""
    assert err.startswith("error: ") and "UTF-8" in err
    assert len(err.strip().splitlines()) == 1


@pytest.mark.parametrize("argv", [
    ["index", "--input", TOY_CSV],
    ["index", "--input", TOY_CSV, "--poverty-line", "-1"],
    ["index", "--poverty-line", "3.5"],
    ["decompose", "--input", TOY_CSV, "--poverty-line", "3.5", "--output", "xml"],
    [],
    ["plot"],
])
def test_usage_errors(capsys, argv):
    code, _, err = _run(capsys, *argv)
    assert code == 2
    assert err.startswith("error: ")


def test_output_is_deterministic(capsys):
    argv = ["decompose", "--input", TOY_CSV, "--poverty-line", "3.5", "--measure", "shorrocks"]
    _, first, _ = _run(capsys, *argv)
    _, second, _ = _run(capsys, *argv)
    assert first == second
    assert "generated" not in first


def test_timestamp_opt_in(capsys):
    _, out, _ = _run(capsys, "index", "--input", TOY_CSV, "--poverty-line", "3.5", "--timestamp")
    assert "generated" in _rows(out)


def test_json_and_table_agree(capsys):
    argv = ["decompose", "--input", TOY_CSV, "--poverty-line", "3.5", "--measure", "kakwani:2"]
    _, table, _ = _run(capsys, *argv)
    _, raw, _ = _run(capsys, *argv, "--output", "json")
    payload = json.loads(raw)
    rows = _rows(table)

    def same(text, value):
        return float(text) == pytest.approx(value, rel=5e-4, abs=1e-15)

    assert same(rows["gd_n"][0], payload["gd_n"])
    assert same(rows["theta1_sq"][0], payload["components"]["theta1_sq"])
    assert same(rows["all"][0].rstrip("%"), 100.0 * payload["global_index"])
    lo, hi = rows["ci_gd"][0].strip("[]").split(", ")
    assert same(lo, payload["ci_gd"][0]) and same(hi, payload["ci_gd"][1])
    assert payload["measure"] == "kakwani" and payload["parameter"] == 2.0


def test_legacy_triple_matches_csv(capsys):
    dep, eq, lab = (f"{LEGACY_DIR}/{name}" for name in ("dep.txt", "eq.txt", "labels.txt"))
    _, csv_out, _ = _run(capsys, "decompose", "--input", TOY_CSV, "--poverty-line", "3.5")
    _, triple, _ = _run(capsys, "decompose", "--legacy", dep, eq, lab, "--poverty-line", "3.5")
    _, folder, _ = _run(capsys, "decompose", "--format", "legacy", "--input", LEGACY_DIR, "--poverty-line", "3.5")
    assert csv_out == triple == folder


def test_diagnose(capsys):
    code, out, _ = _run(capsys, "diagnose", "--measure", "sen", "--sweep", "100,1000")
    assert code == 0
    rows = _rows(out)
    assert rows["100"][0] == "40"
    assert rows["100"][1] == "1.000000e-02"
    assert rows["1000"][1] == "1.000000e-03"


def test_diagnose_bad_sweep(capsys):
    code, _, err = _run(capsys, "diagnose", "--sweep", "10,abc")
    assert code == 2 and "--sweep" in err


def test_simulate_small(capsys):
    code, out, _ = _run(capsys, "simulate", "--config", EXPERIMENT_YAML, "--reps", "100", "--n", "120",
                        "--seed", "9", "--output", "json")
    assert code == 0
    payload = json.loads(out)
    assert payload["reps"] == 100 and payload["n"] == 120 and payload["seed"] == 9
    assert 0.0 <= payload["coverage"] <= 1.0


def test_simulate_too_few_reps(capsys):
    code, _, err = _run(capsys, "simulate", "--config", EXPERIMENT_YAML, "--reps", "10")
    assert code == 1
    assert "at least 100" in err


# ---------------------------------------------------------
# Settings and rendering
# ---------------------------------------------------------
def test_settings_merge(tmp_path):
    path = tmp_path / "settings.yaml"
    path.write_text("decomposition:\n  cross_weights: display\n", encoding="utf-8")
    cfg = load_config(str(path))
    assert cfg["decomposition"]["cross_weights"] == "display"
    assert cfg["decomposition"]["clamp_tolerance"] == 1e-10
    assert cfg["quadrature"]["nodes"] == 256


def test_settings_errors(capsys, tmp_path):
    empty = tmp_path / "empty.yaml"
    empty.write_text("", encoding="utf-8")
    code, _, err = _run(capsys, "diagnose", "--settings", str(empty))
    assert code == 1 and "empty" in err
    code, _, err = _run(capsys, "diagnose", "--settings", str(tmp_path / "none.yaml"))
    assert code == 1 and "not found" in err


def test_display_weights_from_settings(capsys, tmp_path):
    path = tmp_path / "settings.yaml"
    path.write_text("decomposition:\n  cross_weights: display\n", encoding="utf-8")
    _, out, _ = _run(capsys, "decompose", "--input", TOY_CSV, "--poverty-line", "3.5",
                        "--measure", "fgt:1", "--settings", str(path))
    assert _rows(out)["cross_weights"] == ["display"]


def test_percentage_cell():
    assert pct(0.3471) == "34.71%"


def test_render_report_global_cell():
    comp = VarianceComponents(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, [0.0], [0.0], [0.0], 0.0, 0.0, 0.0)
    report = GapReport(
        measure="sen", parameter=None, Z=1.0, n=3278, global_index=0.3471,
        group_indices=(GroupIndex("Dakar", 3278, 0.3471),), gd_n=0.0, decomposed_index=0.3471,
        components=comp, ci_gd=(0.0, 0.0), ci_gd0=(0.0, 0.0), ci_global=(0.3471, 0.3471), level=0.95,
    )
    rows = _rows(render_report(report))
    assert rows["all"] == ["34.71%", "3278"]
    assert rows["Dakar"] == ["34.71%", "3278"]
