import io

import numpy as np
import pytest

from conftest import LEGACY_DIR, TOY_CSV, random_grouped
from errors import DomainError, SurveyFormatError
from survey_data import (
    EmpiricalDist,
    GroupedSample,
    HouseholdRecord,
    create_reader,
    empirical_cdf,
    empirical_quantile,
    load_survey,
    pooled_distribution,
    save_survey,
)


def _csv(text):
    return io.StringIO(text)


def test_csv_per_capita_scaling():
    sample = load_survey(_csv("income,eq_adults,group\n10,2,1\n6,1,2\n"), "csv")
    np.testing.assert_array_equal(sample.per_capita_incomes, [5.0, 6.0])
    assert sample.K == 2
    np.testing.assert_array_equal(sample.n_i, [1, 1])
    np.testing.assert_array_equal(sample.p_hat, [0.5, 0.5])


def test_legacy_single_group():
    sample = load_survey((_csv("3\n8\n"), _csv("1 1"), _csv("1\n1\n")), "legacy")
    assert sample.K == 1
    np.testing.assert_array_equal(sample.per_capita_incomes, [3.0, 8.0])


def test_csv_nonpositive_eq_names_record():
    text = "income,eq_adults,group\n1,1,1\n2,1,1\n3,1,2\n4,0,2\n"
    with pytest.raises(SurveyFormatError, match="record 4"):
        load_survey(_csv(text), "csv")


def test_csv_negative_income_rejected():
    with pytest.raises(SurveyFormatError, match="record 2"):
        load_survey(_csv("income,eq_adults,group\n1,1,1\n-2,1,1\n"), "csv")


@pytest.mark.parametrize("header", ["income,eq,group", "income,eq_adults,group,weight", "income,eq_adults"])
def test_csv_header_checked(header):
    body = "\n".join(",".join(["1"] * len(header.split(","))) for _ in range(2))
    with pytest.raises(SurveyFormatError, match="header"):
        load_survey(_csv(f"{header}\n{body}\n"), "csv")


def test_csv_non_numeric_income():
    with pytest.raises(SurveyFormatError, match="record 1"):
        load_survey(_csv("income,eq_adults,group\nabc,1,1\n"), "csv")


def test_labels_relabelled_in_sorted_order():
    sample = load_survey(_csv("income,eq_adults,group\n1,1,9\n2,1,3\n3,1,9\n"), "csv")
    assert sample.labels == (3, 9)
    np.testing.assert_array_equal(sample.group_of, [2, 1, 2])


def test_string_labels_allowed_in_csv():
    sample = load_survey(_csv("income,eq_adults,group\n1,1,Dakar\n2,1,Thies\n"), "csv")
    assert sample.labels == ("Dakar", "Thies")


def test_legacy_label_cap():
    labels = _csv("1\n16\n")
    with pytest.raises(SurveyFormatError, match="1..15"):
        load_survey((_csv("1 2"), _csv("1 1"), labels), "legacy")


def test_legacy_misaligned():
    with pytest.raises(SurveyFormatError, match="not aligned"):
        load_survey((_csv("1 2 3"), _csv("1 1"), _csv("1 1 1")), "legacy")


def test_legacy_directory_files():
    dep, eq, lab = (f"{LEGACY_DIR}/{name}" for name in ("dep.txt", "eq.txt", "labels.txt"))
    sample = load_survey((dep, eq, lab), "legacy")
    csv_sample = load_survey(TOY_CSV, "csv")
    np.testing.assert_array_equal(sample.per_capita_incomes, csv_sample.per_capita_incomes)
    np.testing.assert_array_equal(sample.group_of, csv_sample.group_of)


def test_unknown_format():
    with pytest.raises(SurveyFormatError):
        create_reader("xlsx", TOY_CSV)


def test_empty_stratum_rejected():
    with pytest.raises(SurveyFormatError, match="empty stratum"):
        GroupedSample.build([1.0, 2.0], [1, 1], labels=(1, 2))


def test_from_records():
    sample = GroupedSample.from_records([HouseholdRecord(10, 2, "a"), HouseholdRecord(6, 1, "b")])
    np.testing.assert_array_equal(sample.per_capita_incomes, [5.0, 6.0])


def test_round_trip_csv(tmp_path, rng):
    sample = random_grouped(rng, 40, 3)
    path = tmp_path / "survey.csv"
    save_survey(sample, path, "csv")
    again = load_survey(str(path), "csv")
    assert again.per_capita_incomes.tobytes() == sample.per_capita_incomes.tobytes()
    np.testing.assert_array_equal(again.group_of, sample.group_of)


def test_round_trip_legacy(tmp_path, rng):
    sample = random_grouped(rng, 40, 3)
    files = tuple(str(tmp_path / name) for name in ("dep.txt", "eq.txt", "labels.txt"))
    save_survey(sample, files, "legacy")
    again = load_survey(files, "legacy")
    assert again.per_capita_incomes.tobytes() == sample.per_capita_incomes.tobytes()
    np.testing.assert_array_equal(again.group_of, sample.group_of)


@pytest.mark.parametrize("fmt", ["csv", "legacy"])
def test_round_trip_many_lognormal_values(tmp_path, fmt):
    rng = np.random.default_rng(2024)
    sample = GroupedSample.from_arrays(rng.lognormal(0.0, 1.0, size=1000), rng.integers(1, 6, size=1000))
    target = str(tmp_path / "survey.csv") if fmt == "csv" else \
        tuple(str(tmp_path / name) for name in ("dep.txt", "eq.txt", "labels.txt"))
    save_survey(sample, target, fmt)
    again = load_survey(target, fmt)
    assert again.per_capita_incomes.tobytes() == sample.per_capita_incomes.tobytes()


def test_legacy_tokens_parse_like_float():
    tokens = ["0.1", "2.7182818284590451", "1e-300", "123456789.12345679", "0.30000000000000004"]
    sample = load_survey((_csv(" ".join(tokens)), _csv(" ".join(["1"] * 5)), _csv("1 1 1 1 1")), "legacy")
    np.testing.assert_array_equal(np.sort(sample.per_capita_incomes), np.sort([float(t) for t in tokens]))


def test_legacy_non_numeric_token():
    with pytest.raises(SurveyFormatError, match="income file, record 2: 'x' is not numeric"):
        load_survey((_csv("1 x 3"), _csv("1 1 1"), _csv("1 1 1")), "legacy")


def test_csv_not_utf8(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_bytes(b"income,eq_adults,group\n1,1,\xff\xfe\n")
    with pytest.raises(SurveyFormatError, match="not valid UTF-8"):
        load_survey(str(path), "csv")


def test_legacy_not_utf8(tmp_path):
    dep, eq, lab = (tmp_path / name for name in ("dep.txt", "eq.txt", "labels.txt"))
    dep.write_bytes(b"1 2\n")
    eq.write_bytes(b"1 \xff\n")
    lab.write_bytes(b"1 1\n")
    with pytest.raises(SurveyFormatError, match="eq file is not valid UTF-8"):
        load_survey((str(dep), str(eq), str(lab)), "legacy")


# ---------------------------------------------------------
# Empirical distribution
# ---------------------------------------------------------
@pytest.mark.parametrize("x, expected", [(3.5, 0.6), (0.5, 0.0), (5.0, 1.0), (3.0, 0.6)])
def test_empirical_cdf(five, x, expected):
    assert empirical_cdf(five, x) == pytest.approx(expected)


@pytest.mark.parametrize("t, expected", [(0.2, 1.0), (0.5, 3.0), (1.0, 5.0), (0.6, 3.0), (0.21, 2.0)])
def test_empirical_quantile(five, t, expected):
    assert empirical_quantile(five, t) == expected


@pytest.mark.parametrize("t", [0.0, -0.1, 1.01])
def test_quantile_domain(five, t):
    with pytest.raises(DomainError):
        empirical_quantile(five, t)


def test_galois_pair_with_ties():
    dist = EmpiricalDist.from_values([2, 1, 2, 2, 5, 7, 7])
    for j in range(1, dist.n + 1):
        t = j / dist.n
        assert dist.cdf(dist.quantile(t)) >= t
    for x in dist.sorted_values:
        assert dist.quantile(dist.cdf(x)) <= x


def test_pooled_distribution(toy_sample):
    pooled = pooled_distribution(toy_sample)
    np.testing.assert_array_equal(pooled.sorted_values, [1, 2, 3, 4, 5])
    g1, g2 = toy_sample.group_distribution(1), toy_sample.group_distribution(2)
    assert pooled.cdf(3.5) == pytest.approx(0.4 * g1.cdf(3.5) + 0.6 * g2.cdf(3.5), abs=1e-12)
    assert pooled.cdf(3.5) == pytest.approx(0.6)


def test_pooled_cdf_identity(rng):
    sample = random_grouped(rng, 200, 4)
    pooled = pooled_distribution(sample)
    grid = np.linspace(0.0, pooled.sorted_values[-1] * 1.1, 97)
    mix = sum(p * sample.group_distribution(i + 1).cdf(grid) for i, p in enumerate(sample.p_hat))
    np.testing.assert_allclose(pooled.cdf(grid), mix, rtol=0, atol=1e-12)


def test_single_group_pooled_equals_group():
    sample = GroupedSample.from_arrays([3.0, 1.0, 2.0], [1, 1, 1])
    np.testing.assert_array_equal(pooled_distribution(sample).sorted_values,
                                  sample.group_distribution(1).sorted_values)


def test_poor_integral_is_poor_mean(five):
    # ∫₀^{G(Z)} G⁻¹(s) ds = (1 + 2 + 3) / 5
    value = five.poor_integral(lambda s, y: np.broadcast_to(y, np.broadcast(s, y).shape), 3.5)
    assert value == pytest.approx(1.2, abs=1e-14)
