import numpy as np
import pytest

from errors import DomainError
from indices import closed_form_index, compute_gpi, headcount
from measures import measure_spec

Z = 3.5


@pytest.mark.parametrize("mid, param, expected", [
    ("sen", None, 0.314286),
    ("fgt", 0.0, 0.6),
    ("fgt", 1.0, 0.257143),
    ("shorrocks", None, 0.405714),
    ("kakwani", 2.0, 0.355102),
    ("thon", None, 0.405714 * 5 / 6),
])
def test_five_incomes(five, mid, param, expected):
    result = compute_gpi(five, Z, measure_spec(mid, param))
    assert result.value == pytest.approx(expected, abs=1e-6)
    assert result.Q == 3 and result.n == 5
    assert result.ratio == pytest.approx(0.6)


def test_headcount(five):
    assert headcount(five, Z) == (3, pytest.approx(0.6))
    assert headcount([1, 2, 3.5, 4], Z)[0] == 3


def test_chakravarty_one_is_fgt_one(five):
    a = compute_gpi(five, Z, measure_spec("chakravarty", 1.0)).value
    b = compute_gpi(five, Z, measure_spec("fgt", 1.0)).value
    assert a == pytest.approx(b, abs=1e-15)


MEASURES = [
    ("sen", None), ("shorrocks", None), ("thon", None),
    ("kakwani", 1.0), ("kakwani", 2.0), ("kakwani", 3.5),
    ("fgt", 0.0), ("fgt", 1.0), ("fgt", 2.0),
    ("chakravarty", 0.5), ("chakravarty", 2.0),
]


def _corpus(seed, size=1000):
    """(values, line) pairs: lognormal samples with n <= 200, line at a random quantile."""
    rng = np.random.default_rng(seed)
    for _ in range(size):
        values = rng.lognormal(0.0, float(rng.uniform(0.3, 1.5)), size=int(rng.integers(2, 201)))
        yield values, float(np.quantile(values, rng.uniform(0.1, 0.9)))


@pytest.mark.parametrize("mid, param", MEASURES)
def test_generic_matches_closed_form(mid, param):
    spec = measure_spec(mid, param)
    worst = max(abs(compute_gpi(values, line, spec).value - closed_form_index(values, line, mid, param).value)
                for values, line in _corpus(7))
    assert worst <= 1e-12


def test_exact_reductions_on_corpus():
    sen, kak1 = measure_spec("sen"), measure_spec("kakwani", 1.0)
    sho, tho = measure_spec("shorrocks"), measure_spec("thon")
    for values, line in _corpus(7):
        n = values.size
        assert abs(compute_gpi(values, line, kak1).value - compute_gpi(values, line, sen).value) <= 1e-12
        assert abs(compute_gpi(values, line, tho).value
                   - compute_gpi(values, line, sho).value * n / (n + 1)) <= 1e-12


def test_kakwani_one_equals_sen(rng):
    values = rng.lognormal(0.0, 0.7, size=500)
    sen = compute_gpi(values, 1.0, measure_spec("sen")).value
    kak = compute_gpi(values, 1.0, measure_spec("kakwani", 1.0)).value
    assert kak == pytest.approx(sen, rel=1e-12)


def test_thon_shorrocks_relation(rng):
    values = rng.lognormal(0.0, 1.0, size=300)
    sho = compute_gpi(values, 1.2, measure_spec("shorrocks")).value
    tho = compute_gpi(values, 1.2, measure_spec("thon")).value
    assert tho == pytest.approx(sho * 300 / 301, rel=1e-12)


@pytest.mark.parametrize("mid, param", MEASURES)
def test_scale_invariance(rng, mid, param):
    values = rng.lognormal(0.0, 1.0, size=200)
    spec = measure_spec(mid, param)
    base = compute_gpi(values, 1.1, spec).value
    scaled = compute_gpi(values * 7.25, 1.1 * 7.25, spec).value
    assert scaled == pytest.approx(base, rel=1e-9, abs=1e-14)


@pytest.mark.parametrize("mid, param", [("sen", None), ("shorrocks", None), ("kakwani", 2.0), ("fgt", 1.0)])
def test_poorer_poor_raise_the_index(five, mid, param):
    spec = measure_spec(mid, param)
    base = compute_gpi(five, Z, spec).value
    worse = compute_gpi([0.5, 2, 3, 4, 5], Z, spec).value
    assert worse > base


def test_no_poor_is_zero():
    spec = measure_spec("sen")
    result = compute_gpi([4.0, 5.0], 3.5, spec)
    assert result.value == 0.0 and result.Q == 0 and result.no_poor
    assert closed_form_index([4.0, 5.0], 3.5, "sen").no_poor


def test_everyone_at_zero_income():
    # every income 0: sen = 2/(n(n+1))·Σ(n−j+1) = 1
    assert compute_gpi([0.0] * 4, 1.0, measure_spec("sen")).value == pytest.approx(1.0)
    assert compute_gpi([0.0] * 4, 1.0, measure_spec("fgt", 2.0)).value == pytest.approx(1.0)


def test_income_at_line_counts_as_poor():
    result = compute_gpi([3.5, 5.0], 3.5, measure_spec("fgt", 0.0))
    assert result.Q == 1 and result.value == pytest.approx(0.5)


@pytest.mark.parametrize("line", [0.0, -1.0, float("inf"), float("nan")])
def test_bad_poverty_line(five, line):
    with pytest.raises(DomainError):
        compute_gpi(five, line, measure_spec("sen"))
