import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drfkit.survival import (
    DegenerateSplit,
    SurvivalRecord,
    feature_screen,
    holm_bonferroni,
    impute_censored,
    km_estimate,
    logrank_test,
    median_split,
)
from oracles import holm_oracle, km_oracle, logrank_oracle


def recs(pairs):
    return [SurvivalRecord(f"p{i}", t, e) for i, (t, e) in enumerate(pairs)]


# ---- records and imputation -------------------------------------------------

def test_record_validation():
    with pytest.raises(ValueError):
        SurvivalRecord("a", -1.0, 1)
    with pytest.raises(ValueError):
        SurvivalRecord("a", 1.0, 2)
    with pytest.raises(ValueError):
        SurvivalRecord("a", float("nan"), 1)


def test_impute_examples():
    out = impute_censored(recs([(10, 1), (20, 1), (30, 1), (15, 0)]))
    assert out[3].time_days == 25.0 and out[3].event == 0
    out = impute_censored(recs([(10, 1), (40, 0)]))
    assert out[1].time_days == 40.0
    r = recs([(10, 1), (20, 1)])
    assert impute_censored(r) == r
    with pytest.raises(ValueError):
        impute_censored([])


def test_impute_includes_equal_death_time():
    out = impute_censored(recs([(15, 1), (45, 1), (15, 0)]))
    assert out[2].time_days == 30.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1000), st.integers(0, 1)), min_size=1, max_size=30))
def test_impute_never_decreases(pairs):
    before = recs(pairs)
    for a, b in zip(before, impute_censored(before)):
        assert b.time_days >= a.time_days
        assert b.event == a.event
        if a.event == 1:
            assert b.time_days == a.time_days


# ---- median split -----------------------------------------------------------

def test_median_split_examples():
    high, thr = median_split([1, 2, 3, 4])
    assert thr == 2.5 and high.tolist() == [False, False, True, True]
    high, thr = median_split([3, 1, 2])
    assert thr == 2 and high.tolist() == [True, False, True]
    with pytest.raises(DegenerateSplit):
        median_split([5, 5, 5])
    with pytest.raises(ValueError):
        median_split([1])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=2, max_size=40))
def test_median_split_monotone_invariance(values):
    values = np.array(values)
    # Dense ranks squared: strictly increasing and exactly representable.
    transformed = (np.searchsorted(np.unique(values), values) + 1.0) ** 2
    try:
        a, _ = median_split(values)
    except DegenerateSplit:
        with pytest.raises(DegenerateSplit):
            median_split(transformed)
        return
    b, _ = median_split(transformed)
    assert a.tolist() == b.tolist()


# ---- Kaplan-Meier -----------------------------------------------------------

def test_km_three_deaths():
    c = km_estimate([1, 2, 3], [1, 1, 1])
    assert c.times.tolist() == [0, 1, 2, 3]
    np.testing.assert_array_equal(c.survival, [1, 2 / 3, 1 / 3, 0])
    assert c.median_survival == 2
    assert c.at_risk.tolist() == [3, 3, 2, 1]


def test_km_all_censored():
    c = km_estimate([1, 2, 3], [0, 0, 0])
    assert c.survival.tolist() == [1.0]
    assert c.median_survival is None


def test_km_censoring_shrinks_risk_set():
    c = km_estimate([1, 2, 3], [1, 0, 1])
    assert c.at(1) == pytest.approx(2 / 3, abs=0)
    assert c.at(2.5) == pytest.approx(2 / 3, abs=0)
    assert c.at(3) == 0.0
    assert c.at(0.5) == 1.0


@pytest.mark.parametrize("seed", range(10))
def test_km_matches_product_limit_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 40))
    t = rng.integers(1, 20, n).astype(float)
    e = (rng.random(n) < 0.7).astype(int)
    c = km_estimate(t, e)
    want = km_oracle(t.tolist(), e.tolist())
    assert c.times[1:].tolist() == [w[0] for w in want]
    np.testing.assert_allclose(c.survival[1:], [w[1] for w in want], rtol=0, atol=1e-15)
    assert np.all(np.diff(c.survival) <= 0)
    below = [w[0] for w in want if w[1] <= 0.5]
    assert c.median_survival == (below[0] if below else None)


def test_km_no_censoring_is_empirical():
    t = np.array([5.0, 3.0, 9.0, 3.0, 7.0])
    c = km_estimate(t, np.ones(5, int))
    for u in c.times:
        assert c.at(u) == pytest.approx(np.mean(t > u), abs=1e-15)
    assert c.survival[-1] == 0


# ---- log-rank ---------------------------------------------------------------

def test_logrank_identical_groups():
    t = [3, 5, 7, 7, 9]
    e = [1, 0, 1, 1, 1]
    r = logrank_test(t, e, t, e)
    assert r.chi2 == 0 and r.p_value == 1 and r.hazard_ratio == 1


def test_logrank_hand_table():
    # t=1: nA=2 nB=2 d=1 (A); t=2: nA=1 nB=2 d=1 (A); t=3: nA=0 nB=2 d=1; t=4: nB=1 d=1
    r = logrank_test([1, 2], [1, 1], [3, 4], [1, 1])
    ea = 1 * 2 / 4 + 1 * 1 / 3
    eb = 1 * 2 / 4 + 1 * 2 / 3 + 1 + 1
    v = (2 / 4) * (2 / 4) * 3 / 3 + (1 / 3) * (2 / 3) * 2 / 2
    assert r.expected == pytest.approx((ea, eb), abs=1e-12)
    assert r.chi2 == pytest.approx((2 - ea) ** 2 / v, abs=1e-9)
    assert r.hazard_ratio == pytest.approx((2 / ea) / (2 / eb), abs=1e-9)
    half = 1.96 * math.sqrt(1 / ea + 1 / eb)
    assert r.ci_low == pytest.approx(r.hazard_ratio * math.exp(-half), rel=1e-12)
    assert r.ci_high == pytest.approx(r.hazard_ratio * math.exp(half), rel=1e-12)


def test_logrank_swap_symmetry():
    rng = np.random.default_rng(1)
    ta, tb = rng.exponential(5, 20), rng.exponential(9, 25)
    ea, eb = (rng.random(20) < 0.8).astype(int), (rng.random(25) < 0.8).astype(int)
    a = logrank_test(ta, ea, tb, eb)
    b = logrank_test(tb, eb, ta, ea)
    assert a.chi2 == b.chi2
    assert a.hazard_ratio == pytest.approx(1 / b.hazard_ratio, rel=1e-12)
    assert a.ci_low <= a.hazard_ratio <= a.ci_high


@pytest.mark.parametrize("seed", range(10))
def test_logrank_matches_risk_table_oracle(seed):
    rng = np.random.default_rng(seed + 100)
    na, nb = rng.integers(3, 30, 2)
    ta = rng.integers(1, 15, na).astype(float)
    tb = rng.integers(1, 15, nb).astype(float)
    ea = (rng.random(na) < 0.7).astype(int)
    eb = (rng.random(nb) < 0.7).astype(int)
    r = logrank_test(ta, ea, tb, eb)
    chi2, oa, exa, ob, exb = logrank_oracle(ta.tolist(), ea.tolist(), tb.tolist(), eb.tolist())
    assert r.chi2 == pytest.approx(chi2, abs=1e-9)
    assert r.observed == (oa, ob)
    assert r.expected == pytest.approx((exa, exb), abs=1e-9)


def test_logrank_no_events():
    r = logrank_test([1, 2], [0, 0], [3, 4], [0, 0])
    assert r.p_value == 1.0 and r.chi2 == 0.0
    assert not r.hr_defined
    with pytest.raises(ValueError):
        logrank_test([], [], [1], [1])


def test_logrank_p_never_zero():
    t = np.arange(1, 201, dtype=float)
    r = logrank_test(t[:100], np.ones(100, int), t[100:] * 100, np.ones(100, int))
    assert 0 < r.p_value < 1e-20


# ---- Holm -------------------------------------------------------------------

def test_holm_examples():
    np.testing.assert_allclose(holm_bonferroni([0.01, 0.02, 0.04]), [0.03, 0.04, 0.04], rtol=1e-15)
    assert holm_bonferroni([0.3]).tolist() == [0.3]
    assert holm_bonferroni([1, 1, 1]).tolist() == [1, 1, 1]
    with pytest.raises(ValueError):
        holm_bonferroni([1.2])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=30))
def test_holm_properties(p):
    adj = holm_bonferroni(p)
    assert np.all(adj >= np.array(p))
    assert np.all(adj <= 1)
    np.testing.assert_allclose(adj, holm_oracle(p), rtol=0, atol=0)
    order = np.argsort(p, kind="stable")
    assert np.all(np.diff(adj[order]) >= 0)


# ---- screen -----------------------------------------------------------------

def _cohort(seed, n=100):
    rng = np.random.default_rng(seed)
    t = rng.exponential(400, n)
    e = (rng.random(n) < 0.9).astype(int)
    return rng, t, e


def test_screen_arity_and_dominance():
    rng, t, e = _cohort(0)
    names = [f"f{i}" for i in range(41)]
    tables = {"SRF": rng.normal(size=(100, 41)), "DRF": rng.normal(size=(100, 41))}
    tables["DRF"][:, 3] = 1.0  # degenerate column
    rows = feature_screen(tables, t, e, names)
    assert len(rows) == 82
    assert [(r.kind, r.feature) for r in rows[:2]] == [("SRF", "f0"), ("SRF", "f1")]
    assert rows[41].kind == "DRF"
    for r in rows:
        assert r.holm_p >= r.raw_p
        assert r.significant == (r.holm_p < 0.05)
        assert r.neg_log10_p == pytest.approx(-math.log10(r.raw_p))
    deg = rows[41 + 3]
    assert deg.raw_p == 1.0 and deg.logrank is None and deg.threshold is None


def test_screen_survival_rank_feature_wins():
    rng, t, e = _cohort(1)
    names = ["rank", "noise"]
    table = np.column_stack([np.argsort(np.argsort(t)), rng.normal(size=100)])
    rows = feature_screen({"SRF": table}, t, e, names)
    assert rows[0].raw_p == min(r.raw_p for r in rows)
    assert rows[0].significant
    # High rank means long survival, so the high group's HR is below 1.
    assert rows[0].logrank.hazard_ratio < 1


def test_screen_single_noise_feature_not_significant():
    clean = 0
    for seed in range(200):
        rng, t, e = _cohort(seed)
        rows = feature_screen({"SRF": rng.normal(size=(100, 1))}, t, e, ["f0"])
        clean += not rows[0].significant
    assert clean / 200 >= 0.95


def _noise_family_clean_rate(seeds):
    names = [f"f{i}" for i in range(41)]
    clean = 0
    for seed in seeds:
        rng, t, e = _cohort(seed)
        rows = feature_screen({"SRF": rng.normal(size=(100, 41)), "DRF": rng.normal(size=(100, 41))}, t, e, names)
        clean += not any(r.significant for r in rows)
    return clean / len(seeds)


def test_screen_noise_family_error_bounded():
    # Holm keeps the family-wise rate near nominal; allow the asymptotic test's small-sample excess.
    assert _noise_family_clean_rate(range(200)) >= 0.90


@pytest.mark.xfail(strict=True, reason="asymptotic log-rank is anti-conservative in the far tail at n=100; "
                   "82-feature noise screens come out clean in about 94% of runs")
def test_screen_noise_family_clean_95_percent():
    assert _noise_family_clean_rate(range(200)) >= 0.95


def test_screen_shape_mismatch():
    with pytest.raises(ValueError):
        feature_screen({"SRF": np.zeros((3, 2))}, [1, 2], [1, 1], ["a", "b"])
