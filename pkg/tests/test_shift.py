import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geoconform.datamodel import PREDICTORS, Subregion
from geoconform.errors import ContractError
from geoconform.shift import (Severity, ks_statistic, regional_shift, severity, shift_report)
from geoconform.synth import SynthConfig, generate


def brute_force_ks(a, b):
    best = 0.0
    for x in list(a) + list(b):
        fa = sum(1 for v in a if v <= x) / len(a)
        fb = sum(1 for v in b if v <= x) / len(b)
        best = max(best, abs(fa - fb))
    return best


def test_ks_examples():
    assert ks_statistic([1, 2, 3], [1, 2, 3]) == 0.0
    assert ks_statistic([1, 2, 3], [4, 5, 6]) == 1.0
    assert ks_statistic([1, 2], [1, 3]) == 0.5


def test_ks_errors():
    with pytest.raises(ContractError):
        ks_statistic([], [1.0])
    with pytest.raises(ContractError):
        ks_statistic([1.0, np.nan], [1.0])


@settings(max_examples=60)
@given(st.lists(st.integers(-20, 20), min_size=1, max_size=40),
       st.lists(st.integers(-20, 20), min_size=1, max_size=40))
def test_ks_brute_force_with_ties(a, b):
    assert abs(ks_statistic(a, b) - brute_force_ks(a, b)) <= 1e-12


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50),
       st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
def test_ks_symmetric(a, b):
    assert ks_statistic(a, b) == ks_statistic(b, a)


@given(st.lists(st.integers(-1000, 1000), min_size=1, max_size=50),
       st.lists(st.integers(-1000, 1000), min_size=1, max_size=50))
def test_ks_invariant_under_increasing_transform(a, b):
    def f(v):
        return np.exp(np.array(v) / 100.0) * 7.0 - 3.0

    assert ks_statistic(a, b) == ks_statistic(f(a), f(b))


@pytest.mark.parametrize("ks,expected", [
    (0.0, Severity.LOW), (0.0596, Severity.LOW), (0.0999, Severity.LOW),
    (0.10, Severity.MEDIUM), (0.2237, Severity.MEDIUM), (0.2558, Severity.MEDIUM),
    (0.26, Severity.HIGH), (1.0, Severity.HIGH),
])
def test_severity_bands(ks, expected):
    assert severity(ks) is expected


def test_severity_labels_and_errors():
    assert [s.label for s in Severity] == ["Low", "Medium", "High"]
    for bad in (-0.01, 1.01, float("nan")):
        with pytest.raises(ContractError):
            severity(bad)


@given(st.floats(0, 1), st.floats(0, 1))
def test_severity_monotone(a, b):
    lo, hi = sorted((a, b))
    assert severity(lo) <= severity(hi)


def test_report_identity_is_all_low():
    ds = generate(SynthConfig(n_locations=2, records_per_location=30, seed=0))
    rep = shift_report(ds, ds)
    assert len(rep) == len(PREDICTORS)
    assert all(e.ks == 0.0 and e.severity is Severity.LOW for e in rep.entries)


def test_report_feature_subset_and_errors():
    ds = generate(SynthConfig(n_locations=2, records_per_location=30, seed=0))
    rep = shift_report(ds, ds.take(np.arange(10)), features=("sat_aot", "latitude"))
    assert [e.feature for e in rep.entries] == ["sat_aot", "latitude"]
    assert rep["sat_aot"].n_test == 10
    with pytest.raises(ContractError):
        shift_report(ds, ds, features=("ozone",))
    with pytest.raises(ContractError):
        shift_report(ds, ds.take([]))


def test_shifted_humidity_has_max_ks():
    for seed in range(5):
        ds = generate(SynthConfig(n_locations=6, records_per_location=60, seed=seed,
                                  shift={"central": {"humidity": 2.0}}))
        rep = regional_shift(ds, Subregion.CENTRAL)
        assert rep.ranked()[0].feature == "humidity"
        assert rep["humidity"].severity >= Severity.MEDIUM


def test_report_to_dict_round_shape():
    ds = generate(SynthConfig(n_locations=2, records_per_location=30, seed=0))
    d = regional_shift(ds, "east").to_dict()
    assert [e["feature"] for e in d["features"]] == list(PREDICTORS)
    assert d["label"] == "east vs rest"
    assert set(d["features"][0]) == {"feature", "ks", "severity", "n_train", "n_test"}
