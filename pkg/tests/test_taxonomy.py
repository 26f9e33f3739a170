import pytest
from hypothesis import given, strategies as st

from hmdpose.taxonomy import (
    FEATURE_COLUMNS, FEATURE_NAMES, LANDMARKS, METRIC_FAMILY, METRICS, N_FEATURES, PHENOTYPES,
    Condition, Family, FeatureName, Landmark, Phenotype, Region, parse_phenotype,
)


def test_sizes_and_order():
    assert len(LANDMARKS) == 17 and len(PHENOTYPES) == 8 and len(METRICS) == 22
    assert N_FEATURES == len(FEATURE_COLUMNS) == 374
    # landmark-major layout
    assert FEATURE_COLUMNS[:22] == [f"nose_distance_{m}" for m in METRICS]
    assert FEATURE_COLUMNS[-1] == f"right_ankle_distance_{METRICS[-1]}"


def test_family_map_is_total():
    assert set(METRIC_FAMILY) == set(METRICS)
    sizes = {f: sum(1 for v in METRIC_FAMILY.values() if v is f) for f in Family}
    assert sizes == {Family.BASELINE_POSTURE: 2, Family.SUSTAINED_BIAS: 3, Family.EXCURSIONS: 2,
                     Family.VARIABILITY: 5, Family.RHYTHMICITY: 2, Family.DIRECTIONALITY: 2,
                     Family.IRREGULARITY_COMPLEXITY: 6}
    assert METRIC_FAMILY["fft_peak_amp"] is Family.RHYTHMICITY
    assert METRIC_FAMILY["mean_abs_accel"] is Family.IRREGULARITY_COMPLEXITY


def test_regions():
    counts = {r: sum(1 for lm in LANDMARKS if lm.region is r) for r in Region}
    assert counts == {Region.CRANIAL: 5, Region.UPPER_LIMB: 6, Region.LOWER_LIMB: 6}
    assert Landmark.RIGHT_WRIST.region is Region.UPPER_LIMB


@given(st.sampled_from(FEATURE_NAMES))
def test_feature_name_round_trip(f):
    assert FeatureName.parse(str(f)) == f
    assert str(f).startswith(f.landmark.value + "_distance_")


def test_bad_feature_name():
    with pytest.raises(ValueError):
        FeatureName.parse("nose_distance_wobble")


def test_phenotype_and_condition_parsing():
    assert parse_phenotype("label_Tremor") is Phenotype.TREMOR
    assert Phenotype.DYSTONIA.index == 0
    assert Condition.parse(" posture ") is Condition.POSTURE
    assert Condition.parse("") is Condition.UNSPECIFIED
    with pytest.raises(ValueError):
        Condition.parse("walking")
