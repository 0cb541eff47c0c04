import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from physarum_gates.errors import ModelFormatError, UnknownStimulus, UnknownStimulusSet, UnsupportedFamily
from physarum_gates.gates import GateSpec
from physarum_gates.response_model import (
    CONTROL,
    Family,
    ResponseEntry,
    ResponseModel,
    StimulusSet,
    default_model,
    expected_accuracy,
    extended_model,
    sample_change,
    sample_changes,
)

TABLE1 = {
    (): (2.1, 6.9),
    ("Oat",): (12.2, 12.6),
    ("Light",): (-12.5, 6.5),
    ("Heat",): (19.8, 8.8),
    ("Heat", "Light"): (14.4, 12.5),
    ("Light", "Oat"): (-1.5, 11.2),
    ("Heat", "Oat"): (33.2, 9.6),
}


def _normal_cdf(z):
    return 0.5 * (1 + math.erf(z / math.sqrt(2)))


def test_default_model_has_exactly_the_measured_rows():
    model = default_model()
    assert model.family is Family.NORMAL
    assert {k.names for k in model.entries} == set(TABLE1)
    for names, (median, sd) in TABLE1.items():
        entry = model.entry(StimulusSet.of(*names))
        assert (entry.median_change, entry.sd_change, entry.n_trials) == (median, sd, 12)


@pytest.mark.parametrize(
    "names, median, sd",
    [((), 2.1, 6.9), (("Heat", "Oat"), 33.2, 9.6), (("Light",), -12.5, 6.5)],
)
def test_default_model_spot_rows(names, median, sd):
    entry = default_model().entries[StimulusSet.of(*names)]
    assert entry.median_change == median
    assert entry.sd_change == sd


def test_stimulus_set_is_unordered_and_case_insensitive():
    assert StimulusSet.of("oat", "HEAT") == StimulusSet.of("Heat", "Oat")
    assert StimulusSet.parse("heat,oat").names == ("Heat", "Oat")
    assert StimulusSet.parse("Oat+Heat").label == "Heat+Oat"
    assert StimulusSet.parse("none") == CONTROL == StimulusSet.parse("control")
    assert CONTROL.label == "Control"
    assert len({StimulusSet.of("Oat", "Heat"), StimulusSet.of("Heat", "Oat")}) == 1


def test_unknown_stimulus_rejected_at_parse_time():
    with pytest.raises(UnknownStimulus):
        StimulusSet.parse("sugar")


def test_unmeasured_combination_is_an_error(model):
    with pytest.raises(UnknownStimulusSet):
        model.entry(StimulusSet.of("Oat", "Light", "Heat"))
    with pytest.raises(UnknownStimulusSet):
        sample_change(model, StimulusSet.of("Oat", "Light", "Heat"), 0)


def test_entry_invariants():
    with pytest.raises(ModelFormatError):
        ResponseEntry(CONTROL, 1.0, -0.1)
    with pytest.raises(ModelFormatError):
        ResponseEntry(CONTROL, 1.0, 1.0, n_trials=0)
    with pytest.raises(ModelFormatError):
        ResponseModel.from_entries([ResponseEntry(CONTROL, 1, 1), ResponseEntry(CONTROL, 2, 1)])


def test_model_is_immutable(model):
    with pytest.raises(TypeError):
        model.entries[CONTROL] = None


def test_json_round_trip_is_bit_exact_and_byte_stable(model, tmp_path):
    text = model.to_json()
    again = ResponseModel.from_json(text)
    assert again == model or dict(again.entries) == dict(model.entries)
    for key, entry in model.entries.items():
        assert again.entry(key) == entry
    assert again.to_json() == text
    assert default_model().to_json() == text
    doc = json.loads(text)
    assert list(doc) == ["distribution_family", "entries"]
    assert list(doc["entries"][0]) == ["stimuli", "median_change_pct", "sd_change_pct", "n_trials"]
    path = tmp_path / "m.json"
    model.save(path)
    assert path.read_text() == text
    assert ResponseModel.load(path).to_json() == text


def test_malformed_model_documents():
    with pytest.raises(ModelFormatError):
        ResponseModel.from_json("{not json")
    with pytest.raises(ModelFormatError):
        ResponseModel.from_dict({"entries": [{"stimuli": []}]})
    with pytest.raises(UnsupportedFamily):
        ResponseModel.from_dict({"distribution_family": "Cauchy", "entries": []})


def test_extended_model_flags_voc_rows():
    model = extended_model()
    farnesene = model.entry(StimulusSet.of("Farnesene"))
    assert (farnesene.median_change, farnesene.sd_change, farnesene.extrapolated) == (22.5, 12.6, True)
    assert model.entry(StimulusSet.of("Tridecane")).median_change == 17.0
    assert {k.label for k in model.extrapolated} == {"Farnesene", "Tridecane"}
    gate = GateSpec("NOT", 10.0, ("Farnesene",))
    assert expected_accuracy(model, gate).extrapolated == ("Farnesene",)
    assert expected_accuracy(model, GateSpec.default("OR")).extrapolated == ()


def test_zero_sd_returns_median_exactly():
    model = ResponseModel.from_entries([ResponseEntry(CONTROL, 7.25, 0.0)])
    for family in Family:
        if family is Family.EMPIRICAL:
            continue
        m = model.with_family(family)
        assert sample_change(m, CONTROL, 3) == 7.25
        assert np.all(sample_changes(m, CONTROL, 3, 100) == 7.25)


def test_sampling_is_deterministic_per_seed(model):
    key = StimulusSet.of("Heat", "Oat")
    assert sample_change(model, key, 99) == sample_change(model, key, 99)
    a = sample_changes(model, key, np.random.default_rng(5), 10)
    b = sample_changes(model, key, np.random.default_rng(5), 10)
    assert np.array_equal(a, b)
    # draw index i does not depend on how many draws follow it
    c = sample_changes(model, key, np.random.default_rng(5), 4)
    assert np.array_equal(a[:4], c)


def test_law_of_large_numbers_on_heat_oat(model):
    draws = sample_changes(model, StimulusSet.of("Heat", "Oat"), np.random.default_rng(2024), 1_000_000)
    assert abs(draws.mean() - 33.2) < 0.1
    assert abs(draws.std() - 9.6) < 0.1


def test_truncated_normal_respects_floor():
    model = ResponseModel.from_entries([ResponseEntry(CONTROL, -90.0, 30.0)], Family.TRUNCATED_NORMAL)
    draws = sample_changes(model, CONTROL, 1, 50_000)
    assert draws.min() >= -100.0
    assert draws.mean() > -90.0


def test_empirical_family_resamples_supplied_values():
    samples = (1.0, 2.0, 4.0)
    model = ResponseModel.from_entries([ResponseEntry(CONTROL, 2.0, 1.0, 3, samples=samples)], "Empirical")
    draws = sample_changes(model, CONTROL, 0, 1000)
    assert set(np.unique(draws)) == set(samples)
    without = ResponseModel.from_entries([ResponseEntry(CONTROL, 2.0, 1.0)], "Empirical")
    with pytest.raises(UnsupportedFamily):
        sample_change(without, CONTROL, 0)
    assert ResponseModel.from_json(model.to_json()).entry(CONTROL).samples == samples


# Frozen from an independent mpmath Normal CDF evaluation, z = (threshold - median) / SD.
@pytest.mark.parametrize(
    "kind, per_combination, aggregate",
    [
        ("OR", {(0, 0): 0.87388, (0, 1): 0.867282, (1, 0): 0.569304, (1, 1): 0.992168}, 0.825659),
        ("AND", {(0, 0): 0.999248, (0, 1): 0.683416, (1, 0): 0.825494, (1, 1): 0.831053}, 0.834803),
        ("NOT", {(0,): 0.864649, (1,): 0.859243}, 0.861946),
    ],
)
def test_expected_accuracy_matches_normal_cdf_oracle(model, kind, per_combination, aggregate):
    report = expected_accuracy(model, GateSpec.default(kind))
    assert report.per_combination.keys() == per_combination.keys()
    for k, v in per_combination.items():
        assert report.per_combination[k] == pytest.approx(v, abs=1e-6)
    assert report.aggregate == pytest.approx(aggregate, abs=1e-6)
    assert report.n_per_combination is None


def test_expected_accuracy_rejects_other_families(model):
    with pytest.raises(UnsupportedFamily):
        expected_accuracy(model.with_family("TruncatedNormal"), GateSpec.default("OR"))


@settings(max_examples=60, deadline=None)
@given(
    medians=st.lists(st.floats(-50, 80), min_size=4, max_size=4),
    sds=st.lists(st.floats(0.01, 15), min_size=4, max_size=4),
)
def test_threshold_six_sds_below_gives_near_certain_ones(medians, sds):
    keys = [CONTROL, StimulusSet.of("Heat"), StimulusSet.of("Oat"), StimulusSet.of("Heat", "Oat")]
    model = ResponseModel.from_entries(ResponseEntry(k, m, s) for k, m, s in zip(keys, medians, sds))
    threshold = min(m - 6 * s for m, s in zip(medians, sds))
    report = expected_accuracy(model, GateSpec.default("OR", threshold))
    for inputs, p in report.per_combination.items():
        if any(inputs):
            assert p >= 0.999


@settings(max_examples=40, deadline=None)
@given(median=st.floats(-60, 60), sd=st.floats(0.1, 20), threshold=st.floats(-60, 60))
def test_expected_accuracy_single_combination_against_erf(median, sd, threshold):
    model = ResponseModel.from_entries(
        [ResponseEntry(CONTROL, median, sd), ResponseEntry(StimulusSet.of("Light"), median, sd)]
    )
    report = expected_accuracy(model, GateSpec.default("NOT", threshold))
    p_one = 1 - _normal_cdf((threshold - median) / sd)
    assert report.per_combination[(0,)] == pytest.approx(p_one, abs=1e-9)
    assert report.per_combination[(1,)] == pytest.approx(1 - p_one, abs=1e-9)
