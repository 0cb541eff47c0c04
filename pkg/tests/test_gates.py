import logging

import pytest
from hypothesis import given, settings, strategies as st

from physarum_gates.errors import ArityMismatch, EmptyOutcomes, UnknownStimulusSet
from physarum_gates.gates import (
    GateKind,
    GateSpec,
    TrialOutcome,
    TruthTable,
    accuracy_distribution,
    classify,
    default_gates,
    empirical_accuracy,
    evaluate_truth_table,
    inputs_to_stimuli,
    monte_carlo_accuracy,
)
from physarum_gates.response_model import CONTROL, ResponseModel, StimulusSet, expected_accuracy

OR, AND, NOT = (GateSpec.default(k) for k in ("OR", "AND", "NOT"))


def test_default_gate_specs():
    assert (OR.threshold_pct, AND.threshold_pct, NOT.threshold_pct) == (10.0, 24.0, -5.5)
    assert OR.input_map == AND.input_map == ("Oat", "Heat")
    assert NOT.input_map == ("Light",)
    assert [g.kind for g in default_gates()] == list(GateKind)


def test_gate_arity_is_enforced():
    with pytest.raises(ArityMismatch):
        GateSpec("NOT", 0.0, ("Light", "Oat"))
    with pytest.raises(ArityMismatch):
        GateSpec("OR", 0.0, ("Oat",))
    with pytest.raises(ValueError):
        GateSpec("OR", 0.0, ("Oat", "Oat"))


@pytest.mark.parametrize(
    "gate, inputs, expected",
    [
        (OR, (1, 1), StimulusSet.of("Oat", "Heat")),
        (OR, (0, 0), CONTROL),
        (OR, (0, 1), StimulusSet.of("Heat")),
        (OR, (1, 0), StimulusSet.of("Oat")),
        (NOT, (0,), CONTROL),
        (NOT, (1,), StimulusSet.of("Light")),
    ],
)
def test_inputs_to_stimuli(gate, inputs, expected):
    assert inputs_to_stimuli(gate, inputs) == expected


def test_inputs_to_stimuli_arity():
    with pytest.raises(ArityMismatch):
        inputs_to_stimuli(OR, (1,))
    with pytest.raises(ArityMismatch):
        inputs_to_stimuli(NOT, (1, 0))


@pytest.mark.parametrize(
    "gate, change, bit",
    [(AND, 33.2, 1), (OR, 2.0, 0), (OR, 10.0, 1), (OR, 9.999999, 0), (NOT, -12.5, 0), (NOT, -5.5, 1)],
)
def test_classify(gate, change, bit):
    assert classify(gate, change) == bit


def test_truth_tables_reproduce_the_published_columns(model):
    assert evaluate_truth_table(OR, model).as_strings() == {"00": 0, "01": 1, "10": 1, "11": 1}
    assert evaluate_truth_table(AND, model).as_strings() == {"00": 0, "01": 0, "10": 0, "11": 1}
    assert evaluate_truth_table(NOT, model).as_strings() == {"0": 1, "1": 0}
    for gate in default_gates():
        assert evaluate_truth_table(gate, model) == gate.truth_table


def test_truth_table_needs_all_rows():
    with pytest.raises(ValueError):
        TruthTable({(0, 0): 0, (1, 1): 1})


def test_truth_table_propagates_missing_rows():
    model = ResponseModel.from_entries([])
    with pytest.raises(UnknownStimulusSet):
        evaluate_truth_table(OR, model)


@settings(max_examples=100, deadline=None)
@given(a=st.floats(-100, 100), b=st.floats(-100, 100), theta=st.floats(-50, 50), raise_by=st.floats(0, 50))
def test_classify_is_monotone(a, b, theta, raise_by):
    gate = GateSpec.default("OR", theta)
    lo, hi = sorted((a, b))
    assert classify(gate, lo) <= classify(gate, hi)
    higher = GateSpec.default("OR", theta + raise_by)
    assert classify(higher, a) <= classify(gate, a)


def test_label_permutation(model):
    for kind in ("OR", "AND"):
        gate = GateSpec.default(kind)
        swapped = GateSpec(kind, gate.threshold_pct, ("Heat", "Oat"))
        assert evaluate_truth_table(gate, model) == evaluate_truth_table(swapped, model)
        a = expected_accuracy(model, gate).per_combination
        b = expected_accuracy(model, swapped).per_combination
        assert a[(0, 1)] == b[(1, 0)] and a[(1, 0)] == b[(0, 1)]


def test_zero_sd_gives_perfect_gates(model):
    degenerate = model.with_sd(0.0)
    for gate in default_gates():
        assert monte_carlo_accuracy(gate, degenerate, 1000, seed=1).aggregate == 1.0
        assert expected_accuracy(degenerate, gate).aggregate == 1.0


def test_monte_carlo_agrees_with_closed_form(model):
    for gate in default_gates():
        mc = monte_carlo_accuracy(gate, model, 1_000_000, seed=7)
        exact = expected_accuracy(model, gate)
        for k in gate.combinations:
            assert abs(mc.per_combination[k] - exact.per_combination[k]) <= 0.005
        assert mc.n_per_combination == 1_000_000


def test_monte_carlo_regression_pin(model):
    # pinned from a first run; guards the seeding scheme
    counts = {"OR": 44, "AND": 43, "NOT": 20}
    for gate in default_gates():
        a = monte_carlo_accuracy(gate, model, 12, seed=2015)
        b = monte_carlo_accuracy(gate, model, 12, seed=2015)
        assert a == b
        total = len(gate.combinations) * 12
        assert a.aggregate == counts[gate.kind.value] / total


def test_monte_carlo_does_not_depend_on_jobs(model):
    a = monte_carlo_accuracy(OR, model, 200_000, seed=3, jobs=1)
    b = monte_carlo_accuracy(OR, model, 200_000, seed=3, jobs=4)
    assert a == b


def test_monte_carlo_rejects_empty_runs(model):
    with pytest.raises(ValueError):
        monte_carlo_accuracy(OR, model, 0)


def test_accuracy_distribution_counts_in_48ths(model):
    dist = accuracy_distribution(OR, model, 12, 200, seed=5)
    assert len(dist.aggregates) == 200
    for a in dist.aggregates:
        assert (a * 48) == pytest.approx(round(a * 48), abs=1e-9)
    doc = dist.to_dict()
    assert sum(doc["histogram"].values()) == 200
    assert doc["mean"] == pytest.approx(expected_accuracy(model, OR).aggregate, abs=0.02)


def test_empirical_accuracy_arithmetic():
    outcomes = []
    corrects = {(0, 0): 11, (0, 1): 10, (1, 0): 11, (1, 1): 12}
    for inputs, k in corrects.items():
        good = 30.0 if OR.expected(inputs) else 0.0
        bad = 0.0 if OR.expected(inputs) else 30.0
        outcomes += [TrialOutcome.observe(OR, inputs, good)] * k
        outcomes += [TrialOutcome.observe(OR, inputs, bad)] * (12 - k)
    report = empirical_accuracy(OR, outcomes)
    assert report.aggregate == pytest.approx(44 / 48)
    assert round(report.aggregate * 100, 1) == 91.7
    assert report.n_per_combination == 12
    assert report.per_combination[(0, 1)] == pytest.approx(10 / 12)


def test_empirical_accuracy_single_and_empty():
    assert empirical_accuracy(AND, [TrialOutcome.observe(AND, (1, 1), 33.2)]).aggregate == 1.0
    with pytest.raises(EmptyOutcomes):
        empirical_accuracy(AND, [])


def test_empirical_accuracy_partial_data(caplog):
    outcomes = [TrialOutcome.observe(OR, c, 20.0) for c in [(0, 1), (1, 0), (1, 1)]]
    with caplog.at_level(logging.WARNING):
        report = empirical_accuracy(OR, outcomes)
    assert report.missing == ((0, 0),)
    assert report.partial
    assert report.aggregate == 1.0
    assert "00" in caplog.text
    assert report.to_dict()["missing_combinations"] == ["00"]


def test_empirical_accuracy_unequal_counts():
    outcomes = [TrialOutcome.observe(NOT, (0,), 0.0)] * 3 + [TrialOutcome.observe(NOT, (1,), 0.0)]
    report = empirical_accuracy(NOT, outcomes)
    assert report.n_per_combination is None
    assert report.counts == {(0,): 3, (1,): 1}
    assert report.aggregate == pytest.approx(3 / 4)


def test_trial_outcome_fields():
    o = TrialOutcome.observe(NOT, (1,), -12.5)
    assert (o.output, o.correct, o.stimuli) == (0, True, StimulusSet.of("Light"))


def test_report_json_keys(model):
    doc = monte_carlo_accuracy(AND, model, 10, seed=0).to_dict()
    assert list(doc) == ["gate", "threshold_pct", "n_per_combination", "per_combination", "aggregate"]
    assert list(doc["per_combination"]) == ["00", "01", "10", "11"]
