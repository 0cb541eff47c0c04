"""Threshold gates over the percentage frequency change, and their accuracy.

A gate maps logic inputs to stimuli (a 1 bit means the stimulus is applied),
observes the frequency change, and outputs 1 iff the change is at or above the
gate threshold.  Accuracy is the fraction of observations that land on the
correct side of the threshold.
"""
from __future__ import annotations

import enum
import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ArityMismatch, EmptyOutcomes
from .response_model import ResponseModel, StimulusSet, sample_changes

logger = logging.getLogger(__name__)

Bits = tuple[int, ...]

# Draws per Monte Carlo shard.  Shards, not workers, own the random streams, so
# results do not depend on the number of workers.
SHARD_SIZE = 1 << 16


class GateKind(str, enum.Enum):
    OR = "OR"
    AND = "AND"
    NOT = "NOT"

    @classmethod
    def parse(cls, value: str | GateKind) -> GateKind:
        try:
            return cls(str(value.value if isinstance(value, GateKind) else value).upper())
        except ValueError:
            raise ValueError(f"unknown gate kind {value!r}; expected OR, AND or NOT") from None

    @property
    def arity(self) -> int:
        return 1 if self is GateKind.NOT else 2

    def boolean(self, inputs: Bits) -> int:
        if self is GateKind.OR:
            return int(any(inputs))
        if self is GateKind.AND:
            return int(all(inputs))
        return int(not inputs[0])


DEFAULT_THRESHOLDS = {GateKind.OR: 10.0, GateKind.AND: 24.0, GateKind.NOT: -5.5}
DEFAULT_INPUT_MAPS = {
    GateKind.OR: ("Oat", "Heat"),
    GateKind.AND: ("Oat", "Heat"),
    GateKind.NOT: ("Light",),
}


@dataclass(frozen=True)
class GateSpec:
    kind: GateKind
    threshold_pct: float
    input_map: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "kind", GateKind.parse(self.kind))
        object.__setattr__(self, "input_map", tuple(self.input_map))
        if len(self.input_map) != self.kind.arity:
            raise ArityMismatch(
                f"{self.kind.value} takes {self.kind.arity} input(s), got map {self.input_map}"
            )
        # validates names against the catalog
        StimulusSet(frozenset(self.input_map))
        if len(set(self.input_map)) != len(self.input_map):
            raise ValueError(f"input map repeats a stimulus: {self.input_map}")

    @classmethod
    def default(cls, kind: GateKind | str, threshold_pct: float | None = None) -> GateSpec:
        kind = GateKind.parse(kind)
        if threshold_pct is None:
            threshold_pct = DEFAULT_THRESHOLDS[kind]
        return cls(kind, float(threshold_pct), DEFAULT_INPUT_MAPS[kind])

    @property
    def arity(self) -> int:
        return self.kind.arity

    @property
    def combinations(self) -> tuple[Bits, ...]:
        return tuple(itertools.product((0, 1), repeat=self.arity))

    def expected(self, inputs: Bits) -> int:
        return self.kind.boolean(inputs)

    @property
    def truth_table(self) -> TruthTable:
        return TruthTable({c: self.expected(c) for c in self.combinations})


def default_gates() -> tuple[GateSpec, ...]:
    return tuple(GateSpec.default(kind) for kind in GateKind)


@dataclass(frozen=True)
class TruthTable:
    rows: Mapping[Bits, int]

    def __post_init__(self):
        arities = {len(k) for k in self.rows}
        if len(arities) != 1:
            raise ArityMismatch("truth table rows have mixed arity")
        (k,) = arities
        if set(self.rows) != set(itertools.product((0, 1), repeat=k)):
            raise ValueError(f"truth table must cover all {2 ** k} input combinations")

    def __getitem__(self, inputs: Bits) -> int:
        return self.rows[inputs]

    def as_strings(self) -> dict[str, int]:
        return {bits_label(k): v for k, v in sorted(self.rows.items())}


def bits_label(bits: Bits) -> str:
    return "".join(str(b) for b in bits)


def parse_bits(label: str) -> Bits:
    if not label or any(ch not in "01" for ch in label):
        raise ValueError(f"not a bit string: {label!r}")
    return tuple(int(ch) for ch in label)


def _check_bits(gate: GateSpec, inputs: Sequence[int]) -> Bits:
    inputs = tuple(int(b) for b in inputs)
    if len(inputs) != gate.arity:
        raise ArityMismatch(f"{gate.kind.value} takes {gate.arity} input(s), got {inputs}")
    if any(b not in (0, 1) for b in inputs):
        raise ValueError(f"inputs must be bits, got {inputs}")
    return inputs


def inputs_to_stimuli(gate: GateSpec, inputs: Sequence[int]) -> StimulusSet:
    """Stimuli applied for a logic input tuple; all zeros is the control."""
    inputs = _check_bits(gate, inputs)
    return StimulusSet(frozenset(s for s, bit in zip(gate.input_map, inputs) if bit))


def classify(gate: GateSpec, change_pct: float) -> int:
    return int(change_pct >= gate.threshold_pct)


def evaluate_truth_table(gate: GateSpec, model: ResponseModel) -> TruthTable:
    """Classify each input combination at the model's median (no sampling)."""
    return TruthTable(
        {
            c: classify(gate, model.entry(inputs_to_stimuli(gate, c)).median_change)
            for c in gate.combinations
        }
    )


@dataclass(frozen=True)
class TrialOutcome:
    inputs: Bits
    stimuli: StimulusSet
    change_pct: float
    output: int
    correct: bool

    @classmethod
    def observe(cls, gate: GateSpec, inputs: Sequence[int], change_pct: float) -> TrialOutcome:
        inputs = _check_bits(gate, inputs)
        output = classify(gate, change_pct)
        return cls(inputs, inputs_to_stimuli(gate, inputs), float(change_pct), output, output == gate.expected(inputs))


@dataclass(frozen=True)
class AccuracyReport:
    """Correct-output fractions per input combination.

    ``n_per_combination`` is None for closed-form reports and for empirical
    reports whose combinations were observed unequally often; ``counts`` then
    carries the per-combination trial numbers.
    """

    gate: GateSpec
    per_combination: Mapping[Bits, float]
    aggregate: float
    n_per_combination: int | None
    counts: Mapping[Bits, int] | None = None
    missing: tuple[Bits, ...] = ()
    extrapolated: tuple[str, ...] = ()

    @property
    def partial(self) -> bool:
        return bool(self.missing)

    def to_dict(self) -> dict:
        doc = {
            "gate": self.gate.kind.value,
            "threshold_pct": self.gate.threshold_pct,
            "n_per_combination": self.n_per_combination,
            "per_combination": {bits_label(k): v for k, v in sorted(self.per_combination.items())},
            "aggregate": self.aggregate,
        }
        if self.missing:
            doc["missing_combinations"] = [bits_label(k) for k in self.missing]
        if self.extrapolated:
            doc["extrapolated_stimuli"] = list(self.extrapolated)
        return doc


def _count_correct(gate: GateSpec, inputs: Bits, changes: np.ndarray) -> int:
    above = changes >= gate.threshold_pct
    return int(np.count_nonzero(above if gate.expected(inputs) else ~above))


def _shard_sizes(n: int) -> list[int]:
    full, rest = divmod(n, SHARD_SIZE)
    return [SHARD_SIZE] * full + ([rest] if rest else [])


def _correct_counts(
    gate: GateSpec, model: ResponseModel, n: int, seed: int, stream: tuple[int, ...] = (), jobs: int = 1
) -> dict[Bits, int]:
    tasks = []
    for ci, inputs in enumerate(gate.combinations):
        stimuli = inputs_to_stimuli(gate, inputs)
        for si, size in enumerate(_shard_sizes(n)):
            ss = np.random.SeedSequence(seed, spawn_key=(*stream, ci, si))
            tasks.append((inputs, stimuli, size, ss))

    def run(task):
        inputs, stimuli, size, ss = task
        return inputs, _count_correct(gate, inputs, sample_changes(model, stimuli, np.random.default_rng(ss), size))

    if jobs > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]
    counts = dict.fromkeys(gate.combinations, 0)
    for inputs, k in results:
        counts[inputs] += k
    return counts


def monte_carlo_accuracy(
    gate: GateSpec, model: ResponseModel, n_per_combination: int, seed: int = 0, jobs: int = 1
) -> AccuracyReport:
    """Sample `n_per_combination` changes for each input combination and score them.

    Random streams are derived from ``(seed, combination, shard)`` so the
    result is identical for any `jobs`.
    """
    if n_per_combination < 1:
        raise ValueError("n_per_combination must be >= 1")
    counts = _correct_counts(gate, model, n_per_combination, seed, jobs=jobs)
    return _report_from_counts(gate, model, counts, n_per_combination)


def extrapolated_inputs(model: ResponseModel, gate: GateSpec) -> tuple[str, ...]:
    """Labels of extrapolated model rows the gate's stimuli can reach."""
    used = set(gate.input_map)
    return tuple(k.label for k in model.extrapolated if k.members & used)


def _report_from_counts(gate, model, counts, n) -> AccuracyReport:
    per = {k: c / n for k, c in counts.items()}
    return AccuracyReport(
        gate=gate,
        per_combination=per,
        aggregate=sum(counts.values()) / (n * len(counts)),
        n_per_combination=n,
        extrapolated=extrapolated_inputs(model, gate),
    )


@dataclass(frozen=True)
class AccuracyDistribution:
    """Spread of aggregate accuracy over repeated small experiments."""

    gate: GateSpec
    n_per_combination: int
    aggregates: tuple[float, ...]
    correct_totals: tuple[int, ...] = field(repr=False, default=())

    @property
    def total_trials(self) -> int:
        return self.n_per_combination * len(self.gate.combinations)

    def to_dict(self) -> dict:
        a = np.asarray(self.aggregates)
        hist: dict[str, int] = {}
        for k in sorted(set(self.correct_totals)):
            hist[f"{k}/{self.total_trials}"] = self.correct_totals.count(k)
        return {
            "gate": self.gate.kind.value,
            "threshold_pct": self.gate.threshold_pct,
            "n_per_combination": self.n_per_combination,
            "repeats": len(self.aggregates),
            "mean": float(a.mean()),
            "sd": float(a.std(ddof=1)) if len(a) > 1 else 0.0,
            "p05": float(np.quantile(a, 0.05)),
            "p50": float(np.quantile(a, 0.5)),
            "p95": float(np.quantile(a, 0.95)),
            "histogram": hist,
        }


def accuracy_distribution(
    gate: GateSpec, model: ResponseModel, n_per_combination: int, repeats: int, seed: int = 0, jobs: int = 1
) -> AccuracyDistribution:
    """Repeat a `n_per_combination`-trial accuracy experiment `repeats` times."""
    if repeats < 1 or n_per_combination < 1:
        raise ValueError("repeats and n_per_combination must be >= 1")

    def one(r):
        return sum(_correct_counts(gate, model, n_per_combination, seed, stream=(r,)).values())

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            totals = list(pool.map(one, range(repeats)))
    else:
        totals = [one(r) for r in range(repeats)]
    denom = n_per_combination * len(gate.combinations)
    return AccuracyDistribution(gate, n_per_combination, tuple(t / denom for t in totals), tuple(totals))


def empirical_accuracy(gate: GateSpec, outcomes: Iterable[TrialOutcome]) -> AccuracyReport:
    """Score recorded trial outcomes against the gate's truth table.

    The aggregate pools all trials, which equals the unweighted mean of the
    per-combination fractions when every combination has the same count.
    Combinations with no trials are listed in ``missing``.
    """
    outcomes = list(outcomes)
    if not outcomes:
        raise EmptyOutcomes("no trial outcomes to score")
    counts: dict[Bits, int] = {}
    correct: dict[Bits, int] = {}
    for o in outcomes:
        inputs = _check_bits(gate, o.inputs)
        # re-derive correctness from the change so stale flags cannot leak in
        ok = classify(gate, o.change_pct) == gate.expected(inputs)
        counts[inputs] = counts.get(inputs, 0) + 1
        correct[inputs] = correct.get(inputs, 0) + int(ok)
    present = [c for c in gate.combinations if c in counts]
    missing = tuple(c for c in gate.combinations if c not in counts)
    if missing:
        logger.warning(
            "%s accuracy computed without combinations %s",
            gate.kind.value,
            ", ".join(bits_label(m) for m in missing),
        )
    sizes = {counts[c] for c in present}
    return AccuracyReport(
        gate=gate,
        per_combination={c: correct[c] / counts[c] for c in present},
        aggregate=sum(correct.values()) / sum(counts.values()),
        n_per_combination=sizes.pop() if len(sizes) == 1 else None,
        counts={c: counts[c] for c in present},
        missing=missing,
    )
