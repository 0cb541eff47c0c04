"""Stimulus vocabulary and the per-combination frequency-change statistics.

Each measured stimulus combination maps to a :class:`ResponseEntry` holding the
median and standard deviation of the percentage frequency change.  Sampling
draws from a configurable distribution family located at the median and scaled
by the SD.  Only measured combinations are valid keys; nothing is interpolated.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import TYPE_CHECKING, Iterable, Mapping

import numpy as np
from scipy import stats
from scipy.special import ndtr

from .errors import ModelFormatError, UnknownStimulus, UnknownStimulusSet, UnsupportedFamily

if TYPE_CHECKING:
    from .gates import AccuracyReport, GateSpec

# Canonical names.  Parsing is case-insensitive.
CORE_STIMULI = ("Oat", "Light", "Heat")
EXTENSION_STIMULI = ("Farnesene", "Tridecane")
CATALOG = CORE_STIMULI + EXTENSION_STIMULI
_LOOKUP = {name.lower(): name for name in CATALOG}

# Frequency cannot drop by more than 100%.
CHANGE_FLOOR_PCT = -100.0


class Family(str, enum.Enum):
    NORMAL = "Normal"
    TRUNCATED_NORMAL = "TruncatedNormal"
    EMPIRICAL = "Empirical"

    @classmethod
    def parse(cls, value: str | Family) -> Family:
        if isinstance(value, Family):
            return value
        for member in cls:
            if member.value.lower() == str(value).lower():
                return member
        raise UnsupportedFamily(f"unknown distribution family {value!r}")


def parse_stimulus(name: str) -> str:
    """Return the canonical catalog name for `name` or raise UnknownStimulus."""
    try:
        return _LOOKUP[name.strip().lower()]
    except KeyError:
        raise UnknownStimulus(
            f"unknown stimulus {name!r}; known: {', '.join(CATALOG)}"
        ) from None


@dataclass(frozen=True)
class StimulusSet:
    """An unordered set of simultaneously applied stimuli.  Empty means control."""

    members: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset(parse_stimulus(m) for m in self.members))

    @classmethod
    def of(cls, *names: str) -> StimulusSet:
        return cls(frozenset(names))

    @classmethod
    def parse(cls, text: str) -> StimulusSet:
        """Parse ``"oat,heat"`` style text; ``""``, ``"none"`` and ``"control"`` are the empty set."""
        text = text.strip()
        if text.lower() in ("", "none", "control"):
            return cls()
        parts = [p for p in (s.strip() for s in text.replace("+", ",").split(",")) if p]
        return cls(frozenset(parts))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(sorted(self.members))

    @property
    def label(self) -> str:
        return "+".join(self.names) if self.members else "Control"

    def __iter__(self):
        return iter(self.names)

    def __len__(self):
        return len(self.members)

    def __str__(self):
        return self.label


CONTROL = StimulusSet()


@dataclass(frozen=True)
class ResponseEntry:
    stimuli: StimulusSet
    median_change: float
    sd_change: float
    n_trials: int = 12
    extrapolated: bool = False
    samples: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.sd_change >= 0:
            raise ModelFormatError(f"{self.stimuli}: sd_change must be >= 0, got {self.sd_change}")
        if self.n_trials < 1:
            raise ModelFormatError(f"{self.stimuli}: n_trials must be >= 1, got {self.n_trials}")
        if self.samples is not None:
            object.__setattr__(self, "samples", tuple(float(s) for s in self.samples))


# (stimuli, median %, SD) for each measured row, 12 recordings per row.
TABLE1_ROWS: tuple[tuple[tuple[str, ...], float, float], ...] = (
    ((), 2.1, 6.9),
    (("Oat",), 12.2, 12.6),
    (("Light",), -12.5, 6.5),
    (("Heat",), 19.8, 8.8),
    (("Heat", "Light"), 14.4, 12.5),
    (("Light", "Oat"), -1.5, 11.2),
    (("Heat", "Oat"), 33.2, 9.6),
)
TABLE1_N_TRIALS = 12

# Single-chemical responses with no published SD; the Oat SD stands in.
VOC_ROWS: tuple[tuple[str, float], ...] = (
    ("Farnesene", 22.5),
    ("Tridecane", 17.0),
)
VOC_STAND_IN_SD = 12.6


@dataclass(frozen=True)
class ResponseModel:
    entries: Mapping[StimulusSet, ResponseEntry]
    family: Family = Family.NORMAL

    def __post_init__(self):
        entries = {}
        for key, entry in dict(self.entries).items():
            if key != entry.stimuli:
                raise ModelFormatError(f"entry keyed {key} describes {entry.stimuli}")
            entries[key] = entry
        object.__setattr__(self, "entries", MappingProxyType(entries))
        object.__setattr__(self, "family", Family.parse(self.family))

    @classmethod
    def from_entries(cls, entries: Iterable[ResponseEntry], family: Family | str = Family.NORMAL) -> ResponseModel:
        table: dict[StimulusSet, ResponseEntry] = {}
        for entry in entries:
            if entry.stimuli in table:
                raise ModelFormatError(f"duplicate entry for {entry.stimuli}")
            table[entry.stimuli] = entry
        return cls(table, Family.parse(family))

    def entry(self, stimuli: StimulusSet) -> ResponseEntry:
        try:
            return self.entries[stimuli]
        except KeyError:
            known = ", ".join(k.label for k in self.entries)
            raise UnknownStimulusSet(f"no measured response for {stimuli.label}; known: {known}") from None

    def __contains__(self, stimuli: StimulusSet) -> bool:
        return stimuli in self.entries

    def with_family(self, family: Family | str) -> ResponseModel:
        return ResponseModel(dict(self.entries), Family.parse(family))

    def with_sd(self, sd: float) -> ResponseModel:
        """Copy with every SD replaced by `sd` (``0`` gives a degenerate model)."""
        return ResponseModel(
            {k: _replace_sd(e, sd) for k, e in self.entries.items()}, self.family
        )

    @property
    def extrapolated(self) -> tuple[StimulusSet, ...]:
        return tuple(k for k, e in self.entries.items() if e.extrapolated)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        rows = []
        for entry in self.entries.values():
            row = {
                "stimuli": list(entry.stimuli.names),
                "median_change_pct": entry.median_change,
                "sd_change_pct": entry.sd_change,
                "n_trials": entry.n_trials,
            }
            if entry.extrapolated:
                row["extrapolated"] = True
            if entry.samples is not None:
                row["samples"] = list(entry.samples)
            rows.append(row)
        return {"distribution_family": self.family.value, "entries": rows}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, doc: Mapping) -> ResponseModel:
        try:
            family = Family.parse(doc.get("distribution_family", Family.NORMAL.value))
            rows = doc["entries"]
            entries = []
            for i, row in enumerate(rows):
                try:
                    entries.append(
                        ResponseEntry(
                            stimuli=StimulusSet(frozenset(row["stimuli"])),
                            median_change=float(row["median_change_pct"]),
                            sd_change=float(row["sd_change_pct"]),
                            n_trials=int(row.get("n_trials", 1)),
                            extrapolated=bool(row.get("extrapolated", False)),
                            samples=row.get("samples"),
                        )
                    )
                except KeyError as exc:
                    raise ModelFormatError(f"entry {i}: missing field {exc.args[0]!r}") from None
        except (TypeError, AttributeError, KeyError) as exc:
            raise ModelFormatError(f"malformed model document: {exc}") from None
        return cls.from_entries(entries, family)

    @classmethod
    def from_json(cls, text: str) -> ResponseModel:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"model file is not valid JSON: {exc}") from None
        return cls.from_dict(doc)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> ResponseModel:
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def _replace_sd(entry: ResponseEntry, sd: float) -> ResponseEntry:
    return ResponseEntry(entry.stimuli, entry.median_change, sd, entry.n_trials, entry.extrapolated, entry.samples)


def default_model() -> ResponseModel:
    """The seven measured rows (control, three single stimuli, three pairs), Normal family."""
    return ResponseModel.from_entries(
        ResponseEntry(StimulusSet(frozenset(names)), median, sd, TABLE1_N_TRIALS)
        for names, median, sd in TABLE1_ROWS
    )


def extended_model() -> ResponseModel:
    """:func:`default_model` plus the volatile-chemical rows, flagged as extrapolated."""
    base = default_model()
    extra = [
        ResponseEntry(StimulusSet.of(name), median, VOC_STAND_IN_SD, 1, extrapolated=True)
        for name, median in VOC_ROWS
    ]
    return ResponseModel.from_entries([*base.entries.values(), *extra], base.family)


def as_generator(rng: np.random.Generator | int | np.random.SeedSequence | None) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_changes(
    model: ResponseModel,
    stimuli: StimulusSet,
    rng: np.random.Generator | int,
    size: int,
) -> np.ndarray:
    """Draw `size` frequency changes (percent) for `stimuli`.

    Element ``i`` of the result is draw index ``i`` for the given generator state.
    """
    entry = model.entry(stimuli)
    gen = as_generator(rng)
    if model.family is Family.EMPIRICAL:
        if not entry.samples:
            raise UnsupportedFamily(f"{stimuli.label}: Empirical family needs per-trial samples")
        return gen.choice(np.asarray(entry.samples, dtype=float), size=size, replace=True)
    if entry.sd_change == 0:
        return np.full(size, entry.median_change, dtype=float)
    if model.family is Family.NORMAL:
        return gen.normal(entry.median_change, entry.sd_change, size=size)
    lower = (CHANGE_FLOOR_PCT - entry.median_change) / entry.sd_change
    return stats.truncnorm.rvs(
        lower, np.inf, loc=entry.median_change, scale=entry.sd_change, size=size, random_state=gen
    )


def sample_change(model: ResponseModel, stimuli: StimulusSet, rng: np.random.Generator | int) -> float:
    """One draw of the frequency change (percent) for `stimuli`."""
    return float(sample_changes(model, stimuli, rng, 1)[0])


def prob_at_or_above(entry: ResponseEntry, threshold_pct: float) -> float:
    """P(change >= threshold) under Normal(median, SD)."""
    if entry.sd_change == 0:
        return 1.0 if entry.median_change >= threshold_pct else 0.0
    return float(ndtr((entry.median_change - threshold_pct) / entry.sd_change))


def expected_accuracy(model: ResponseModel, gate: GateSpec) -> AccuracyReport:
    """Closed-form probability of a correct gate output for each input combination.

    Only defined for the Normal family; other families need Monte Carlo.
    """
    from .gates import AccuracyReport, extrapolated_inputs, inputs_to_stimuli

    if model.family is not Family.NORMAL:
        raise UnsupportedFamily(
            f"closed-form accuracy needs the Normal family, model uses {model.family.value}"
        )
    per_combination = {}
    for inputs in gate.combinations:
        p_one = prob_at_or_above(model.entry(inputs_to_stimuli(gate, inputs)), gate.threshold_pct)
        per_combination[inputs] = p_one if gate.expected(inputs) else 1.0 - p_one
    return AccuracyReport(
        gate=gate,
        per_combination=per_combination,
        aggregate=float(np.mean(list(per_combination.values()))),
        n_per_combination=None,
        extrapolated=extrapolated_inputs(model, gate),
    )
