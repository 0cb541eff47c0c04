"""Synthetic surface-potential traces of a protoplasmic tube.

The waveform is a baseline oscillation whose frequency steps (or ramps) at the
stimulation point by a given percentage, with phase continuity, optional
harmonics, per-cycle amplitude jitter, linear drift, slow baseline wander,
white noise, and 24-bit quantization over the recorder's +/-39 mV range.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidChange, InvalidParams, InvalidProtocol
from .response_model import ResponseModel, StimulusSet, as_generator, sample_change

FULL_SCALE_MV = 39.0
ADC_BITS = 24
# 2**24 counts across -39..+39 mV
QUANT_STEP_MV = 2 * FULL_SCALE_MV / 2**ADC_BITS
_MAX_COUNT = 2 ** (ADC_BITS - 1) - 1
_MIN_COUNT = -(2 ** (ADC_BITS - 1))

PERIOD_RANGE_S = (50.0, 200.0)
SAMPLE_RATE_HZ = 1.0


class Provenance(str, enum.Enum):
    SYNTHETIC = "Synthetic"
    INGESTED = "Ingested"


@dataclass(frozen=True)
class OscillatorParams:
    base_period: float = 100.0
    amplitude: float = 5.0
    amplitude_jitter: float = 0.0
    drift_rate: float = 0.0
    noise_sd: float = 0.5
    sample_rate: float = SAMPLE_RATE_HZ
    quantization: float | None = QUANT_STEP_MV
    # (harmonic order, amplitude relative to the fundamental)
    harmonics: tuple[tuple[int, float], ...] = ()
    wander_amplitude: float = 0.0
    wander_period: float = 3000.0
    ramp_s: float = 0.0
    allow_out_of_range: bool = False

    def __post_init__(self):
        lo, hi = PERIOD_RANGE_S
        if not self.allow_out_of_range:
            if not lo <= self.base_period <= hi:
                raise InvalidParams(f"base_period {self.base_period} s outside [{lo}, {hi}] s")
            if self.sample_rate != SAMPLE_RATE_HZ:
                raise InvalidParams(f"sample_rate must be {SAMPLE_RATE_HZ} Hz, got {self.sample_rate}")
        if self.base_period <= 0 or self.sample_rate <= 0:
            raise InvalidParams("base_period and sample_rate must be positive")
        if not 0 <= self.amplitude <= FULL_SCALE_MV:
            raise InvalidParams(f"amplitude must lie in [0, {FULL_SCALE_MV}] mV, got {self.amplitude}")
        if self.amplitude_jitter < 0 or self.noise_sd < 0 or self.ramp_s < 0:
            raise InvalidParams("amplitude_jitter, noise_sd and ramp_s must be >= 0")
        if self.quantization is not None and self.quantization <= 0:
            raise InvalidParams("quantization step must be positive")
        for order, _ in self.harmonics:
            if int(order) != order or order < 2:
                raise InvalidParams(f"harmonic order must be an integer >= 2, got {order}")


@dataclass(frozen=True)
class TrialProtocol:
    pre_duration: float = 600.0
    post_duration: float = 600.0
    stimulation_time: float | None = None

    def __post_init__(self):
        if self.pre_duration <= 0 or self.post_duration <= 0:
            raise InvalidProtocol("pre_duration and post_duration must be positive")
        if self.stimulation_time is None:
            object.__setattr__(self, "stimulation_time", float(self.pre_duration))
        if self.stimulation_time < self.pre_duration:
            raise InvalidProtocol(
                f"stimulation_time {self.stimulation_time} s precedes the end of a "
                f"{self.pre_duration} s pre-stimulation window"
            )

    @property
    def total_duration(self) -> float:
        return self.stimulation_time + self.post_duration


@dataclass(frozen=True, eq=False)
class Trace:
    """Uniformly sampled potential (mV) with an optional stimulation timestamp."""

    t: np.ndarray
    v: np.ndarray
    sample_rate: float = SAMPLE_RATE_HZ
    stimulation_time: float | None = None
    provenance: Provenance = Provenance.SYNTHETIC
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise ValueError("t and v must be 1-D arrays of equal length")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "v", v)
        t.flags.writeable = False
        v.flags.writeable = False

    def __len__(self):
        return len(self.t)

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            np.array_equal(self.t, other.t)
            and np.array_equal(self.v, other.v)
            and self.sample_rate == other.sample_rate
            and self.stimulation_time == other.stimulation_time
        )

    def with_stimulation_time(self, stimulation_time: float | None) -> Trace:
        return replace(self, stimulation_time=stimulation_time)


def quantize(v: np.ndarray, step: float = QUANT_STEP_MV) -> np.ndarray:
    """Round to the ADC grid and clip to the recorder's full scale."""
    counts = np.clip(np.round(np.asarray(v, dtype=float) / step), _MIN_COUNT, _MAX_COUNT)
    return counts * step


def _phase(t: np.ndarray, f_pre: float, f_post: float, t_stim: float, ramp: float) -> np.ndarray:
    """Cycles elapsed (not radians) at each time, continuous across the transition."""
    before = f_pre * t
    if ramp <= 0:
        return np.where(t < t_stim, before, f_pre * t_stim + f_post * (t - t_stim))
    # frequency ramps linearly over [t_stim, t_stim + ramp]
    t_end = t_stim + ramp
    slope = (f_post - f_pre) / ramp
    dt = np.clip(t - t_stim, 0, ramp)
    during = f_pre * t_stim + f_pre * dt + 0.5 * slope * dt**2
    after = f_pre * t_stim + 0.5 * (f_pre + f_post) * ramp + f_post * (t - t_end)
    return np.where(t < t_stim, before, np.where(t < t_end, during, after))


def _jitter_envelope(cycles: np.ndarray, jitter: float, rng: np.random.Generator) -> np.ndarray:
    # one gain per cycle boundary, linearly interpolated in phase
    n_knots = int(np.ceil(cycles.max())) + 2
    knots = np.maximum(1.0 + jitter * rng.standard_normal(n_knots), 0.0)
    return np.interp(cycles, np.arange(n_knots), knots)


def synthesize_trial(
    params: OscillatorParams,
    protocol: TrialProtocol,
    change: float,
    rng: np.random.Generator | int | None = None,
) -> Trace:
    """Simulate one recording whose frequency changes by `change` percent at stimulation.

    The post-stimulation frequency is ``(1 + change / 100) / base_period``.  The
    initial phase, jitter knots and noise come from `rng`.
    """
    if not np.isfinite(change) or change <= -100:
        raise InvalidChange(f"frequency change must be > -100%, got {change}")
    gen = as_generator(rng)
    fs = params.sample_rate
    n = int(round(protocol.total_duration * fs))
    t = np.arange(n) / fs
    f_pre = 1.0 / params.base_period
    f_post = f_pre * (1.0 + change / 100.0)

    cycles = _phase(t, f_pre, f_post, protocol.stimulation_time, params.ramp_s) + gen.uniform(0.0, 1.0)
    angle = 2 * np.pi * cycles
    wave = np.sin(angle)
    for order, rel in params.harmonics:
        wave = wave + rel * np.sin(order * angle)
    if params.amplitude_jitter > 0:
        wave = wave * _jitter_envelope(cycles, params.amplitude_jitter, gen)
    v = params.amplitude * wave
    if params.drift_rate:
        v = v + params.drift_rate * t
    if params.wander_amplitude:
        v = v + params.wander_amplitude * np.sin(2 * np.pi * t / params.wander_period + gen.uniform(0, 2 * np.pi))
    if params.noise_sd > 0:
        v = v + gen.normal(0.0, params.noise_sd, size=n)
    if params.quantization is not None:
        v = quantize(v, params.quantization)
    else:
        v = np.clip(v, -FULL_SCALE_MV, FULL_SCALE_MV)

    return Trace(
        t=t,
        v=v,
        sample_rate=fs,
        stimulation_time=float(protocol.stimulation_time),
        provenance=Provenance.SYNTHETIC,
        meta={"change_pct": float(change), "base_period_s": float(params.base_period),
              "f_pre_hz": f_pre, "f_post_hz": f_post},
    )


def synthesize_batch(
    model: ResponseModel,
    stimuli: StimulusSet,
    n: int,
    params: OscillatorParams | None = None,
    protocol: TrialProtocol | None = None,
    seed: int = 0,
    base_period: float | None = None,
) -> list[Trace]:
    """`n` independent trials for `stimuli`, each with its own sampled change.

    Unless `base_period` is given, each trial draws its base period uniformly
    from 50-200 s.  Trial ``i`` uses the random stream ``(seed, i)`` so any
    subset of trials can be regenerated on its own.
    """
    if n < 1:
        raise ValueError(f"batch size must be >= 1, got {n}")
    params = params or OscillatorParams()
    protocol = protocol or TrialProtocol()
    model.entry(stimuli)
    traces = []
    for i in range(n):
        gen = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        change = sample_change(model, stimuli, gen)
        # keep draws within the representable range of a frequency change
        change = max(change, -99.0)
        period = base_period if base_period is not None else gen.uniform(*PERIOD_RANGE_S)
        trace = synthesize_trial(replace(params, base_period=period), protocol, change, gen)
        trace.meta.update(stimuli=stimuli.label, trial=i)
        traces.append(trace)
    return traces
