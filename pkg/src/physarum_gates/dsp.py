"""Dominant-frequency estimation and the pre/post-stimulation frequency change.

The default ``"fft"`` method detrends, applies a Hann taper, zero-pads to at
least 16x the window length (next power of two), picks the largest in-band
magnitude bin and refines it with a parabola through the log-magnitudes of the
bin and its two neighbours.  ``"raw_bin"``, ``"autocorrelation"`` and
``"zero_crossing"`` exist for cross-checking.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import BandEmpty, DegenerateSignal, InvalidWindow, MissingStimulationTime
from .synth import Trace, TrialProtocol

DEFAULT_BAND = (1 / 200, 1 / 50)
MIN_WINDOW_SAMPLES = 64
PAD_FACTOR = 16
# RMS (mV) of the in-band spectral content below which no peak is meaningful
DEFAULT_POWER_FLOOR = 1e-6
METHODS = ("fft", "raw_bin", "autocorrelation", "zero_crossing")


@dataclass(frozen=True)
class Window:
    start: float
    duration: float
    samples: np.ndarray
    sample_rate: float = 1.0

    def __post_init__(self):
        count = self.duration * self.sample_rate
        if abs(count - round(count)) > 1e-9 or round(count) < MIN_WINDOW_SAMPLES:
            raise InvalidWindow(
                f"window of {self.duration} s at {self.sample_rate} Hz must hold an integer "
                f"number of samples >= {MIN_WINDOW_SAMPLES}"
            )
        if len(self.samples) != round(count):
            raise InvalidWindow(f"expected {round(count)} samples, got {len(self.samples)}")

    @classmethod
    def of(cls, samples, sample_rate: float = 1.0, start: float = 0.0) -> Window:
        samples = np.asarray(samples, dtype=float)
        return cls(start, len(samples) / sample_rate, samples, sample_rate)

    @classmethod
    def from_trace(cls, trace: Trace, start: float, duration: float) -> Window:
        fs = trace.sample_rate
        i0 = int(round((start - trace.t[0]) * fs))
        n = int(round(duration * fs))
        if i0 < 0 or i0 + n > len(trace):
            raise InvalidWindow(
                f"window [{start}, {start + duration}) s exceeds trace span "
                f"[{trace.t[0]}, {trace.t[-1] + 1 / fs}) s"
            )
        return cls(start, duration, trace.v[i0:i0 + n], fs)


@dataclass(frozen=True)
class FrequencyEstimate:
    frequency: float
    band: tuple[float, float]
    peak_power_ratio: float
    method: str
    # a stronger spectral peak lies just outside the band (within lo/2 .. 2*hi),
    # so the in-band estimate is probably a leakage artefact
    out_of_band: bool = False


@dataclass(frozen=True)
class FrequencyChange:
    f_pre: float
    f_post: float
    change_pct: float
    pre: FrequencyEstimate | None = None
    post: FrequencyEstimate | None = None

    @classmethod
    def from_frequencies(cls, f_pre: float, f_post: float, **kw) -> FrequencyChange:
        if not f_pre > 0:
            raise ValueError(f"f_pre must be positive, got {f_pre}")
        return cls(f_pre, f_post, (f_post / f_pre - 1.0) * 100.0, **kw)

    @property
    def flags(self) -> tuple[str, ...]:
        out = []
        if self.pre is not None and self.pre.out_of_band:
            out.append("pre_out_of_band")
        if self.post is not None and self.post.out_of_band:
            out.append("post_out_of_band")
        return tuple(out)

    def to_dict(self) -> dict:
        doc = {"f_pre_hz": self.f_pre, "f_post_hz": self.f_post, "change_pct": self.change_pct}
        if self.flags:
            doc["flags"] = list(self.flags)
        return doc


def _check_band(band, sample_rate):
    lo, hi = float(band[0]), float(band[1])
    nyquist = sample_rate / 2
    if not 0 < lo < hi < nyquist:
        raise BandEmpty(f"band ({lo}, {hi}) Hz must satisfy 0 < lo < hi < {nyquist}")
    return lo, hi


def _prepare(window: Window) -> np.ndarray:
    return signal.detrend(np.asarray(window.samples, dtype=float), type="linear")


def _band_rms(spectrum_power: np.ndarray, in_band: np.ndarray, nfft: int, taper: np.ndarray) -> float:
    # one-sided Parseval, normalised by the taper's energy
    return float(np.sqrt(2 * spectrum_power[in_band].sum() / (nfft * np.sum(taper**2))))


def parabolic_vertex(ym1: float, y0: float, yp1: float) -> float:
    """Offset in (-1, 1) bins of the vertex of the parabola through three points."""
    denom = ym1 - 2 * y0 + yp1
    if denom >= 0:
        return 0.0
    return float(np.clip(0.5 * (ym1 - yp1) / denom, -1.0, 1.0))


def _spectral_peak(window, band, pad_factor, power_floor, interpolate, method):
    lo, hi = _check_band(band, window.sample_rate)
    fs = window.sample_rate
    x = _prepare(window)
    n = len(x)
    taper = np.hanning(n)
    nfft = 1 << int(np.ceil(np.log2(pad_factor * n))) if pad_factor > 1 else n
    mag = np.abs(np.fft.rfft(x * taper, nfft))
    freqs = np.fft.rfftfreq(nfft, 1 / fs)
    in_band = (freqs >= lo) & (freqs <= hi)
    idx = np.flatnonzero(in_band)
    if idx.size == 0:
        raise BandEmpty(f"no FFT bin of a {nfft}-point transform falls in ({lo}, {hi}) Hz")
    power = mag**2
    if _band_rms(power, in_band, nfft, taper) < power_floor:
        raise DegenerateSignal("in-band power is below the floor; no oscillation to measure")
    k = int(idx[np.argmax(mag[idx])])
    ratio = float(power[k] / power[idx].sum())
    # half a raw bin of slack so in-band tones at the edge are not flagged
    slack = 0.5 * fs / n
    wide = np.flatnonzero((freqs >= lo / 2) & (freqs <= 2 * hi))
    k_wide = int(wide[np.argmax(mag[wide])])
    outside = not lo - slack <= freqs[k_wide] <= hi + slack
    offset = 0.0
    if interpolate and 0 < k < len(mag) - 1 and np.all(mag[k - 1:k + 2] > 0):
        offset = parabolic_vertex(*np.log(mag[k - 1:k + 2]))
    f = float(np.clip((k + offset) * fs / nfft, lo, hi))
    return FrequencyEstimate(f, (lo, hi), ratio, method, outside)


def _autocorrelation(window, band, power_floor):
    lo, hi = _check_band(band, window.sample_rate)
    fs = window.sample_rate
    x = _prepare(window)
    if np.sqrt(np.mean(x**2)) < power_floor:
        raise DegenerateSignal("signal power is below the floor; no oscillation to measure")
    n = len(x)
    ac = signal.correlate(x, x, mode="full", method="fft")[n - 1:]
    ac = ac / ac[0]
    lag_lo = max(1, int(np.floor(fs / hi)))
    lag_hi = min(n - 2, int(np.ceil(fs / lo)))
    if lag_lo >= lag_hi:
        raise BandEmpty(f"no usable lag for band ({lo}, {hi}) Hz in a {n}-sample window")
    # unbiased normalisation so long lags are not penalised
    seg = ac[lag_lo:lag_hi + 1] * n / (n - np.arange(lag_lo, lag_hi + 1))
    j = int(np.argmax(seg))
    lag = lag_lo + j
    offset = 0.0
    if 0 < j < len(seg) - 1:
        offset = parabolic_vertex(*seg[j - 1:j + 2])
    f = float(np.clip(fs / (lag + offset), lo, hi))
    ratio = float(np.clip(seg[j], 1e-12, 1.0))
    return FrequencyEstimate(f, (lo, hi), ratio, "autocorrelation", bool(j in (0, len(seg) - 1)))


def _zero_crossing(window, band, power_floor):
    lo, hi = _check_band(band, window.sample_rate)
    fs = window.sample_rate
    x = _prepare(window)
    if np.sqrt(np.mean(x**2)) < power_floor:
        raise DegenerateSignal("signal power is below the floor; no oscillation to measure")
    i = np.flatnonzero((x[:-1] < 0) & (x[1:] >= 0))
    if i.size < 2:
        raise DegenerateSignal("fewer than two rising zero crossings in the window")
    # linear interpolation of each crossing instant
    times = (i + x[i] / (x[i] - x[i + 1])) / fs
    f = (len(times) - 1) / (times[-1] - times[0])
    return FrequencyEstimate(float(np.clip(f, lo, hi)), (lo, hi), 1.0, "zero_crossing", bool(not lo <= f <= hi))


def estimate_frequency(
    window: Window,
    band: tuple[float, float] = DEFAULT_BAND,
    method: str = "fft",
    pad_factor: int = PAD_FACTOR,
    power_floor: float = DEFAULT_POWER_FLOOR,
) -> FrequencyEstimate:
    """Dominant oscillation frequency (Hz) of `window` within `band`.

    Raises BandEmpty when no spectral bin lies in the band and DegenerateSignal
    when the in-band RMS is below `power_floor` (mV).
    """
    if method == "fft":
        return _spectral_peak(window, band, pad_factor, power_floor, True, method)
    if method == "raw_bin":
        return _spectral_peak(window, band, 1, power_floor, False, method)
    if method == "autocorrelation":
        return _autocorrelation(window, band, power_floor)
    if method == "zero_crossing":
        return _zero_crossing(window, band, power_floor)
    raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


def frequency_change(
    trace: Trace,
    protocol: TrialProtocol | None = None,
    band: tuple[float, float] = DEFAULT_BAND,
    method: str = "fft",
    **estimator_kw,
) -> FrequencyChange:
    """Percentage change between the windows just before and just after stimulation.

    Window lengths come from `protocol`; its own stimulation time is ignored in
    favour of the trace's.
    """
    if trace.stimulation_time is None:
        raise MissingStimulationTime("trace has no stimulation time")
    protocol = protocol or TrialProtocol()
    ts = trace.stimulation_time
    estimates = {}
    for label, start, duration in (
        ("pre", ts - protocol.pre_duration, protocol.pre_duration),
        ("post", ts, protocol.post_duration),
    ):
        try:
            window = Window.from_trace(trace, start, duration)
            estimates[label] = estimate_frequency(window, band, method, **estimator_kw)
        except (BandEmpty, DegenerateSignal, InvalidWindow) as exc:
            labelled = type(exc)(f"{label}-stimulation window: {exc}")
            labelled.window = label
            raise labelled from exc
    return FrequencyChange.from_frequencies(
        estimates["pre"].frequency, estimates["post"].frequency, pre=estimates["pre"], post=estimates["post"]
    )
