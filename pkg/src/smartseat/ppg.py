"""PPG processing: waveform synthesis, a digital equivalent of the analog
front-end chain, peak detection, heart-rate estimation, and agreement
statistics between two independent pipelines.

The chain mirrors the four analog stages of a reflective PPG front end:

  stage_a  raw photodiode voltage (post trans-impedance amplifier)
  stage_b  DC removal (high-pass) followed by a fixed amplifier gain
  stage_c  band-pass limiting to the cardiac band
  stage_d  low-pass smoothing at 15 Hz plus programmable gain

Every filter is a causal second-order Butterworth biquad whose internal
state is initialized to steady state for the first input sample, like an
AC-coupled analog chain that has been powered long before the recording.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d, uniform_filter1d

from .errors import (
    InsufficientDataError,
    InvalidConfigError,
    InvalidInputError,
    UndefinedCorrelationError,
)

HR_MIN_BPM = 30.0
HR_MAX_BPM = 220.0
PGA_GAINS = (1.0, 2.0, 4.0, 8.0)
# Slight makeup gain on the final low-pass so the post-filter amplitude
# never dips below the band-pass stage at unity PGA.
LP_MAKEUP_GAIN = 1.05


@dataclass
class PpgTrace:
    """A sampled waveform with optional ground-truth systolic peak indices."""

    fs_hz: float
    samples: np.ndarray
    ground_truth_peaks: np.ndarray | None = None

    def __post_init__(self):
        if self.fs_hz <= 0:
            raise InvalidInputError("fs_hz must be positive")
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.size == 0:
            raise InvalidInputError("trace must contain samples")
        if self.ground_truth_peaks is not None:
            pk = np.asarray(self.ground_truth_peaks, dtype=int)
            if pk.size and (np.any(np.diff(pk) <= 0) or pk[-1] >= self.samples.size or pk[0] < 0):
                raise InvalidInputError("peak indices must be strictly increasing and in range")
            self.ground_truth_peaks = pk

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.fs_hz


@dataclass(frozen=True)
class NoiseSpec:
    dc_offset: float = 1.65
    drift_hz: float = 0.2
    drift_amp: float = 0.0
    white_sd: float = 0.0


def synth_ppg(
    hr_profile: float | Callable[[float], float],
    duration_s: float,
    fs_hz: float,
    noise: NoiseSpec = NoiseSpec(),
    seed: int = 0,
    pulse_amplitude: float = 0.1,
    pulse_width_frac: float = 0.05,
) -> PpgTrace:
    """Synthesize a PPG-like trace with one systolic pulse per cardiac period.

    ``hr_profile`` is either a constant bpm or a function of time (s). Peaks
    are scheduled by integrating the instantaneous period; the pulse train is
    a sum of Gaussian pulses riding on a DC level, optional sinusoidal drift,
    and white noise. Deterministic per seed.
    """
    if fs_hz < 50:
        raise InvalidInputError("fs_hz must be at least 50 Hz")
    if duration_s <= 0:
        raise InvalidInputError("duration must be positive")
    hr = hr_profile if callable(hr_profile) else (lambda t, h=float(hr_profile): h)

    n = int(round(duration_s * fs_hz))
    t = np.arange(n) / fs_hz
    rates = np.array([hr(float(ti)) for ti in t])
    if np.any(rates < HR_MIN_BPM) or np.any(rates > HR_MAX_BPM):
        raise InvalidInputError(
            f"heart-rate profile must stay within {HR_MIN_BPM}..{HR_MAX_BPM} bpm"
        )

    # Peak schedule: first peak half a period in, then one period apart,
    # with the period re-read from the profile at each beat.
    peaks: list[int] = []
    p = round(0.5 * fs_hz * 60.0 / hr(0.0))
    while p < n:
        peaks.append(int(p))
        p += round(fs_hz * 60.0 / hr(p / fs_hz))
    peak_idx = np.array(peaks, dtype=int)

    samples = np.full(n, noise.dc_offset, dtype=float)
    if noise.drift_amp:
        samples += noise.drift_amp * np.sin(2 * math.pi * noise.drift_hz * t)
    for k in peak_idx:
        period = 60.0 / hr(k / fs_hz)
        sigma = max(pulse_width_frac * period * fs_hz, 1.0)
        lo = max(0, int(k - 4 * sigma))
        hi = min(n, int(k + 4 * sigma) + 1)
        idx = np.arange(lo, hi)
        samples[lo:hi] += pulse_amplitude * np.exp(-0.5 * ((idx - k) / sigma) ** 2)
    if noise.white_sd:
        rng = np.random.default_rng(seed)
        samples += rng.normal(0.0, noise.white_sd, size=n)
    return PpgTrace(fs_hz=fs_hz, samples=samples, ground_truth_peaks=peak_idx)


def white_sd_for_snr(clean: PpgTrace, snr_db: float) -> float:
    """White-noise SD giving the requested SNR against a clean trace's AC power."""
    ac = clean.samples - clean.samples.mean()
    sig_power = float(np.mean(ac**2))
    return math.sqrt(sig_power / (10.0 ** (snr_db / 10.0)))


# ---------------------------------------------------------------------------
# Biquad filters.


class Biquad:
    """Causal second-order section (direct form II transposed).

    State starts at the steady-state response to the first pushed sample, so
    a constant input produces no startup transient.
    """

    def __init__(self, b: Sequence[float], a: Sequence[float]):
        self.b0, self.b1, self.b2 = b
        self.a1, self.a2 = a
        self._s1 = 0.0
        self._s2 = 0.0
        self._primed = False

    @classmethod
    def lowpass(cls, fc_hz: float, fs_hz: float, q: float = 1 / math.sqrt(2)) -> "Biquad":
        k = math.tan(math.pi * fc_hz / fs_hz)
        norm = 1.0 / (1.0 + k / q + k * k)
        b0 = k * k * norm
        return cls((b0, 2 * b0, b0), (2 * (k * k - 1) * norm, (1 - k / q + k * k) * norm))

    @classmethod
    def highpass(cls, fc_hz: float, fs_hz: float, q: float = 1 / math.sqrt(2)) -> "Biquad":
        k = math.tan(math.pi * fc_hz / fs_hz)
        norm = 1.0 / (1.0 + k / q + k * k)
        return cls(
            (norm, -2 * norm, norm),
            (2 * (k * k - 1) * norm, (1 - k / q + k * k) * norm),
        )

    def _prime(self, x0: float) -> None:
        # Steady state for a constant input x0: y = H(z=1) * x0.
        h0 = (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
        y = h0 * x0
        self._s1 = y - self.b0 * x0
        self._s2 = self.b2 * x0 - self.a2 * y
        self._primed = True

    def process(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.size == 0:
            return x.copy()
        if not self._primed:
            self._prime(float(x[0]))
        y = np.empty_like(x)
        s1, s2 = self._s1, self._s2
        b0, b1, b2, a1, a2 = self.b0, self.b1, self.b2, self.a1, self.a2
        for i in range(x.size):
            xi = x[i]
            yi = b0 * xi + s1
            s1 = b1 * xi - a1 * yi + s2
            s2 = b2 * xi - a2 * yi
            y[i] = yi
        self._s1, self._s2 = s1, s2
        return y


@dataclass(frozen=True)
class ChainConfig:
    """Gains and corner frequencies of the processing chain."""

    amp: float = 2.0
    pga: float | None = None  # None -> auto-select from PGA_GAINS
    hp_hz: float = 0.3
    bp_low_hz: float = 0.5
    bp_high_hz: float = 5.0
    lp_hz: float = 15.0
    full_scale_v: float = 3.3

    def validate(self, fs_hz: float) -> None:
        ok = 0 < self.hp_hz < self.bp_low_hz < self.bp_high_hz <= self.lp_hz < fs_hz / 2
        if not ok:
            raise InvalidConfigError(
                "band ordering must satisfy 0 < hp < bp_low < bp_high <= lp < fs/2, got "
                f"hp={self.hp_hz}, bp=({self.bp_low_hz}, {self.bp_high_hz}), "
                f"lp={self.lp_hz}, fs={fs_hz}"
            )
        if self.amp <= 0:
            raise InvalidConfigError("amp gain must be positive")
        if self.pga is not None and self.pga <= 0:
            raise InvalidConfigError("pga gain must be positive")


@dataclass
class ChainStages:
    """The four tap points of the chain, all at the input sample rate."""

    stage_a: PpgTrace
    stage_b: PpgTrace
    stage_c: PpgTrace
    stage_d: PpgTrace
    pga_gain: float

    def __post_init__(self):
        n = self.stage_a.samples.size
        for st in (self.stage_b, self.stage_c, self.stage_d):
            if st.samples.size != n or st.fs_hz != self.stage_a.fs_hz:
                raise InvalidInputError("all chain stages must share length and fs")


class StreamingChain:
    """Stateful chunk-by-chunk version of :func:`process_chain`.

    Holds per-stream filter state; confine each instance to a single
    logical consumer. The PGA cannot auto-range on a stream, so a missing
    pga selects unity gain.
    """

    def __init__(self, fs_hz: float, cfg: ChainConfig = ChainConfig()):
        cfg.validate(fs_hz)
        self.fs_hz = fs_hz
        self.cfg = cfg
        self.pga_gain = cfg.pga if cfg.pga is not None else 1.0
        self._hp = Biquad.highpass(cfg.hp_hz, fs_hz)
        self._bp_hp = Biquad.highpass(cfg.bp_low_hz, fs_hz)
        self._bp_lp = Biquad.lowpass(cfg.bp_high_hz, fs_hz)
        self._lp = Biquad.lowpass(cfg.lp_hz, fs_hz)

    def push(self, samples: np.ndarray) -> dict[str, np.ndarray]:
        a = np.asarray(samples, dtype=float)
        b = self._hp.process(a) * self.cfg.amp
        c = self._bp_lp.process(self._bp_hp.process(b))
        d = self._lp.process(c) * (LP_MAKEUP_GAIN * self.pga_gain)
        return {"a": a, "b": b, "c": c, "d": d}


def _select_pga(pre_pga: np.ndarray, fs_hz: float, full_scale_v: float) -> float:
    settle = min(int(2 * fs_hz), pre_pga.size - 1)
    peak = float(np.max(np.abs(pre_pga[settle:]))) if pre_pga.size > settle else 0.0
    if peak <= 0:
        return PGA_GAINS[0]
    target = 0.8 * full_scale_v
    best = PGA_GAINS[0]
    for g in PGA_GAINS:
        if g * peak <= target:
            best = g
    return best


def process_chain(raw: PpgTrace, cfg: ChainConfig = ChainConfig()) -> ChainStages:
    """Run a trace through the four-stage chain.

    stage_b removes the DC component and applies the fixed amplifier gain;
    stage_c band-limits to the cardiac band; stage_d low-passes at
    ``lp_hz`` and applies the PGA gain (auto-ranged toward 80% of full
    scale when ``cfg.pga`` is None).
    """
    cfg.validate(raw.fs_hz)
    fs = raw.fs_hz
    a = raw.samples.astype(float)
    b = Biquad.highpass(cfg.hp_hz, fs).process(a) * cfg.amp
    c = Biquad.lowpass(cfg.bp_high_hz, fs).process(Biquad.highpass(cfg.bp_low_hz, fs).process(b))
    pre = Biquad.lowpass(cfg.lp_hz, fs).process(c) * LP_MAKEUP_GAIN
    pga = cfg.pga if cfg.pga is not None else _select_pga(pre, fs, cfg.full_scale_v)
    d = pre * pga
    mk = lambda arr: PpgTrace(fs_hz=fs, samples=arr, ground_truth_peaks=raw.ground_truth_peaks)
    return ChainStages(stage_a=mk(a), stage_b=mk(b), stage_c=mk(c), stage_d=mk(d), pga_gain=pga)


def measure_tone_gain(cfg: ChainConfig, stage: str, freq_hz: float, fs_hz: float = 200.0,
                      duration_s: float = 40.0, relative_to_input: bool = False) -> float:
    """Steady-state amplitude at one chain tap for a unit sine at ``freq_hz``.

    Measures RMS*sqrt(2) over the trailing whole cycles after a long settle
    window. With ``relative_to_input`` the amplitude is divided by the
    preceding tap's amplitude, isolating that stage's own transfer.
    """
    n = int(duration_s * fs_hz)
    t = np.arange(n) / fs_hz
    trace = PpgTrace(fs_hz=fs_hz, samples=np.sin(2 * math.pi * freq_hz * t))
    stages = process_chain(trace, cfg)
    cycles = max(1, int(freq_hz * duration_s / 4))
    tail = int(cycles / freq_hz * fs_hz)
    amp_of = lambda s: float(np.sqrt(2.0 * np.mean(getattr(stages, f"stage_{s}").samples[-tail:] ** 2)))
    out = amp_of(stage)
    if not relative_to_input:
        return out
    prev = {"b": "a", "c": "b", "d": "c"}[stage]
    return out / amp_of(prev)


# ---------------------------------------------------------------------------
# Peak detection and heart rate.


def detect_peaks(
    signal: PpgTrace,
    refractory_s: float = 0.3,
    threshold_frac: float = 0.6,
    window_s: float = 3.0,
) -> np.ndarray:
    """Systolic peak indices via an adaptive threshold.

    A candidate must be the maximum of its +/-0.1 s neighborhood and rise
    above the rolling 3 s baseline (mean) by ``threshold_frac`` of the
    rolling maximum's excursion over that baseline. Candidates closer than
    the refractory period keep only the larger sample.
    """
    fs = signal.fs_hz
    x = signal.samples
    if x.size < 2 * fs:
        raise InsufficientDataError(
            f"need at least 2 s of signal ({int(2 * fs)} samples), got {x.size}"
        )
    w_local = max(1, int(round(0.1 * fs)))
    w_roll = max(3, int(round(window_s * fs)) | 1)
    roll_max = maximum_filter1d(x, size=w_roll, mode="nearest")
    roll_min = minimum_filter1d(x, size=w_roll, mode="nearest")
    baseline = uniform_filter1d(x, size=w_roll, mode="nearest")
    threshold = baseline + threshold_frac * (roll_max - baseline)

    local_max = maximum_filter1d(x, size=2 * w_local + 1, mode="nearest")
    # Strict prominence above the rolling minimum rejects flat stretches,
    # where max == min makes the threshold vacuous.
    is_peak = (x >= local_max) & (x >= threshold) & (x > roll_min)
    # Plateaus: keep only the first sample of a run of equal maxima.
    cand = np.flatnonzero(is_peak)
    refr = int(round(refractory_s * fs))
    peaks: list[int] = []
    for c in cand:
        if peaks and c - peaks[-1] <= w_local and x[c] == x[peaks[-1]]:
            continue  # same plateau
        if peaks and c - peaks[-1] < refr:
            if x[c] > x[peaks[-1]]:
                peaks[-1] = int(c)
        else:
            peaks.append(int(c))
    return np.asarray(peaks, dtype=int)


@dataclass
class HeartRateSeries:
    """Windowed heart-rate estimates; ``quality`` flags in-range values."""

    times_s: np.ndarray
    bpm: np.ndarray
    quality: np.ndarray  # bool per value


def heart_rate(
    peaks: np.ndarray,
    fs_hz: float,
    window_s: float = 10.0,
    step_s: float = 1.0,
) -> HeartRateSeries:
    """bpm = 60 / mean inter-beat interval over each sliding window.

    Windows step by ``step_s`` across the peak span; a single window covers
    everything when the span is shorter than ``window_s``. Out-of-range
    values clamp to [30, 220] with the quality flag cleared.
    """
    peaks = np.asarray(peaks, dtype=float)
    if peaks.size < 2:
        raise InsufficientDataError("need at least 2 peaks for a heart rate")
    t = peaks / fs_hz
    span = t[-1]
    starts = [0.0]
    s = step_s
    while s + window_s <= span:
        starts.append(s)
        s += step_s
    times, values, quality = [], [], []
    for w0 in starts:
        w1 = w0 + window_s if span >= window_s else span
        sel = t[(t >= w0) & (t <= w1)]
        if sel.size < 2:
            continue
        ibi = float(np.mean(np.diff(sel)))
        bpm = 60.0 / ibi
        ok = HR_MIN_BPM <= bpm <= HR_MAX_BPM
        times.append(w0 + window_s / 2)
        values.append(min(max(bpm, HR_MIN_BPM), HR_MAX_BPM))
        quality.append(ok)
    if not values:
        raise InsufficientDataError("no window contained two peaks")
    return HeartRateSeries(
        times_s=np.asarray(times), bpm=np.asarray(values), quality=np.asarray(quality)
    )


# ---------------------------------------------------------------------------
# Agreement statistics.


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    """Product-moment correlation of two equal-length series."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise InvalidInputError("series must be 1-D and equal length")
    if a.size < 3:
        raise InvalidInputError("need at least 3 points")
    ac = a - a.mean()
    bc = b - b.mean()
    va = float(np.dot(ac, ac))
    vb = float(np.dot(bc, bc))
    if va == 0.0 or vb == 0.0:
        raise UndefinedCorrelationError("correlation undefined for a constant series")
    return float(np.dot(ac, bc) / math.sqrt(va * vb))


@dataclass(frozen=True)
class AgreementReport:
    """Bland-Altman summary of two paired bpm series."""

    pearson_r: float
    bias_bpm: float
    loa_low_bpm: float
    loa_high_bpm: float
    n_pairs: int
    inside_fraction: float

    def __post_init__(self):
        if not -1.0 <= self.pearson_r <= 1.0:
            raise InvalidInputError("pearson_r outside [-1, 1]")
        if not self.loa_low_bpm <= self.bias_bpm <= self.loa_high_bpm:
            raise InvalidInputError("limits of agreement must bracket the bias")


def bland_altman(a: np.ndarray, b: np.ndarray) -> AgreementReport:
    """Bias and 1.96-SD limits of agreement for paired series a, b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise InvalidInputError("series must be 1-D and equal length")
    if a.size < 3:
        raise InvalidInputError("need at least 3 pairs")
    diffs = a - b
    bias = float(np.mean(diffs))
    sd = float(np.std(diffs, ddof=1))
    lo, hi = bias - 1.96 * sd, bias + 1.96 * sd
    inside = float(np.mean((diffs >= lo) & (diffs <= hi)))
    try:
        r = pearson(a, b)
    except UndefinedCorrelationError:
        r = 1.0 if np.array_equal(a, b) else 0.0
    return AgreementReport(
        pearson_r=r,
        bias_bpm=bias,
        loa_low_bpm=lo,
        loa_high_bpm=hi,
        n_pairs=int(a.size),
        inside_fraction=inside,
    )


# ---------------------------------------------------------------------------
# Dual-pipeline HR comparison (desk-scale stand-in for the reference device).


@dataclass(frozen=True)
class PipelineConfig:
    chain: ChainConfig = ChainConfig()
    refractory_s: float = 0.3
    threshold_frac: float = 0.6
    detect_window_s: float = 3.0
    hr_window_s: float = 10.0

    def run(self, raw: PpgTrace) -> tuple[HeartRateSeries, ChainStages]:
        stages = process_chain(raw, self.chain)
        peaks = detect_peaks(
            stages.stage_d,
            refractory_s=self.refractory_s,
            threshold_frac=self.threshold_frac,
            window_s=self.detect_window_s,
        )
        series = heart_rate(peaks, raw.fs_hz, window_s=self.hr_window_s)
        return series, stages


MAIN_PIPELINE = PipelineConfig()
# Independent reference: different corner frequencies, detector tuning and
# averaging window, standing in for the commercial wrist sensor.
REFERENCE_PIPELINE = PipelineConfig(
    chain=ChainConfig(amp=1.5, pga=2.0, hp_hz=0.25, bp_low_hz=0.4, bp_high_hz=6.0, lp_hz=12.0),
    refractory_s=0.35,
    threshold_frac=0.5,
    detect_window_s=4.0,
    hr_window_s=8.0,
)


def paired_hr(
    raw: PpgTrace,
    main: PipelineConfig = MAIN_PIPELINE,
    reference: PipelineConfig = REFERENCE_PIPELINE,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, ChainStages]:
    """Run both pipelines on one trace and pair their bpm series on the
    common window grid. Returns (times_s, main_bpm, ref_bpm, main_stages)."""
    hr_a, stages = main.run(raw)
    hr_b, _ = reference.run(raw)
    # Pair values at the main pipeline's window centers by interpolating the
    # reference series onto them (both series are dense over the same span).
    t = hr_a.times_s
    ref = np.interp(t, hr_b.times_s, hr_b.bpm)
    return t, hr_a.bpm, ref, stages


# ---------------------------------------------------------------------------
# Plain-text interchange.


def save_trace(trace: PpgTrace, path) -> None:
    """Write a trace as CSV ``t_s,value``."""
    t = np.arange(trace.samples.size) / trace.fs_hz
    with open(path, "w") as fh:
        fh.write("t_s,value\n")
        for ti, v in zip(t, trace.samples):
            fh.write(f"{float(ti)!r},{float(v)!r}\n")


def load_trace(path) -> PpgTrace:
    times: list[float] = []
    values: list[float] = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "t_s,value":
            raise InvalidInputError(f"expected header 't_s,value', got {header!r}")
        for ln in fh:
            ln = ln.strip()
            if not ln:
                continue
            a, b = ln.split(",")
            times.append(float(a))
            values.append(float(b))
    if len(times) < 2:
        raise InsufficientDataError("trace file needs at least 2 samples")
    fs = 1.0 / (times[1] - times[0])
    return PpgTrace(fs_hz=fs, samples=np.asarray(values))


def save_stage_dump(stages: ChainStages, path) -> None:
    """Four-column CSV with one column per chain tap."""
    with open(path, "w") as fh:
        fh.write("stage_a,stage_b,stage_c,stage_d\n")
        for a, b, c, d in zip(
            stages.stage_a.samples,
            stages.stage_b.samples,
            stages.stage_c.samples,
            stages.stage_d.samples,
        ):
            fh.write(f"{float(a)!r},{float(b)!r},{float(c)!r},{float(d)!r}\n")


def save_agreement_report(report: AgreementReport, path) -> None:
    with open(path, "w") as fh:
        fh.write("r,bias_bpm,loa_low,loa_high,n\n")
        fh.write(
            f"{report.pearson_r!r},{report.bias_bpm!r},"
            f"{report.loa_low_bpm!r},{report.loa_high_bpm!r},{report.n_pairs}\n"
        )
