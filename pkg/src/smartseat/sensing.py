"""Synthetic seat-sensing model.

Models the physical sensing path of the pressure cushion: ten FSR sensors
laid out mirror-symmetrically on a 45 cm x 35 cm cushion, a resistive
voltage divider per sensor, ADC quantization, and per-posture force
signatures used to synthesize labeled sensor streams.

Sensor numbering: S1..S5 run front-to-back along the left half, S6..S10
mirror them on the right so that Si pairs with S(11-i). The pelvic group
(highest load when sitting upright) is {S4, S5, S6, S7}.

All generators are pure functions of (inputs, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, InvalidLabelError, ParseError
from .postures import EMPTY, POSTURES

NUM_SENSORS = 10
REFERENCE_MASS_KG = 65.0
MAX_FORCE_KG = 10.0
PELVIC = (3, 4, 5, 6)  # zero-based indices of S4, S5, S6, S7
OUTER = (0, 1, 2, 7, 8, 9)

# Canonical sensor coordinates (cm): x across the 35 cm width, y along the
# 45 cm depth with y=0 at the front edge. Left column S1..S5, right column
# S6..S10 mirrored about x = 17.5.
_LEFT_POSITIONS = (
    (10.0, 8.0),
    (10.0, 16.0),
    (10.0, 24.0),
    (11.5, 31.0),
    (11.5, 38.0),
)


def _mirrored(width: float, left: Sequence[tuple[float, float]]):
    right = [(width - x, y) for x, y in reversed(left)]
    return tuple(left) + tuple(right)


@dataclass(frozen=True)
class CushionLayout:
    """Geometry of the sensing cushion."""

    width_cm: float = 35.0
    depth_cm: float = 45.0
    sensor_positions: tuple[tuple[float, float], ...] = _mirrored(35.0, _LEFT_POSITIONS)

    def __post_init__(self):
        if len(self.sensor_positions) != NUM_SENSORS:
            raise InvalidInputError(
                f"layout needs exactly {NUM_SENSORS} sensors, got {len(self.sensor_positions)}"
            )
        for i, (x, y) in enumerate(self.sensor_positions):
            if not (0.0 <= x <= self.width_cm and 0.0 <= y <= self.depth_cm):
                raise InvalidInputError(f"sensor S{i + 1} at ({x}, {y}) outside cushion")
        for i in range(5):
            xl, yl = self.sensor_positions[i]
            xr, yr = self.sensor_positions[9 - i]
            if abs((self.width_cm - xl) - xr) > 1e-9 or abs(yl - yr) > 1e-9:
                raise InvalidInputError(
                    f"S{i + 1}/S{10 - i} are not mirror images about the long axis"
                )


@dataclass(frozen=True)
class FsrDividerConfig:
    """FSR + voltage divider + ADC model constants.

    The FSR is modeled with conductance proportional to force:
    R_fsr = fsr_scale_ohm_kg / force_kg (open circuit at zero force).
    """

    supply_v: float = 3.3
    fixed_resistor_ohm: float = 10_000.0
    fsr_scale_ohm_kg: float = 30_000.0
    adc_bits: int = 12
    max_force_kg: float = MAX_FORCE_KG

    def __post_init__(self):
        if self.supply_v <= 0:
            raise InvalidInputError("supply_v must be positive")
        if self.fixed_resistor_ohm <= 0:
            raise InvalidInputError("fixed_resistor_ohm must be positive")
        if not 8 <= self.adc_bits <= 16:
            raise InvalidInputError("adc_bits must be within 8..16")
        if self.max_force_kg <= 0:
            raise InvalidInputError("max_force_kg must be positive")

    @property
    def full_scale(self) -> int:
        return (1 << self.adc_bits) - 1


DEFAULT_DIVIDER = FsrDividerConfig()


def fsr_adc(force_kg: float, cfg: FsrDividerConfig = DEFAULT_DIVIDER) -> int:
    """ADC count for a single sensor under ``force_kg``.

    Divider output Vout = Vs * Rfixed / (Rfsr + Rfixed), quantized with
    round-half-up to counts in [0, 2^bits - 1]. Monotone in force; zero
    force reads zero counts (infinite FSR resistance).
    """
    if force_kg < 0:
        raise InvalidInputError(f"force must be non-negative, got {force_kg}")
    if force_kg > cfg.max_force_kg:
        raise InvalidInputError(
            f"force {force_kg} kg exceeds sensor range {cfg.max_force_kg} kg"
        )
    if force_kg == 0:
        return 0
    r_fsr = cfg.fsr_scale_ohm_kg / force_kg
    ratio = cfg.fixed_resistor_ohm / (r_fsr + cfg.fixed_resistor_ohm)
    return int(math.floor(ratio * cfg.full_scale + 0.5))


def forces_to_counts(forces: np.ndarray, cfg: FsrDividerConfig = DEFAULT_DIVIDER) -> np.ndarray:
    """Vectorized fsr_adc over an array of forces."""
    forces = np.asarray(forces, dtype=float)
    if np.any(forces < 0) or np.any(forces > cfg.max_force_kg):
        raise InvalidInputError("forces outside [0, max_force_kg]")
    r_fsr = np.divide(cfg.fsr_scale_ohm_kg, forces, out=np.full_like(forces, np.inf),
                      where=forces > 0)
    ratio = cfg.fixed_resistor_ohm / (r_fsr + cfg.fixed_resistor_ohm)
    return np.floor(ratio * cfg.full_scale + 0.5).astype(np.int64)


@dataclass(frozen=True)
class PostureSignature:
    """Per-posture force signature: mean and noise SD per sensor plus a
    run-to-run left/right asymmetry scale."""

    posture: str
    mean_force_kg: tuple[float, ...]
    spread_kg: tuple[float, ...]
    tilt_jitter: float = 0.04

    def __post_init__(self):
        if len(self.mean_force_kg) != NUM_SENSORS or len(self.spread_kg) != NUM_SENSORS:
            raise InvalidInputError("signature needs 10 mean and 10 spread values")
        if sum(self.mean_force_kg) > REFERENCE_MASS_KG:
            raise InvalidInputError(
                f"{self.posture}: signature mean forces sum above the reference mass"
            )


def _sig(posture, means, spreads, tilt=0.04):
    return PostureSignature(posture, tuple(means), tuple(spreads), tilt)


# Reference signatures for a 65 kg subject; scaled linearly with mass.
# Upright distributes load evenly onto the pelvic group; lean postures load
# one side; a crossed leg lifts the front thigh sensor off the mat entirely.
DEFAULT_SIGNATURES: dict[str, PostureSignature] = {
    s.posture: s
    for s in (
        _sig("Empty", [0.0] * 10, [0.0] * 10, tilt=0.0),
        _sig(
            "Upright",
            [3.0, 4.0, 5.0, 8.0, 7.5, 7.5, 8.0, 5.0, 4.0, 3.0],
            [0.30, 0.30, 0.30, 0.15, 0.15, 0.15, 0.15, 0.30, 0.30, 0.30],
        ),
        _sig(
            "Slouching",
            [3.5, 4.5, 3.5, 6.0, 8.0, 8.0, 6.0, 3.5, 4.5, 3.5],
            [0.30] * 10,
        ),
        _sig(
            "LeanLeft",
            [5.5, 6.5, 7.5, 10.0, 9.0, 4.0, 4.5, 3.0, 2.5, 2.0],
            [0.35] * 10,
        ),
        _sig(
            "LeanRight",
            [2.0, 2.5, 3.0, 4.5, 4.0, 9.0, 10.0, 7.5, 6.5, 5.5],
            [0.35] * 10,
        ),
        _sig(
            "LeftLegCrossed",
            [0.0, 2.0, 4.0, 6.5, 6.0, 7.5, 8.5, 5.5, 5.0, 4.0],
            [0.0, 0.25, 0.30, 0.30, 0.30, 0.30, 0.30, 0.30, 0.30, 0.30],
        ),
        _sig(
            "RightLegCrossed",
            [4.0, 5.0, 5.5, 8.5, 7.5, 6.0, 6.5, 4.0, 2.0, 0.0],
            [0.30, 0.30, 0.30, 0.30, 0.30, 0.30, 0.30, 0.30, 0.25, 0.0],
        ),
        _sig(
            "LeanBack",
            [6.0, 6.5, 4.0, 5.5, 5.0, 5.0, 5.5, 4.0, 6.5, 6.0],
            [0.30] * 10,
        ),
    )
}


def gen_posture_pressure(
    posture: str,
    subject_mass_kg: float,
    seed: int,
    signatures: dict[str, PostureSignature] | None = None,
) -> np.ndarray:
    """One noisy 10-sensor force vector (kg) for ``posture``.

    Noise is drawn per mirror pair (the same draw feeds Si and S(11-i)) so
    symmetric postures stay symmetric; run-to-run asymmetry comes from a
    single tilt factor scaling the left half up and the right half down.
    Deterministic for a fixed seed; forces clip to [0, 10] kg.
    """
    table = signatures if signatures is not None else DEFAULT_SIGNATURES
    if posture not in table:
        raise InvalidLabelError(f"unknown posture {posture!r}")
    if not 30.0 <= subject_mass_kg <= 100.0:
        raise InvalidInputError(
            f"subject mass {subject_mass_kg} kg outside the 30..100 kg range"
        )
    sig = table[posture]
    rng = np.random.default_rng(seed)
    pair_noise = rng.normal(size=5)
    tilt = rng.normal() * sig.tilt_jitter

    base = np.asarray(sig.mean_force_kg) * (subject_mass_kg / REFERENCE_MASS_KG)
    side = np.concatenate([np.full(5, 1.0 + tilt), np.full(5, 1.0 - tilt)])
    noise = np.concatenate([pair_noise, pair_noise[::-1]]) * np.asarray(sig.spread_kg)
    return np.clip(base * side + noise, 0.0, MAX_FORCE_KG)


@dataclass(frozen=True)
class SensorFrame:
    """One timestamped cushion reading: raw ADC counts plus the forces they
    were derived from, optionally carrying a ground-truth label."""

    timestamp_ms: int
    counts: tuple[int, ...]
    forces_kg: tuple[float, ...]
    label: str | None = None

    def __post_init__(self):
        if len(self.counts) != NUM_SENSORS or len(self.forces_kg) != NUM_SENSORS:
            raise InvalidInputError("frame needs 10 counts and 10 forces")

    @property
    def total_force_kg(self) -> float:
        return float(sum(self.forces_kg))


def synth_session(
    schedule: Sequence[tuple[str, float]],
    subject_mass_kg: float,
    rate_hz: float,
    seed: int,
    empty_gap_s: float = 2.0,
    cfg: FsrDividerConfig = DEFAULT_DIVIDER,
    signatures: dict[str, PostureSignature] | None = None,
) -> list[SensorFrame]:
    """Synthesize a labeled frame stream for one subject.

    Emits frames on a fixed clock (period = round(1000/rate_hz) ms, first
    frame at t=0). Each scheduled posture segment is followed by an
    empty-seat gap of ``empty_gap_s`` (the volunteer standing up between
    postures), including after the final segment.
    """
    if not schedule:
        raise InvalidInputError("schedule must be non-empty")
    if not 1.0 <= rate_hz <= 100.0:
        raise InvalidInputError(f"rate {rate_hz} Hz outside 1..100 Hz")
    if empty_gap_s < 0:
        raise InvalidInputError("empty_gap_s must be non-negative")
    for posture, duration_s in schedule:
        if posture not in POSTURES:
            raise InvalidLabelError(f"unknown posture {posture!r} in schedule")
        if duration_s <= 0:
            raise InvalidInputError(f"non-positive duration for {posture}")

    period_ms = round(1000.0 / rate_hz)
    segments: list[tuple[str, int]] = []  # (label, end_ms cumulative)
    t_end = 0
    for posture, duration_s in schedule:
        t_end += round(duration_s * 1000)
        segments.append((posture, t_end))
        if empty_gap_s > 0:
            t_end += round(empty_gap_s * 1000)
            segments.append((EMPTY, t_end))

    rng = np.random.default_rng(seed)
    frames: list[SensorFrame] = []
    seg_i = 0
    t = 0
    while t < t_end:
        while t >= segments[seg_i][1]:
            seg_i += 1
        label = segments[seg_i][0]
        frame_seed = int(rng.integers(0, 2**32))
        forces = gen_posture_pressure(label, subject_mass_kg, frame_seed, signatures)
        counts = forces_to_counts(forces, cfg)
        frames.append(
            SensorFrame(
                timestamp_ms=t,
                counts=tuple(int(c) for c in counts),
                forces_kg=tuple(float(f) for f in forces),
                label=label,
            )
        )
        t += period_ms
    return frames


# ---------------------------------------------------------------------------
# Plain-text interchange: layout and signature tables.

LAYOUT_HEADER = "sensor_id,x_cm,y_cm"


def save_layout(layout: CushionLayout, path) -> None:
    lines = [LAYOUT_HEADER]
    for i, (x, y) in enumerate(layout.sensor_positions):
        lines.append(f"S{i + 1},{x!r},{y!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_layout(path, width_cm: float = 35.0, depth_cm: float = 45.0) -> CushionLayout:
    positions: dict[int, tuple[float, float]] = {}
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != LAYOUT_HEADER:
        raise ParseError(f"expected header {LAYOUT_HEADER!r}", line=1)
    for n, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 3:
            raise ParseError(f"expected 3 columns, got {len(parts)}", line=n)
        sid = parts[0].strip()
        if not (sid.startswith("S") and sid[1:].isdigit()):
            raise ParseError(f"bad sensor id {sid!r}", line=n)
        try:
            positions[int(sid[1:])] = (float(parts[1]), float(parts[2]))
        except ValueError:
            raise ParseError(f"bad coordinate in {ln!r}", line=n) from None
    if sorted(positions) != list(range(1, NUM_SENSORS + 1)):
        raise ParseError(f"need sensors S1..S{NUM_SENSORS} exactly once")
    return CushionLayout(
        width_cm=width_cm,
        depth_cm=depth_cm,
        sensor_positions=tuple(positions[i] for i in range(1, NUM_SENSORS + 1)),
    )


def _signature_header() -> str:
    means = ",".join(f"s{i}_mean_kg" for i in range(1, 11))
    sds = ",".join(f"s{i}_sd_kg" for i in range(1, 11))
    return f"posture,{means},{sds}"


def save_signatures(table: dict[str, PostureSignature], path) -> None:
    lines = [_signature_header()]
    for posture in POSTURES:
        if posture not in table:
            continue
        sig = table[posture]
        vals = [repr(v) for v in sig.mean_force_kg] + [repr(v) for v in sig.spread_kg]
        lines.append(posture + "," + ",".join(vals))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_signatures(path, tilt_jitter: float = 0.04) -> dict[str, PostureSignature]:
    """Load a signature table. The file format carries no tilt column, so
    every loaded signature gets ``tilt_jitter`` (0 for Empty)."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != _signature_header():
        raise ParseError("bad signature table header", line=1)
    table: dict[str, PostureSignature] = {}
    for n, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 21:
            raise ParseError(f"expected 21 columns, got {len(parts)}", line=n)
        posture = parts[0].strip()
        if posture not in POSTURES:
            raise InvalidLabelError(f"line {n}: unknown posture {posture!r}")
        try:
            vals = [float(v) for v in parts[1:]]
        except ValueError:
            raise ParseError("bad numeric value", line=n) from None
        table[posture] = PostureSignature(
            posture,
            tuple(vals[:10]),
            tuple(vals[10:]),
            0.0 if posture == EMPTY else tilt_jitter,
        )
    return table


def with_tilt(table: dict[str, PostureSignature], tilt: float) -> dict[str, PostureSignature]:
    """Copy of a signature table with every tilt_jitter replaced."""
    return {k: replace(v, tilt_jitter=tilt) for k, v in table.items()}
