"""Compilation of the Grover protocol into piecewise-constant pulse segments."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .hilbert import RegisterConfig, Scheme
from .model import DriveSettings

PREP = "prep"
ORACLE_X_PRE = "oracle_x_pre"
ORACLE_X_POST = "oracle_x_post"
RYDBERG_UP = "rydberg_up"
RYDBERG_DOWN = "rydberg_down"
ANCILLA_2PI = "ancilla_2pi"
GROVER_MAP = "grover_map"
GROVER_UNMAP = "grover_unmap"
IDLE = "idle"
MEASURE = "measure_marker"


@dataclass(frozen=True)
class PulseParams:
    """Drive strengths and timing, in rad/s and seconds.

    ``mw_detuning`` is the Stark detuning applied to atoms that must not
    flip during the oracle X pulses.
    """

    mw_amp: float
    mw_detuning: float
    laser_amp: float
    gap: float = 50e-9
    ancilla_laser_amp: float | None = None

    def __post_init__(self):
        if self.mw_amp <= 0 or self.laser_amp <= 0:
            raise ValueError("microwave and laser amplitudes must be positive")
        if self.gap < 0:
            raise ValueError("gap must be non-negative")

    @property
    def ancilla_amp(self) -> float:
        return self.laser_amp if self.ancilla_laser_amp is None else self.ancilla_laser_amp


@dataclass(frozen=True)
class PulseSegment:
    duration: float
    drive: DriveSettings
    label: str
    atom: int | None = None
    stage: str = ""
    iteration: int = 0
    area: float | None = None

    def __post_init__(self):
        if self.label == MEASURE:
            if self.duration != 0:
                raise ValueError("measure markers have zero duration")
        elif not self.duration > 0:
            raise ValueError(f"segment {self.label} needs a positive duration")

    @property
    def tag(self) -> str:
        if self.label == MEASURE:
            return f"{MEASURE}({self.iteration})"
        if self.atom is not None:
            return f"{self.label}({self.atom})"
        return self.label


@dataclass(frozen=True)
class Schedule:
    segments: tuple[PulseSegment, ...]
    iterations: int
    config: RegisterConfig
    params: PulseParams | None = None
    _starts: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        starts, t = [], 0.0
        for seg in self.segments:
            starts.append(t)
            t += seg.duration
        object.__setattr__(self, "_starts", tuple(starts))

    @property
    def start_times(self) -> tuple[float, ...]:
        return self._starts

    @property
    def total_duration(self) -> float:
        return sum(seg.duration for seg in self.segments)

    @property
    def markers(self) -> list[int]:
        return [i for i, seg in enumerate(self.segments) if seg.label == MEASURE]

    def duration_of(self, predicate) -> float:
        return sum(seg.duration for seg in self.segments if predicate(seg))


def ideal_gate(phase: float, area: float) -> np.ndarray:
    """Resonant single-qubit rotation with the given field phase and pulse area."""
    c, s = np.cos(area / 2), np.sin(area / 2)
    return np.array(
        [[c, 1j * np.exp(-1j * phase) * s], [1j * np.exp(1j * phase) * s, c]], dtype=complex
    )


def _microwave(config, params, phase, area, label, stage, detuning=None):
    k = config.k
    drive = DriveSettings(
        mw_amp=params.mw_amp,
        mw_phase=phase,
        mw_detuning=tuple(detuning) if detuning is not None else (0.0,) * k,
        laser_amp=(0.0,) * k,
        laser_phase=(0.0,) * k,
    )
    return PulseSegment(area / params.mw_amp, drive, label, stage=stage, area=area)


def _laser(config, params, atoms, phase, label, stage, atom=None):
    k = config.k
    amps = tuple(params.laser_amp if j in atoms else 0.0 for j in range(k))
    phases = tuple(phase if j in atoms else 0.0 for j in range(k))
    drive = DriveSettings(mw_detuning=(0.0,) * k, laser_amp=amps, laser_phase=phases)
    return PulseSegment(np.pi / params.laser_amp, drive, label, atom=atom, stage=stage, area=np.pi)


def _idle(config, params, stage):
    return PulseSegment(params.gap, DriveSettings.off(config.k), IDLE, stage=stage)


def _with_gaps(pulses, config, params, stage):
    out = []
    for seg in pulses:
        out.append(seg)
        if params.gap > 0:
            out.append(_idle(config, params, stage))
    return out


def compile_preparation(config: RegisterConfig, params: PulseParams) -> list[PulseSegment]:
    """Global U_{-pi/2}(pi/2) taking every atom to (|0>+|1>)/sqrt(2)."""
    seg = _microwave(config, params, -np.pi / 2, np.pi / 2, PREP, "prep")
    return _with_gaps([seg], config, params, "prep")


def compile_rydberg_block(config: RegisterConfig, params: PulseParams, stage: str = "") -> list[PulseSegment]:
    """Blockade-conditioned phase flip.

    Direct scheme: pi pulses on atoms 0..k-1 then k-1..0, all with phase 0.
    Ancilla scheme: simultaneous pi pulse, ancilla 2pi pulse, simultaneous
    pi pulse with phase pi.
    """
    k = config.k
    if config.scheme is Scheme.DIRECT:
        pulses = [_laser(config, params, {j}, 0.0, RYDBERG_UP, stage, atom=j) for j in range(k)]
        pulses += [
            _laser(config, params, {j}, 0.0, RYDBERG_DOWN, stage, atom=j) for j in reversed(range(k))
        ]
    else:
        everyone = set(range(k))
        anc = DriveSettings(
            mw_detuning=(0.0,) * k,
            laser_amp=(0.0,) * k,
            laser_phase=(0.0,) * k,
            ancilla_laser_amp=params.ancilla_amp,
        )
        pulses = [
            _laser(config, params, everyone, 0.0, RYDBERG_UP, stage),
            PulseSegment(2 * np.pi / params.ancilla_amp, anc, ANCILLA_2PI, atom=k, stage=stage, area=2 * np.pi),
            _laser(config, params, everyone, np.pi, RYDBERG_DOWN, stage),
        ]
    segments = _with_gaps(pulses, config, params, stage)
    # the caller appends the trailing gap
    if params.gap > 0:
        segments.pop()
    return segments


def compile_oracle(config: RegisterConfig, params: PulseParams) -> list[PulseSegment]:
    """Phase flip of every basis state except the marked one (up to global phase)."""
    detuning = [(1 - b) * params.mw_detuning for b in config.marked_bits]
    pre = _microwave(config, params, 0.0, np.pi, ORACLE_X_PRE, "oracle", detuning)
    post = replace(pre, label=ORACLE_X_POST)
    segments = _with_gaps([pre], config, params, "oracle")
    segments += compile_rydberg_block(config, params, "oracle")
    if params.gap > 0:
        segments.append(_idle(config, params, "oracle"))
    segments += _with_gaps([post], config, params, "oracle")
    return segments


def compile_grover(config: RegisterConfig, params: PulseParams) -> list[PulseSegment]:
    """Inversion about the mean: U_{pi/2}(pi/2), Rydberg block, U_{-pi/2}(pi/2)."""
    mapping = _microwave(config, params, np.pi / 2, np.pi / 2, GROVER_MAP, "grover")
    unmapping = _microwave(config, params, -np.pi / 2, np.pi / 2, GROVER_UNMAP, "grover")
    segments = _with_gaps([mapping], config, params, "grover")
    segments += compile_rydberg_block(config, params, "grover")
    if params.gap > 0:
        segments.append(_idle(config, params, "grover"))
    segments += _with_gaps([unmapping], config, params, "grover")
    return segments


def compile_algorithm(config: RegisterConfig, params: PulseParams, iterations: int) -> Schedule:
    if iterations < 1:
        raise ValueError("at least one iteration is required")
    segments = compile_preparation(config, params)
    oracle = compile_oracle(config, params)
    grover = compile_grover(config, params)
    off = DriveSettings.off(config.k)
    for m in range(1, iterations + 1):
        segments += [replace(seg, iteration=m) for seg in oracle + grover]
        segments.append(PulseSegment(0.0, off, MEASURE, stage="measure", iteration=m))
    schedule = Schedule(tuple(segments), iterations, config, params)
    lint_schedule(schedule)
    return schedule


def lint_schedule(schedule: Schedule):
    """Reject segments that mix drives the protocol never overlaps."""
    config = schedule.config
    for i, seg in enumerate(schedule.segments):
        d = seg.drive
        if d.ancilla_laser_amp > 0 and (d.stark_on or d.microwave_on):
            raise ValueError(f"segment {i} ({seg.tag}) drives the ancilla with microwave/Stark fields")
        if d.microwave_on and d.laser_on:
            raise ValueError(f"segment {i} ({seg.tag}) overlaps microwave and laser drives")
        if d.ancilla_laser_amp > 0 and not config.has_ancilla:
            raise ValueError(f"segment {i} ({seg.tag}) drives a missing ancilla")
        if seg.area is not None:
            amp = d.mw_amp if d.microwave_on else max(max(d.laser_amp, default=0.0), d.ancilla_laser_amp)
            if not np.isclose(seg.duration * amp, seg.area, rtol=1e-12, atol=0):
                raise ValueError(f"segment {i} ({seg.tag}) violates its pulse area")


def dump_schedule(schedule: Schedule) -> str:
    """Whitespace-separated table, one row per segment."""
    k = schedule.config.k
    cols = ["start_time_s", "duration_s", "label", "mw_amp", "mw_phase"]
    cols += [f"det_{j}" for j in range(k)]
    cols += [f"laser_amp_{j}" for j in range(k)] + [f"laser_phase_{j}" for j in range(k)]
    if schedule.config.has_ancilla:
        cols += ["anc_laser_amp", "anc_laser_phase"]
    lines = ["\t".join(cols)]
    for t0, seg in zip(schedule.start_times, schedule.segments):
        d = seg.drive
        row = [f"{t0:.17g}", f"{seg.duration:.17g}", seg.tag, f"{d.mw_amp:.17g}", f"{d.mw_phase:.17g}"]
        row += [f"{d.detuning(j):.17g}" for j in range(k)]
        row += [f"{(d.laser_amp[j] if d.laser_amp else 0.0):.17g}" for j in range(k)]
        row += [f"{(d.laser_phase[j] if d.laser_phase else 0.0):.17g}" for j in range(k)]
        if schedule.config.has_ancilla:
            row += [f"{d.ancilla_laser_amp:.17g}", f"{d.ancilla_laser_phase:.17g}"]
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"
