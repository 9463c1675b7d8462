"""Quantum-jump (Monte Carlo wavefunction) trajectories over compiled schedules.

Each segment has a constant effective Hamiltonian, so the no-jump evolution
over one substep is an exact matrix exponential. Substep propagators and
their powers of two are cached per (drive, dt); a segment is traversed in
the largest power-of-two chunks that keep the squared norm above the
current jump threshold. Inside the substep where the threshold is crossed
the jump instant is located by bisection on a Taylor expansion of the
propagated vector.
"""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .hilbert import initial_state
from .model import DriveSettings, ModelContext
from .schedule import MEASURE, PulseSegment, Schedule

RNG_SCHEME = "numpy-Philox4x64/SeedSequence(master_seed,spawn_key=(trajectory_id,purpose))"
NORM_FLOOR = 1e-15


class IntegrationError(RuntimeError):
    def __init__(self, message, time=None):
        super().__init__(message if time is None else f"{message} (t={time:.6e} s)")
        self.time = time


@dataclass(frozen=True)
class IntegratorSettings:
    dt_fraction: float = 0.05
    max_dt: float = 1e-6
    norm_tol: float = 1e-10
    cache_propagators: bool = True
    check_norm: bool = True

    def __post_init__(self):
        if self.dt_fraction <= 0 or self.max_dt <= 0:
            raise ValueError("substep settings must be positive")


DEFAULT_SETTINGS = IntegratorSettings()


@dataclass(frozen=True)
class Jump:
    time: float
    label: str
    atom: int


@dataclass
class TrajectoryResult:
    final_state: np.ndarray
    snapshots: list
    jumps: list
    trajectory_id: int
    rng_stream: str
    trace: list = field(default_factory=list)


@dataclass
class TrajectoryState:
    """Mutable per-trajectory state: unnormalized vector, clock and jump threshold."""

    psi: np.ndarray
    time: float = 0.0
    threshold: float = 0.0
    jumps: list = field(default_factory=list)


def trajectory_rng(master_seed: int, trajectory_id: int, purpose: int = 0) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(trajectory_id), int(purpose)))
    return np.random.Generator(np.random.Philox(seq))


def rng_descriptor(master_seed: int, trajectory_id: int) -> str:
    return f"philox:seed={master_seed}:id={trajectory_id}"


def fastest_scale(drive: DriveSettings, context: ModelContext, active_only: bool = False) -> float:
    """Largest angular frequency in the segment Hamiltonian.

    With ``active_only`` the blockade shift counts only while a laser is on
    (the master-equation solver treats the coherent part exactly).
    """
    scales = [drive.mw_amp, drive.ancilla_laser_amp, *drive.laser_amp]
    scales += [abs(d) for d in drive.mw_detuning]
    if not active_only or drive.laser_on:
        scales.append(context.max_shift)
    return max(scales, default=0.0)


def substep(duration: float, scale: float, settings: IntegratorSettings, fraction: float | None = None):
    """Number of substeps and their length for a segment of ``duration``."""
    limit = settings.max_dt
    if scale > 0:
        limit = min(limit, (settings.dt_fraction if fraction is None else fraction) * 2 * np.pi / scale)
    n = max(1, math.ceil(duration / limit * (1 - 1e-12)))
    return n, duration / n


class SegmentPropagator:
    """``exp(-i H_eff dt)`` and its powers ``P**(2**j)``, built lazily."""

    def __init__(self, h_eff: np.ndarray, dt: float):
        self.h_eff = h_eff
        self.dt = dt
        self._powers = [expm(-1j * dt * h_eff)]
        self._lock = threading.Lock()

    @property
    def step(self) -> np.ndarray:
        return self._powers[0]

    def power(self, j: int) -> np.ndarray:
        if j >= len(self._powers):
            with self._lock:
                while j >= len(self._powers):
                    last = self._powers[-1]
                    self._powers.append(last @ last)
        return self._powers[j]


class PropagatorCache:
    """Thread-safe cache of segment propagators keyed by (drive, dt)."""

    def __init__(self, context: ModelContext, enabled: bool = True):
        self.context = context
        self.enabled = enabled
        self._store = {}
        self._lock = threading.Lock()

    def get(self, drive: DriveSettings, dt: float) -> SegmentPropagator:
        key = (drive, dt)
        prop = self._store.get(key)
        if prop is None:
            with self._lock:
                prop = self._store.get(key)
                if prop is None:
                    prop = SegmentPropagator(self.context.effective_hamiltonian(drive), dt)
                    if self.enabled:
                        self._store[key] = prop
        return prop

    def __len__(self):
        return len(self._store)


def segment_propagator(segment: PulseSegment, context: ModelContext,
                       settings: IntegratorSettings = DEFAULT_SETTINGS, cache=None) -> np.ndarray:
    """Substep propagator ``exp(-i H_eff dt)`` for ``segment``."""
    _, dt = substep(segment.duration, fastest_scale(segment.drive, context), settings)
    if cache is None:
        cache = PropagatorCache(context, settings.cache_propagators)
    return cache.get(segment.drive, dt).step


def _norm2(psi) -> float:
    return float(np.vdot(psi, psi).real)


class _TaylorPath:
    """psi(s * span) for s in [0, 1] from a truncated Taylor series."""

    def __init__(self, h_eff, psi, span, time):
        a = -1j * span * h_eff
        terms = [psi]
        ref = np.sqrt(_norm2(psi))
        for n in range(1, 200):
            nxt = (a @ terms[-1]) / n
            terms.append(nxt)
            if n >= 4 and np.sqrt(_norm2(nxt)) < 1e-17 * ref:
                break
        else:
            raise IntegrationError("Taylor series failed to converge in substep", time)
        self.terms = np.array(terms)
        self._orders = np.arange(len(terms))

    def __call__(self, s: float) -> np.ndarray:
        return (s ** self._orders) @ self.terms


def apply_jump(psi, context: ModelContext, rng: np.random.Generator):
    """Pick a channel with probability proportional to ``||L_m psi||**2`` and apply it."""
    ops = context.monomial_jumps
    candidates = [op.matvec(psi) for op in ops]
    weights = np.array([_norm2(c) for c in candidates])
    total = weights.sum()
    if total <= 0:
        raise IntegrationError("jump triggered with vanishing jump rates")
    m = int(rng.choice(len(ops), p=weights / total))
    out = candidates[m] / np.sqrt(weights[m])
    return out, m


def _jump_in_substep(state: TrajectoryState, prop: SegmentPropagator, context, rng, settings, t_start):
    """Advance one substep whose end lies below the jump threshold."""
    remaining, t = prop.dt, t_start
    psi = state.psi
    while remaining > 0:
        path = _TaylorPath(prop.h_eff, psi, remaining, t)
        end = path(1.0)
        r = state.threshold
        if _norm2(end) > r:
            state.psi = end
            return
        lo, hi = 0.0, 1.0
        mid, at = 0.0, psi
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            at = path(mid)
            n2 = _norm2(at)
            if abs(n2 - r) <= settings.norm_tol * r or hi - lo <= 4e-16:
                break
            if n2 > r:
                lo = mid
            else:
                hi = mid
        tau = mid * remaining
        psi, m = apply_jump(at, context, rng)
        op = context.monomial_jumps[m]
        state.jumps.append(Jump(t + tau, op.label, op.atom))
        state.threshold = rng.random()
        remaining -= tau
        t += tau
    state.psi = psi


def evolve_segment(state: TrajectoryState, segment: PulseSegment, context: ModelContext,
                   rng: np.random.Generator, settings: IntegratorSettings = DEFAULT_SETTINGS,
                   cache: PropagatorCache | None = None, record: list | None = None, points: int = 0):
    """Propagate ``state`` through one segment, performing quantum jumps.

    ``state.psi`` is left unnormalized between jumps so the norm decay
    carries over segment boundaries. When ``record`` is given, ``points``
    normalized samples ``(time, psi)`` are appended at evenly spaced substeps.
    Returns the jumps that occurred in this segment.
    """
    if segment.duration == 0:
        return []
    n, dt = substep(segment.duration, fastest_scale(segment.drive, context), settings)
    if cache is None:
        cache = PropagatorCache(context, settings.cache_propagators)
    prop = cache.get(segment.drive, dt)
    dissipative = bool(context.jumps)
    t0 = state.time
    n_before = len(state.jumps)
    targets = sorted({max(1, round(n * s / points)) for s in range(1, points + 1)} | {n}) if points else [n]

    i = 0
    for target in targets:
        cap = 64
        while i < target:
            j = min(cap, (target - i).bit_length() - 1)
            cand = prop.power(j) @ state.psi
            if not dissipative:
                state.psi = cand
                i += 1 << j
                continue
            n2 = _norm2(cand)
            if settings.check_norm and n2 > _norm2(state.psi) * (1 + 1e-12):
                raise IntegrationError("norm increased under non-Hermitian evolution", t0 + i * dt)
            if n2 > state.threshold:
                if n2 < NORM_FLOOR:
                    raise IntegrationError("norm underflow without jump", t0 + i * dt)
                state.psi = cand
                i += 1 << j
                cap = 64
            elif j > 0:
                cap = j - 1
            else:
                _jump_in_substep(state, prop, context, rng, settings, t0 + i * dt)
                i += 1
                cap = 64
        state.time = t0 + i * dt
        if record is not None:
            record.append((state.time, state.psi / np.sqrt(_norm2(state.psi))))
    state.time = t0 + segment.duration
    return state.jumps[n_before:]


def run_trajectory(schedule: Schedule, context: ModelContext, master_seed: int, trajectory_id: int = 0,
                   settings: IntegratorSettings = DEFAULT_SETTINGS, cache: PropagatorCache | None = None,
                   trace_points: int = 0) -> TrajectoryResult:
    """Fold :func:`evolve_segment` over the schedule.

    A normalized snapshot is stored at every measurement marker. With
    ``trace_points`` > 0, samples are also recorded inside each segment.
    """
    rng = trajectory_rng(master_seed, trajectory_id)
    if cache is None:
        cache = PropagatorCache(context, settings.cache_propagators)
    psi0 = initial_state(context.config)
    state = TrajectoryState(psi0, threshold=rng.random() if context.jumps else 0.0)
    snapshots = []
    trace = [(0.0, psi0.copy())] if trace_points else None
    for seg in schedule.segments:
        if seg.label == MEASURE:
            snapshots.append(state.psi / np.sqrt(_norm2(state.psi)))
            continue
        evolve_segment(state, seg, context, rng, settings, cache, trace, trace_points)
    final = state.psi / np.sqrt(_norm2(state.psi))
    return TrajectoryResult(final, snapshots, list(state.jumps), trajectory_id,
                            rng_descriptor(master_seed, trajectory_id), trace or [])


def run_trajectories(schedule: Schedule, context: ModelContext, master_seed: int, n_traj: int,
                     settings: IntegratorSettings = DEFAULT_SETTINGS, workers: int = 1,
                     cache: PropagatorCache | None = None) -> list[TrajectoryResult]:
    """Run trajectory ids ``0..n_traj-1``; the result order never depends on ``workers``."""
    if n_traj < 1:
        raise ValueError("need at least one trajectory")
    if cache is None:
        cache = PropagatorCache(context, settings.cache_propagators)

    def work(tid):
        return run_trajectory(schedule, context, master_seed, tid, settings, cache)

    if workers <= 1:
        return [work(tid) for tid in range(n_traj)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(work, range(n_traj)))
    return sorted(results, key=lambda r: r.trajectory_id)
