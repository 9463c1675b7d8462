import itertools

import numpy as np
import pytest
from scipy.linalg import expm

from oracles import FiniteDetuningEvolution, IdealEvolution, fidelity_up_to_phase, qubit_amplitudes
from rydgrover.analysis import success_probability
from rydgrover.config import ExperimentConfig
from rydgrover.hilbert import RegisterConfig, Scheme, initial_state
from rydgrover.mcwf import TrajectoryState, evolve_segment, run_trajectory
from rydgrover.model import DriveSettings, InteractionSpec, ModelContext, RelaxationRates
from rydgrover.schedule import (
    ANCILLA_2PI,
    IDLE,
    MEASURE,
    PREP,
    RYDBERG_DOWN,
    RYDBERG_UP,
    PulseParams,
    PulseSegment,
    Schedule,
    compile_algorithm,
    compile_grover,
    compile_oracle,
    compile_preparation,
    compile_rydberg_block,
    dump_schedule,
    ideal_gate,
    lint_schedule,
)

TWO_PI = 2 * np.pi
PARAMS = PulseParams(mw_amp=TWO_PI * 20e3, mw_detuning=25 * TWO_PI * 20e3, laser_amp=TWO_PI * 0.5e6)
KETS = [np.array([1, 0], complex), np.array([0, 1], complex)]


def cfg(k, scheme="direct", marked=None):
    return RegisterConfig(k, Scheme(scheme), marked or "0" * k)


def grover_target(k, m):
    return np.sin((2 * m + 1) * np.arcsin(2 ** (-k / 2)))


# -- ideal_gate -----------------------------------------------------------

def test_x_pulse_on_ground():
    assert np.allclose(ideal_gate(0, np.pi) @ KETS[0], 1j * KETS[1], atol=1e-15)


def test_iz_identity():
    assert np.allclose(ideal_gate(np.pi / 2, np.pi) @ ideal_gate(0, np.pi), 1j * np.diag([1, -1]), atol=1e-15)


def test_half_pulse_makes_plus_state():
    assert np.allclose(ideal_gate(-np.pi / 2, np.pi / 2) @ KETS[0], np.ones(2) / np.sqrt(2), atol=1e-15)


def test_hadamard_realization():
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    assert np.allclose(ideal_gate(np.pi / 2, np.pi / 2) @ ideal_gate(0, np.pi), 1j * h, atol=1e-15)


@pytest.mark.parametrize("phase, area", [(0.3, 1.1), (-2.0, 5.0), (np.pi, 2 * np.pi)])
def test_ideal_gate_unitary(phase, area):
    u = ideal_gate(phase, area)
    assert np.allclose(u @ u.conj().T, np.eye(2), atol=1e-15)


# -- preparation ------------------------------------------------------------

def test_preparation_timing():
    prep, idle = compile_preparation(cfg(2), PARAMS)
    assert prep.label == PREP
    assert prep.duration == pytest.approx(12.5e-6, rel=1e-12)
    assert prep.drive.mw_phase == -np.pi / 2
    assert not prep.drive.stark_on
    assert idle.label == IDLE and idle.duration == pytest.approx(50e-9)


def test_preparation_ideal_state():
    psi = IdealEvolution(2, False).apply(compile_preparation(cfg(2), PARAMS), initial_state(cfg(2)))
    assert np.allclose(qubit_amplitudes(psi, 2, False), 0.5, atol=1e-15)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_preparation_simulation_matches_gate(k):
    c = cfg(k)
    ctx = ModelContext(c, RelaxationRates(), InteractionSpec.uniform(c, 1e7))
    state = TrajectoryState(initial_state(c))
    evolve_segment(state, compile_preparation(c, PARAMS)[0], ctx, np.random.default_rng(0))
    single = ideal_gate(-np.pi / 2, np.pi / 2) @ KETS[0]
    expected = single
    for _ in range(k - 1):
        expected = np.kron(expected, single)
    assert np.allclose(qubit_amplitudes(state.psi, k, False), expected, atol=1e-9)


# -- oracle ------------------------------------------------------------------

def test_oracle_detunings_marked_01():
    x = compile_oracle(cfg(2, marked="01"), PARAMS)[0]
    assert x.drive.mw_detuning == (PARAMS.mw_detuning, 0.0)
    assert x.drive.mw_phase == 0 and x.duration * x.drive.mw_amp == pytest.approx(np.pi)


def test_oracle_marked_11_all_resonant():
    segs = compile_oracle(cfg(2, marked="11"), PARAMS)
    xs = [s for s in segs if s.drive.microwave_on]
    assert len(xs) == 2 and all(s.drive.mw_detuning == (0.0, 0.0) for s in xs)


def test_oracle_structure():
    segs = compile_oracle(cfg(2, marked="01"), PARAMS)
    assert segs[0].label == "oracle_x_pre" and segs[-2].label == "oracle_x_post" and segs[-1].label == IDLE
    assert segs[0].drive == segs[-2].drive


@pytest.mark.parametrize("k, scheme", [(2, "direct"), (2, "ancilla"), (3, "direct"), (3, "ancilla")])
def test_ideal_oracle_phase_flip(k, scheme):
    ancilla = scheme == "ancilla"
    ev = IdealEvolution(k, ancilla)
    dim = 4 ** k * (2 if ancilla else 1)
    for bits in itertools.product("01", repeat=k):
        marked = "".join(bits)
        u = ev.unitary(compile_oracle(cfg(k, scheme, marked), PARAMS))
        target = np.ones(2 ** k, complex)
        target[int(marked, 2)] = -1
        # matrix restricted to qubit states with the ancilla in |g>
        cols = []
        for x in range(2 ** k):
            e = np.zeros(2 ** k)
            e[x] = 1
            vec = np.zeros(dim, complex)
            for y in range(2 ** k):
                idx = int("".join(f"{int(b)}" for b in format(y, f"0{k}b")), 4)
                vec[idx * (2 if ancilla else 1)] = e[y]
            cols.append(qubit_amplitudes(u @ vec, k, ancilla))
        sub = np.array(cols).T
        phase = sub[0, 0] / target[0] if abs(sub[0, 0]) > 0.5 else sub[1, 1] / target[1]
        assert np.allclose(sub, phase * np.diag(target), atol=1e-12)


# -- Rydberg block -----------------------------------------------------------

def test_direct_block_timing():
    segs = compile_rydberg_block(cfg(2), PARAMS)
    lasers = [s for s in segs if s.drive.laser_on]
    assert [(s.label, s.atom) for s in lasers] == [
        (RYDBERG_UP, 0), (RYDBERG_UP, 1), (RYDBERG_DOWN, 1), (RYDBERG_DOWN, 0)]
    assert all(s.duration == pytest.approx(1e-6, rel=1e-12) for s in lasers)
    assert all(s.drive.laser_phase == (0.0, 0.0) for s in lasers)
    assert [s.label for s in segs].count(IDLE) == 3


def test_ancilla_block_timing():
    segs = compile_rydberg_block(cfg(2, "ancilla"), PARAMS)
    drives = [s for s in segs if s.label != IDLE]
    assert [s.label for s in drives] == [RYDBERG_UP, ANCILLA_2PI, RYDBERG_DOWN]
    assert [s.duration / 1e-6 for s in drives] == pytest.approx([1, 2, 1], rel=1e-12)
    assert drives[0].drive.laser_phase == (0.0, 0.0)
    assert drives[2].drive.laser_phase == (np.pi, np.pi)


@pytest.mark.parametrize("k", [2, 3])
def test_block_net_phases(k):
    direct = IdealEvolution(k, False).unitary(compile_rydberg_block(cfg(k), PARAMS))
    anc = IdealEvolution(k, True).unitary(compile_rydberg_block(cfg(k, "ancilla"), PARAMS))
    for x in range(2 ** k):
        idx = int(format(x, f"0{k}b"), 4)
        d = direct[idx, idx]
        a = anc[2 * idx, 2 * idx]
        assert d == pytest.approx(1 if x == 0 else -1, abs=1e-12)
        assert a == pytest.approx(-1 if x == 0 else 1, abs=1e-12)
        # states stay put
        assert abs(d) == pytest.approx(1, abs=1e-12) and abs(a) == pytest.approx(1, abs=1e-12)


# -- Grover step -------------------------------------------------------------

@pytest.mark.parametrize("k, scheme", [(2, "direct"), (2, "ancilla"), (3, "direct")])
def test_ideal_grover_is_inversion_about_mean(k, scheme):
    ancilla = scheme == "ancilla"
    u = IdealEvolution(k, ancilla).unitary(compile_grover(cfg(k, scheme), PARAMS))
    n = 2 ** k
    s = np.ones(n) / np.sqrt(n)
    target = 2 * np.outer(s, s) - np.eye(n)
    rows = [int(format(x, f"0{k}b"), 4) * (2 if ancilla else 1) for x in range(n)]
    sub = u[np.ix_(rows, rows)]
    phase = np.vdot(target.ravel(), sub.ravel()) / n
    assert abs(phase) == pytest.approx(1, abs=1e-12)
    assert np.allclose(sub, phase * target, atol=1e-12)
    # |s> fixed up to phase
    assert fidelity_up_to_phase(sub @ s, s) == pytest.approx(1, abs=1e-12)


def test_two_qubit_grover_finds_01():
    c = cfg(2, marked="01")
    segs = compile_preparation(c, PARAMS) + compile_oracle(c, PARAMS) + compile_grover(c, PARAMS)
    psi = IdealEvolution(2, False).apply(segs, initial_state(c))
    amps = qubit_amplitudes(psi, 2, False)
    assert abs(amps[0b01]) == pytest.approx(1, abs=1e-12)


# -- full algorithm ------------------------------------------------------------

def test_algorithm_microwave_time():
    sched = compile_algorithm(cfg(2), PARAMS, 1)
    mw = sched.duration_of(lambda s: s.drive.microwave_on)
    assert mw == pytest.approx(87.5e-6, rel=1e-12)
    laser = sched.duration_of(lambda s: s.drive.laser_on)
    assert laser == pytest.approx(8e-6, rel=1e-12)
    assert sched.total_duration > mw + laser


def test_algorithm_needs_iterations():
    with pytest.raises(ValueError):
        compile_algorithm(cfg(2), PARAMS, 0)


@pytest.mark.parametrize("m", [1, 2, 5])
def test_marker_count(m):
    sched = compile_algorithm(cfg(2), PARAMS, m)
    assert len(sched.markers) == m
    assert [sched.segments[i].iteration for i in sched.markers] == list(range(1, m + 1))
    assert sched.segments[0].label == PREP
    assert sched.segments[-1].label == MEASURE


@pytest.mark.parametrize("k", [2, 3, 4])
@pytest.mark.parametrize("scheme", ["direct", "ancilla"])
def test_ideal_algorithm_reproduces_grover(k, scheme):
    ancilla = scheme == "ancilla"
    marked = ("10" * k)[:k]
    c = cfg(k, scheme, marked)
    sched = compile_algorithm(c, PARAMS, 5)
    ev = IdealEvolution(k, ancilla)
    psi = initial_state(c)
    m = 0
    for seg in sched.segments:
        if seg.label == MEASURE:
            m += 1
            amp = qubit_amplitudes(psi, k, ancilla)[int(marked, 2)]
            assert abs(amp) == pytest.approx(abs(grover_target(k, m)), abs=1e-9)
        else:
            psi = ev.apply([seg], psi)
    assert m == 5


@pytest.mark.parametrize("k", [2, 3])
def test_schemes_agree_in_ideal_limit(k):
    for bits in itertools.product("01", repeat=k):
        marked = "".join(bits)
        out = []
        for scheme in ("direct", "ancilla"):
            c = cfg(k, scheme, marked)
            psi = IdealEvolution(k, scheme == "ancilla").apply(compile_algorithm(c, PARAMS, 2).segments,
                                                              initial_state(c))
            out.append(qubit_amplitudes(psi, k, scheme == "ancilla"))
        assert fidelity_up_to_phase(*out) == pytest.approx(1, abs=1e-9)


@pytest.mark.parametrize("k, m", [(2, 1), (3, 2)])
def test_finite_detuning_matches_two_level_oracle(k, m):
    # strong blockade isolates the microwave detuning error
    for marked in ("1" * k, "0" * k, ("01" * k)[:k]):
        exp = ExperimentConfig(k=k, preset="a1", marked=marked, iterations=m, rates_per_s={},
                               v_aa_over_w=1e4).build()
        sim = success_probability(run_trajectory(exp.schedule, exp.context, 0).snapshots[m - 1], exp.register)
        ev = FiniteDetuningEvolution(k, False)
        psi = initial_state(exp.register)
        count = 0
        for seg in exp.schedule.segments:
            if seg.label == MEASURE:
                count += 1
                if count == m:
                    break
                continue
            psi = ev.apply([seg], psi)
        expected = abs(qubit_amplitudes(psi, k, False)[int(marked, 2)]) ** 2
        assert sim == pytest.approx(expected, abs=1e-4), marked


@pytest.mark.parametrize("scheme", ["direct", "ancilla"])
def test_pulse_area_invariant(scheme):
    sched = compile_algorithm(cfg(3, scheme, "101"), PARAMS, 2)
    for seg in sched.segments:
        if seg.area is not None:
            d = seg.drive
            amp = d.mw_amp if d.microwave_on else max(max(d.laser_amp), d.ancilla_laser_amp)
            assert seg.duration * amp == pytest.approx(seg.area, rel=1e-14)


def test_lint_rejects_overlapping_drives():
    c = cfg(2)
    bad = DriveSettings(mw_amp=1.0, mw_detuning=(0, 0), laser_amp=(1.0, 0), laser_phase=(0, 0))
    with pytest.raises(ValueError, match="overlaps"):
        lint_schedule(Schedule((PulseSegment(1.0, bad, "x"),), 1, c))
    with pytest.raises(ValueError, match="missing ancilla"):
        lint_schedule(Schedule((PulseSegment(1.0, DriveSettings(ancilla_laser_amp=1.0), "x"),), 1, c))
    short = DriveSettings(mw_amp=2.0, mw_detuning=(0, 0))
    with pytest.raises(ValueError, match="area"):
        lint_schedule(Schedule((PulseSegment(1.0, short, "x", area=np.pi),), 1, c))


def test_segment_duration_rules():
    with pytest.raises(ValueError):
        PulseSegment(0.0, DriveSettings.off(1), IDLE)
    with pytest.raises(ValueError):
        PulseSegment(1.0, DriveSettings.off(1), MEASURE)


def test_dump_schedule_table():
    sched = compile_algorithm(cfg(2, "ancilla"), PARAMS, 1)
    lines = dump_schedule(sched).splitlines()
    assert lines[0].split("\t")[:3] == ["start_time_s", "duration_s", "label"]
    assert len(lines) == len(sched.segments) + 1
    assert all(len(line.split("\t")) == len(lines[0].split("\t")) for line in lines)
    assert "rydberg_up" in lines[0] or any("rydberg_up" in line for line in lines)


def test_x_pulse_simulation_matches_closed_form():
    # resonant pi pulse accumulated over substeps vs exact exponential
    c = cfg(1)
    ctx = ModelContext(c, RelaxationRates(), InteractionSpec.uniform(c, 0.0))
    x = compile_oracle(cfg(1, marked="1"), PARAMS)[0]
    h = ctx.hamiltonian(x.drive)
    exact = expm(-1j * h * x.duration) @ initial_state(c)
    state = TrajectoryState(initial_state(c))
    evolve_segment(state, x, ctx, np.random.default_rng(0))
    assert np.allclose(state.psi, exact, atol=1e-9)
    assert np.allclose(state.psi[:2], ideal_gate(0, np.pi) @ KETS[0], atol=1e-9)
