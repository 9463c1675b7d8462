"""Dense Lindblad master-equation integrator (oracle for the trajectory engine).

Each constant segment is integrated with fixed-step RK4 in the interaction
picture of the segment Hamiltonian (Lawson's integrating-factor RK4): the
coherent part is the exact conjugation ``U rho U^dag`` with
``U = exp(-i H dt)``, and only the dissipator goes through the Runge-Kutta
stages. Dissipator increments are traceless, so the trace is preserved to
rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from scipy.linalg import expm

from .hilbert import initial_state
from .mcwf import DEFAULT_SETTINGS, IntegrationError, IntegratorSettings, fastest_scale, substep
from .model import ModelContext
from .schedule import MEASURE, Schedule

TRACE_TOL = 1e-9
HERMITIAN_TOL = 1e-10
POSITIVITY_TOL = 1e-9


def lindblad_rhs(rho: np.ndarray, h: np.ndarray, jumps) -> np.ndarray:
    """``-i[H, rho] + sum_m (L rho L^dag - 1/2 {L^dag L, rho})`` with dense operators."""
    out = -1j * (h @ rho - rho @ h)
    for op in jumps:
        if isinstance(op, tuple):
            op = op[0]
        ldag = op.conj().T
        ldl = ldag @ op
        out += op @ rho @ ldag - 0.5 * (ldl @ rho + rho @ ldl)
    return out


@dataclass
class MEResult:
    final: np.ndarray
    snapshots: list
    trace: list = field(default_factory=list)


def pure_density(psi: np.ndarray) -> np.ndarray:
    return np.outer(psi, psi.conj())


def check_density(rho: np.ndarray, time: float, positivity: bool = True):
    if abs(np.trace(rho).real - 1) > TRACE_TOL:
        raise IntegrationError(f"trace drifted to {np.trace(rho).real:.12f}", time)
    if np.abs(rho - rho.conj().T).max() > HERMITIAN_TOL:
        raise IntegrationError("density matrix lost Hermiticity", time)
    if positivity:
        lowest = np.linalg.eigvalsh(rho)[0]
        if lowest < -POSITIVITY_TOL:
            raise IntegrationError(f"negative eigenvalue {lowest:.3e}", time)


class _SegmentStepper:
    def __init__(self, context: ModelContext, drive, dt: float):
        h = context.hamiltonian(drive)
        self.u_full = expm(-1j * dt * h)
        self.u_half = expm(-0.5j * dt * h)
        dim = h.shape[0]
        decay = context.decay_diag
        # elementwise part: -1/2 {sum L^dag L, rho} plus diagonal (dephasing) jumps
        elementwise = -0.5 * (decay[:, None] + decay[None, :]).astype(complex)
        dst, src, coef = [], [], []
        for op in context.monomial_jumps:
            if np.array_equal(op.rows, op.cols):
                diag = np.zeros(dim, dtype=complex)
                diag[op.rows] = op.vals
                elementwise += np.outer(diag, diag.conj())
            else:
                # L rho L^dag as a flat gather/scatter: rho[c_a, c_b] -> out[r_a, r_b]
                dst.append((op.rows[:, None] * dim + op.rows[None, :]).ravel())
                src.append((op.cols[:, None] * dim + op.cols[None, :]).ravel())
                coef.append(np.outer(op.vals, op.vals.conj()).ravel())
        self.elementwise = elementwise if np.any(elementwise) else None
        self.dst = np.concatenate(dst) if dst else None
        self.src = np.concatenate(src) if src else None
        self.coef = np.concatenate(coef) if coef else None
        self.dissipative = self.elementwise is not None or self.dst is not None
        self.dim = dim
        self.dt = dt

    def rotate(self, u, rho):
        return u @ rho @ u.conj().T

    def dissipator(self, rho):
        out = self.elementwise * rho if self.elementwise is not None else np.zeros_like(rho)
        if self.dst is not None:
            moved = self.coef * rho.ravel()[self.src]
            size = self.dim * self.dim
            fed = np.bincount(self.dst, moved.real, size) + 1j * np.bincount(self.dst, moved.imag, size)
            out += fed.reshape(self.dim, self.dim)
        return out

    def step(self, rho):
        h = self.dt
        if not self.dissipative:
            return self.rotate(self.u_full, rho)
        half_rho = self.rotate(self.u_half, rho)
        k1 = self.dissipator(rho)
        k2 = self.dissipator(half_rho + 0.5 * h * self.rotate(self.u_half, k1))
        k3 = self.dissipator(half_rho + 0.5 * h * k2)
        k4 = self.dissipator(self.rotate(self.u_half, half_rho + h * k3))
        out = self.rotate(self.u_half, half_rho + h / 6 * self.rotate(self.u_half, k1) + h / 3 * (k2 + k3)) + h / 6 * k4
        return 0.5 * (out + out.conj().T)


def evolve_me(rho0: np.ndarray | None, schedule: Schedule, context: ModelContext,
              settings: IntegratorSettings = DEFAULT_SETTINGS, trace_points: int = 0,
              check: bool = True) -> MEResult:
    """Integrate the master equation over ``schedule``.

    Substeps use half the trajectory engine's ``dt_fraction``. Trace and
    Hermiticity are checked after every segment, positivity at markers.
    """
    if rho0 is None:
        rho0 = pure_density(initial_state(context.config))
    rho = np.array(rho0, dtype=complex)
    steppers = {}
    decay_scale = 2 * np.pi * float(np.max(context.decay_diag, initial=0.0))
    snapshots = []
    trace = [(0.0, rho.copy())] if trace_points else []
    t = 0.0
    for seg in schedule.segments:
        if seg.label == MEASURE:
            if check:
                check_density(rho, t)
            snapshots.append(rho.copy())
            continue
        # the dissipator is the only part left to RK4, so its fastest rate also bounds dt
        scale = max(fastest_scale(seg.drive, context, active_only=True), decay_scale)
        n, dt = substep(seg.duration, scale, settings, fraction=settings.dt_fraction / 2)
        key = (seg.drive, dt)
        stepper = steppers.get(key)
        if stepper is None:
            stepper = steppers[key] = _SegmentStepper(context, seg.drive, dt)
        marks = {max(1, round(n * s / trace_points)) for s in range(1, trace_points + 1)} if trace_points else set()
        for i in range(1, n + 1):
            rho = stepper.step(rho)
            if i in marks:
                trace.append((t + i * dt, rho.copy()))
        t += seg.duration
        if check:
            check_density(rho, t, positivity=False)
    return MEResult(rho, snapshots, trace)
