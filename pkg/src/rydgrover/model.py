"""Hamiltonian and dissipator assembly for the register (and ancilla).

Units: angular frequencies and rates in rad/s or 1/s, hbar = 1.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations

import numpy as np

from .hilbert import (
    ANCILLA_LEVELS,
    G,
    LOST,
    Q0,
    Q1,
    R,
    RYD,
    RegisterConfig,
    Scheme,
    embed_diagonal,
    embed_single,
    sigma,
)

BLOCKADE_FACTOR = 10.0


class BlockadeLinewidthError(ValueError):
    """Raised when the Rydberg excitation linewidth is undefined (zero Rydberg decay)."""


def _check_phase(phi: float, name: str):
    if not -np.pi < phi <= np.pi + 1e-15:
        raise ValueError(f"{name}={phi} outside (-pi, pi]")


@dataclass(frozen=True)
class DriveSettings:
    """Piecewise-constant drive values for one pulse segment.

    The microwave amplitude and phase are global; detunings and laser
    fields are per register atom.
    """

    mw_amp: float = 0.0
    mw_phase: float = 0.0
    mw_detuning: tuple[float, ...] = ()
    laser_amp: tuple[float, ...] = ()
    laser_phase: tuple[float, ...] = ()
    ancilla_laser_amp: float = 0.0
    ancilla_laser_phase: float = 0.0

    def __post_init__(self):
        for name in ("mw_detuning", "laser_amp", "laser_phase"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        if self.mw_amp < 0 or self.ancilla_laser_amp < 0 or any(a < 0 for a in self.laser_amp):
            raise ValueError("drive amplitudes must be non-negative")
        _check_phase(self.mw_phase, "mw_phase")
        _check_phase(self.ancilla_laser_phase, "ancilla_laser_phase")
        for phi in self.laser_phase:
            _check_phase(phi, "laser_phase")

    @classmethod
    def off(cls, k: int) -> "DriveSettings":
        return cls(mw_detuning=(0.0,) * k, laser_amp=(0.0,) * k, laser_phase=(0.0,) * k)

    def detuning(self, j: int) -> float:
        return self.mw_detuning[j] if self.mw_detuning else 0.0

    def laser(self, j: int) -> complex:
        if not self.laser_amp:
            return 0.0
        return self.laser_amp[j] * np.exp(1j * self.laser_phase[j])

    @property
    def microwave_on(self) -> bool:
        return self.mw_amp > 0

    @property
    def laser_on(self) -> bool:
        return any(a > 0 for a in self.laser_amp) or self.ancilla_laser_amp > 0

    @property
    def stark_on(self) -> bool:
        return any(d != 0 for d in self.mw_detuning)


@dataclass(frozen=True)
class RelaxationRates:
    """Decay and dephasing rates of one atom, all in 1/s."""

    gamma0: float = 0.0
    gamma1: float = 0.0
    gamma_r0: float = 0.0
    gamma_r1: float = 0.0
    gamma_ro: float = 0.0
    deph_z: float = 0.0
    deph_r: float = 0.0

    def __post_init__(self):
        for name, value in self.as_dict().items():
            if value < 0:
                raise ValueError(f"rate {name} must be non-negative, got {value}")

    @classmethod
    def from_rydberg_total(cls, gamma_r, deph_r, gamma0=2.0, gamma1=2.0, deph_z=100.0):
        """Split the total Rydberg decay as 1/16 to |0>, 1/16 to |1>, 7/8 lost."""
        return cls(
            gamma0=gamma0,
            gamma1=gamma1,
            gamma_r0=gamma_r / 16,
            gamma_r1=gamma_r / 16,
            gamma_ro=7 * gamma_r / 8,
            deph_z=deph_z,
            deph_r=deph_r,
        )

    @property
    def gamma_r(self) -> float:
        return self.gamma_r0 + self.gamma_r1 + self.gamma_ro

    def as_dict(self) -> dict:
        return {
            "gamma0": self.gamma0,
            "gamma1": self.gamma1,
            "gamma_r0": self.gamma_r0,
            "gamma_r1": self.gamma_r1,
            "gamma_ro": self.gamma_ro,
            "deph_z": self.deph_z,
            "deph_r": self.deph_r,
        }

    def scaled(self, **factors) -> "RelaxationRates":
        values = self.as_dict()
        for name, f in factors.items():
            values[name] *= f
        return RelaxationRates(**values)


@dataclass(frozen=True)
class InteractionSpec:
    """Symmetric matrix of Rydberg-Rydberg shifts over all factors (rad/s).

    For the direct scheme the matrix is k x k; for the ancilla scheme it is
    (k+1) x (k+1) with the ancilla last and register-register entries zero.
    """

    shifts: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        v = np.asarray(self.shifts, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("interaction shifts must be a square matrix")
        if not np.allclose(v, v.T):
            raise ValueError("interaction shifts must be symmetric")
        if (v < 0).any():
            raise ValueError("interaction shifts must be non-negative")
        object.__setattr__(self, "shifts", tuple(tuple(float(x) for x in row) for row in v))

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.shifts)

    @property
    def max_shift(self) -> float:
        v = self.matrix.copy()
        np.fill_diagonal(v, 0.0)
        return float(v.max()) if v.size else 0.0

    @classmethod
    def uniform(cls, config: RegisterConfig, v_aa: float) -> "InteractionSpec":
        n = config.n_factors
        v = np.zeros((n, n))
        if config.has_ancilla:
            v[:config.k, config.k] = v_aa
            v[config.k, :config.k] = v_aa
        else:
            v[:] = v_aa
            np.fill_diagonal(v, 0.0)
        return cls(tuple(map(tuple, v)))

    @classmethod
    def from_positions(cls, config: RegisterConfig, positions, c_p: float, p: int) -> "InteractionSpec":
        """Shifts ``C_p / |r_i - r_j|**p``; positions in metres, ancilla last."""
        if p not in (3, 6):
            raise ValueError("interaction exponent must be 3 or 6")
        pos = np.asarray(positions, dtype=float)
        n = config.n_factors
        if pos.shape != (n, 3):
            raise ValueError(f"expected {n} positions of shape (3,), got {pos.shape}")
        v = np.zeros((n, n))
        for i, j in combinations(range(n), 2):
            if config.has_ancilla and j != config.k:
                continue
            dist = np.linalg.norm(pos[i] - pos[j])
            if dist == 0:
                raise ValueError(f"atoms {i} and {j} share a position")
            v[i, j] = v[j, i] = c_p / dist**p
        return cls(tuple(map(tuple, v)))


def microwave_hamiltonian(drive: DriveSettings, config: RegisterConfig) -> np.ndarray:
    omega = drive.mw_amp * np.exp(1j * drive.mw_phase)
    h = np.zeros((config.dim, config.dim), dtype=complex)
    for j in range(config.k):
        single = -(
            drive.detuning(j) * sigma(Q1, Q1)
            + 0.5 * omega * sigma(Q1, Q0)
            + 0.5 * np.conj(omega) * sigma(Q0, Q1)
        )
        if np.any(single):
            h += embed_single(single, j, config)
    return h


def laser_hamiltonian(drive: DriveSettings, config: RegisterConfig) -> np.ndarray:
    if drive.ancilla_laser_amp > 0 and not config.has_ancilla:
        raise ValueError("ancilla laser drive requested in the direct-blockade scheme")
    h = np.zeros((config.dim, config.dim), dtype=complex)
    for j in range(config.k):
        omega = drive.laser(j)
        if omega != 0:
            single = -0.5 * (omega * sigma(RYD, Q1) + np.conj(omega) * sigma(Q1, RYD))
            h += embed_single(single, j, config)
    if drive.ancilla_laser_amp > 0:
        omega = drive.ancilla_laser_amp * np.exp(1j * drive.ancilla_laser_phase)
        single = -0.5 * (
            omega * sigma(R, G, ANCILLA_LEVELS) + np.conj(omega) * sigma(G, R, ANCILLA_LEVELS)
        )
        h += embed_single(single, config.ancilla, config)
    return h


def interaction_diagonal(spec: InteractionSpec, config: RegisterConfig) -> np.ndarray:
    v = spec.matrix
    n = config.n_factors
    if v.shape != (n, n):
        raise ValueError(f"interaction matrix shape {v.shape} does not match {n} factors")
    if config.has_ancilla and np.any(v[:config.k, :config.k]):
        raise ValueError("ancilla scheme forbids direct register-register shifts")
    projectors = [embed_diagonal(np.eye(4)[RYD], j, config) for j in range(config.k)]
    if config.has_ancilla:
        projectors.append(embed_diagonal(np.eye(ANCILLA_LEVELS)[R], config.ancilla, config))
    diag = np.zeros(config.dim)
    for i, j in combinations(range(n), 2):
        if v[i, j]:
            diag += v[i, j] * projectors[i] * projectors[j]
    return diag


def interaction_hamiltonian(spec: InteractionSpec, config: RegisterConfig) -> np.ndarray:
    return np.diag(interaction_diagonal(spec, config)).astype(complex)


def _per_atom(rates, k):
    if isinstance(rates, RelaxationRates):
        return (rates,) * k
    rates = tuple(rates)
    if len(rates) != k:
        raise ValueError(f"expected {k} rate records, got {len(rates)}")
    return rates


def jump_operators(rates, config: RegisterConfig, ancilla_rates: RelaxationRates | None = None):
    """Embedded Lindblad operators as ``(matrix, label, atom)`` triples.

    Channels with zero rate are omitted. Ancilla channels (R -> g decay at
    ``gamma_r`` and dephasing at ``deph_r``) are experimental.
    """
    ident = np.eye(4)
    jumps = []
    for j, rr in enumerate(_per_atom(rates, config.k)):
        channels = [
            ("gamma0", rr.gamma0, sigma(Q1, Q0)),
            ("gamma1", rr.gamma1, sigma(Q0, Q1)),
            ("gamma_r0", rr.gamma_r0, sigma(Q0, RYD)),
            ("gamma_r1", rr.gamma_r1, sigma(Q1, RYD)),
            ("gamma_ro", rr.gamma_ro, sigma(LOST, RYD)),
            ("deph_z", rr.deph_z / 2, 2 * sigma(Q1, Q1) - ident),
            ("deph_r", rr.deph_r / 2, 2 * sigma(RYD, RYD) - ident),
        ]
        for label, rate, op in channels:
            if rate > 0:
                jumps.append((embed_single(np.sqrt(rate) * op, j, config), label, j))
    if ancilla_rates is not None and config.has_ancilla:
        a = config.ancilla
        channels = [
            ("anc_decay", ancilla_rates.gamma_r, sigma(G, R, ANCILLA_LEVELS)),
            ("anc_deph", ancilla_rates.deph_r / 2, 2 * sigma(R, R, ANCILLA_LEVELS) - np.eye(2)),
        ]
        if any(rate > 0 for _, rate, _ in channels):
            warnings.warn("ancilla relaxation is experimental", stacklevel=2)
        for label, rate, op in channels:
            if rate > 0:
                jumps.append((embed_single(np.sqrt(rate) * op, a, config), label, a))
    return jumps


class MonomialOperator:
    """Operator with at most one nonzero entry per column, stored as index arrays.

    Every register/ancilla jump operator in this model has that form, which
    makes ``L @ psi`` and ``L rho L^dag`` cheap gathers.
    """

    def __init__(self, rows, cols, vals, dim, label="", atom=-1):
        self.rows = np.asarray(rows, dtype=int)
        self.cols = np.asarray(cols, dtype=int)
        self.vals = np.asarray(vals, dtype=complex)
        self.dim = dim
        self.label = label
        self.atom = atom

    @classmethod
    def from_dense(cls, op, label="", atom=-1):
        op = np.asarray(op)
        rows, cols = np.nonzero(op)
        if len(set(cols.tolist())) != len(cols) or len(set(rows.tolist())) != len(rows):
            raise ValueError("operator is not monomial")
        return cls(rows, cols, op[rows, cols], op.shape[0], label, atom)

    def matvec(self, psi):
        out = np.zeros(self.dim, dtype=complex)
        out[self.rows] = self.vals * psi[self.cols]
        return out

    def sandwich(self, rho):
        """``L rho L^dag``."""
        out = np.zeros((self.dim, self.dim), dtype=complex)
        block = rho[np.ix_(self.cols, self.cols)]
        out[np.ix_(self.rows, self.rows)] = self.vals[:, None] * block * self.vals.conj()[None, :]
        return out

    def dagger_product_diag(self):
        """Diagonal of ``L^dag L``."""
        out = np.zeros(self.dim)
        out[self.cols] = np.abs(self.vals) ** 2
        return out

    def to_dense(self):
        out = np.zeros((self.dim, self.dim), dtype=complex)
        out[self.rows, self.cols] = self.vals
        return out


def effective_hamiltonian(h: np.ndarray, jumps) -> np.ndarray:
    """``H - i/2 sum_m L_m^dag L_m``."""
    h_eff = np.array(h, dtype=complex)
    for op, *_ in jumps:
        h_eff -= 0.5j * (op.conj().T @ op)
    return h_eff


def blockade_linewidth(laser_amp: float, rates: RelaxationRates) -> float:
    """Rydberg excitation linewidth ``|Omega_l| sqrt(gamma_r1 / Gamma_r)``."""
    if rates.gamma_r <= 0:
        raise BlockadeLinewidthError("linewidth undefined for zero Rydberg decay")
    gamma_r1 = 0.5 * (rates.gamma1 + rates.gamma_r) + rates.deph_r
    return abs(laser_amp) * np.sqrt(gamma_r1 / rates.gamma_r)


def strong_drive(laser_amp: float, rates: RelaxationRates) -> bool:
    """Whether ``|Omega_l|**2`` exceeds ``Gamma_r * gamma_r1`` (linewidth formula regime)."""
    gamma_r1 = 0.5 * (rates.gamma1 + rates.gamma_r) + rates.deph_r
    return laser_amp**2 > rates.gamma_r * gamma_r1


def reference_linewidth(laser_amp: float, rates: RelaxationRates) -> float:
    """Linewidth used to scale V_aa; falls back to the zero-decay limit
    ``|Omega_l|/sqrt(2)`` when all Rydberg relaxation vanishes."""
    if rates.gamma_r > 0:
        return blockade_linewidth(laser_amp, rates)
    if rates.gamma1 > 0 or rates.deph_r > 0:
        raise BlockadeLinewidthError("linewidth diverges for Gamma_r = 0 with nonzero gamma_r1")
    return abs(laser_amp) / np.sqrt(2.0)


def is_blockaded(v_aa: float, w: float, factor: float = BLOCKADE_FACTOR) -> bool:
    return v_aa >= factor * w * (1 - 1e-12)


@dataclass
class ModelContext:
    """Static model data shared read-only by all trajectories.

    ``rates`` is one :class:`RelaxationRates` or one per register atom.
    """

    config: RegisterConfig
    rates: object
    interaction: InteractionSpec
    ancilla_rates: RelaxationRates | None = None
    _hamiltonians: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.rates = _per_atom(self.rates, self.config.k)
        if self.config.has_ancilla and self.config.scheme is not Scheme.ANCILLA:
            raise ValueError("inconsistent scheme")

    @cached_property
    def jumps(self):
        return jump_operators(self.rates, self.config, self.ancilla_rates)

    @cached_property
    def monomial_jumps(self) -> list[MonomialOperator]:
        return [MonomialOperator.from_dense(op, label, atom) for op, label, atom in self.jumps]

    @cached_property
    def interaction_diag(self) -> np.ndarray:
        return interaction_diagonal(self.interaction, self.config)

    @cached_property
    def decay_diag(self) -> np.ndarray:
        """Diagonal of ``sum_m L_m^dag L_m`` (all channels are diagonal in this basis)."""
        total = np.zeros(self.config.dim)
        for op in self.monomial_jumps:
            total += op.dagger_product_diag()
        return total

    @property
    def max_shift(self) -> float:
        return self.interaction.max_shift

    def hamiltonian(self, drive: DriveSettings) -> np.ndarray:
        h = self._hamiltonians.get(drive)
        if h is None:
            h = microwave_hamiltonian(drive, self.config) + laser_hamiltonian(drive, self.config)
            h[np.diag_indices_from(h)] += self.interaction_diag
            self._hamiltonians[drive] = h
        return h

    def effective_hamiltonian(self, drive: DriveSettings) -> np.ndarray:
        h_eff = self.hamiltonian(drive).copy()
        h_eff[np.diag_indices_from(h_eff)] -= 0.5j * self.decay_diag
        return h_eff
