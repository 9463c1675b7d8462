"""Tensor-product basis for k four-level register atoms plus an optional ancilla.

Register atoms carry levels ``Q0, Q1, RYD, LOST``; the ancilla carries ``G, R``.
Atom 0 is the most significant tensor factor and the ancilla, when present,
is the least significant one, so a basis index reads

    index = mu_0 * 4**(k-1) + ... + mu_{k-1}          (no ancilla)
    index = (mu_0 * 4**(k-1) + ... + mu_{k-1}) * 2 + a (with ancilla)
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import reduce

import numpy as np

Q0, Q1, RYD, LOST = 0, 1, 2, 3
G, R = 0, 1

REGISTER_LEVELS = 4
ANCILLA_LEVELS = 2
LEVEL_NAMES = ("q0", "q1", "ryd", "lost")
ANCILLA_LEVEL_NAMES = ("g", "R")

MAX_ATOMS = 6


class Scheme(str, enum.Enum):
    """Blockade configuration: pairwise register blockade or ancilla-mediated."""

    DIRECT = "direct"
    ANCILLA = "ancilla"


@dataclass(frozen=True)
class RegisterConfig:
    k: int
    scheme: Scheme = Scheme.DIRECT
    marked: str = ""

    def __post_init__(self):
        if not isinstance(self.k, (int, np.integer)) or not 1 <= self.k <= MAX_ATOMS:
            raise ValueError(f"k must be an integer in [1, {MAX_ATOMS}], got {self.k!r}")
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        marked = self.marked or "0" * self.k
        if len(marked) != self.k or set(marked) - {"0", "1"}:
            raise ValueError(f"marked must be {self.k} binary digits, got {self.marked!r}")
        object.__setattr__(self, "marked", marked)

    @property
    def has_ancilla(self) -> bool:
        return self.scheme is Scheme.ANCILLA

    @property
    def n_factors(self) -> int:
        return self.k + int(self.has_ancilla)

    @property
    def dims(self) -> tuple[int, ...]:
        return (REGISTER_LEVELS,) * self.k + ((ANCILLA_LEVELS,) if self.has_ancilla else ())

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def ancilla(self) -> int:
        """Factor index of the ancilla (equal to ``k``)."""
        if not self.has_ancilla:
            raise ValueError("configuration has no ancilla")
        return self.k

    @property
    def marked_bits(self) -> tuple[int, ...]:
        return tuple(int(c) for c in self.marked)


def initial_state(config: RegisterConfig) -> np.ndarray:
    """All register atoms in |0>, ancilla in |g>."""
    psi = np.zeros(config.dim, dtype=complex)
    psi[0] = 1.0
    return psi


def basis_index(levels, ancilla: int | None = None) -> int:
    """Index of the product state ``|levels[0] ... levels[k-1]> (x) |ancilla>``."""
    index = 0
    for mu in levels:
        if not 0 <= mu < REGISTER_LEVELS:
            raise ValueError(f"register level {mu} out of range")
        index = index * REGISTER_LEVELS + int(mu)
    if ancilla is not None:
        if not 0 <= ancilla < ANCILLA_LEVELS:
            raise ValueError(f"ancilla level {ancilla} out of range")
        index = index * ANCILLA_LEVELS + int(ancilla)
    return index


def basis_levels(index: int, config: RegisterConfig) -> tuple[tuple[int, ...], int | None]:
    """Inverse of :func:`basis_index` for the given configuration."""
    if not 0 <= index < config.dim:
        raise ValueError(f"index {index} out of range for dim {config.dim}")
    ancilla = None
    if config.has_ancilla:
        index, ancilla = divmod(index, ANCILLA_LEVELS)
    levels = []
    for _ in range(config.k):
        index, mu = divmod(index, REGISTER_LEVELS)
        levels.append(mu)
    return tuple(reversed(levels)), ancilla


def sigma(mu: int, nu: int, n_levels: int = REGISTER_LEVELS) -> np.ndarray:
    """Single-atom transition operator |mu><nu|."""
    op = np.zeros((n_levels, n_levels), dtype=complex)
    op[mu, nu] = 1.0
    return op


def embed_single(op, atom: int, config: RegisterConfig) -> np.ndarray:
    """Lift a single-atom operator on factor ``atom`` to the full space.

    ``atom == config.k`` addresses the ancilla.
    """
    op = np.asarray(op, dtype=complex)
    if not 0 <= atom < config.n_factors:
        raise ValueError(f"atom index {atom} out of range for {config.n_factors} factors")
    d = config.dims[atom]
    if op.shape != (d, d):
        raise ValueError(f"operator shape {op.shape} does not match factor dimension {d}")
    left = int(np.prod(config.dims[:atom], dtype=int))
    right = int(np.prod(config.dims[atom + 1:], dtype=int))
    return np.kron(np.kron(np.eye(left), op), np.eye(right))


def embed_diagonal(diag, atom: int, config: RegisterConfig) -> np.ndarray:
    """Diagonal of ``embed_single(np.diag(diag), atom, config)`` without building the matrix."""
    diag = np.asarray(diag)
    shape = [1] * config.n_factors
    shape[atom] = config.dims[atom]
    return np.broadcast_to(diag.reshape(shape), config.dims).reshape(-1)


def kron_all(ops) -> np.ndarray:
    return reduce(np.kron, ops)
