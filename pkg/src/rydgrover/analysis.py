"""Measurement semantics, ensemble estimators and majority voting."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .hilbert import LOST, Q0, Q1, REGISTER_LEVELS, RYD, RegisterConfig


@dataclass(frozen=True)
class MeasurementPolicy:
    """Which register levels read out as "not |0>".

    Atoms in |1> and lost atoms always count; Rydberg atoms only on request.
    """

    count_rydberg: bool = False

    @property
    def nonzero_levels(self) -> frozenset:
        levels = {Q1, LOST}
        if self.count_rydberg:
            levels.add(RYD)
        return frozenset(levels)


DEFAULT_POLICY = MeasurementPolicy()


@dataclass
class EnsembleStats:
    iteration: int
    success_prob: float
    std_err: float
    n_traj: int
    histogram: dict = field(default_factory=dict)


def register_probabilities(state: np.ndarray, config: RegisterConfig) -> np.ndarray:
    """Joint level probabilities of the register, shape ``(4,) * k``, ancilla traced out.

    Accepts a state vector or a density matrix.
    """
    state = np.asarray(state)
    probs = np.abs(state) ** 2 if state.ndim == 1 else np.real(np.diag(state))
    probs = probs.reshape(config.dims)
    if config.has_ancilla:
        probs = probs.sum(axis=-1)
    return probs


def _level_mask(policy: MeasurementPolicy) -> np.ndarray:
    """Rows: readout digit 0/1; columns: atomic level."""
    mask = np.zeros((2, REGISTER_LEVELS))
    mask[0, Q0] = 1.0
    for mu in policy.nonzero_levels:
        mask[1, mu] = 1.0
    return mask


def outcome_distribution(state, config: RegisterConfig, policy: MeasurementPolicy = DEFAULT_POLICY) -> dict:
    """Probability of every readout bitstring (missing mass belongs to unread Rydberg atoms)."""
    probs = register_probabilities(state, config)
    mask = _level_mask(policy)
    for _ in range(config.k):
        # contract the leading atom axis, append its digit axis at the end
        probs = np.tensordot(probs, mask, axes=([0], [1]))
    out = {}
    for idx in np.ndindex(*(2,) * config.k):
        out["".join(map(str, idx))] = float(probs[idx])
    return out


def success_probability(state, config: RegisterConfig, marked: str | None = None,
                        policy: MeasurementPolicy = DEFAULT_POLICY) -> float:
    marked = config.marked if marked is None else marked
    if len(marked) != config.k or set(marked) - {"0", "1"}:
        raise ValueError(f"marked string {marked!r} does not match k={config.k}")
    probs = register_probabilities(state, config)
    mask = _level_mask(policy)
    for b in marked:
        probs = mask[int(b)] @ probs.reshape(REGISTER_LEVELS, -1)
    return float(probs.sum())


def level_populations(state, config: RegisterConfig) -> np.ndarray:
    """Per-factor level populations, shape ``(n_factors, levels)``; ancilla padded with zeros."""
    state = np.asarray(state)
    probs = np.abs(state) ** 2 if state.ndim == 1 else np.real(np.diag(state))
    probs = probs.reshape(config.dims)
    out = np.zeros((config.n_factors, REGISTER_LEVELS))
    axes = tuple(range(config.n_factors))
    for j in axes:
        marginal = probs.sum(axis=tuple(a for a in axes if a != j))
        out[j, :len(marginal)] = marginal
    return out


def population_trace(samples, config: RegisterConfig, atom: int, level: int):
    """Time series ``(times, <sigma_mu mu^(atom)>)`` from ``(time, state)`` samples."""
    times = np.array([t for t, _ in samples])
    values = np.array([level_populations(s, config)[atom, level] for _, s in samples])
    return times, values


def sample_outcome(state, config: RegisterConfig, rng: np.random.Generator,
                   policy: MeasurementPolicy = DEFAULT_POLICY) -> str:
    """One projective readout; unread Rydberg atoms show as ``r``."""
    probs = register_probabilities(state, config).reshape(-1)
    idx = int(rng.choice(probs.size, p=probs / probs.sum()))
    levels = np.unravel_index(idx, (REGISTER_LEVELS,) * config.k)
    digits = []
    for mu in levels:
        if mu == Q0:
            digits.append("0")
        elif mu in policy.nonzero_levels:
            digits.append("1")
        else:
            digits.append("r")
    return "".join(digits)


def aggregate(states, config: RegisterConfig, marked: str | None = None,
              policy: MeasurementPolicy = DEFAULT_POLICY, mode: str = "expectation",
              rngs=None, iteration: int = 0) -> EnsembleStats:
    """Success-probability estimate over one state per trajectory.

    ``expectation``: mean of per-trajectory probabilities, SE = sample std / sqrt(n).
    ``sampling``: one readout per trajectory (``rngs`` supplies one generator
    per state), binomial SE.
    """
    states = list(states)
    if not states:
        raise ValueError("cannot aggregate an empty ensemble")
    marked = config.marked if marked is None else marked
    n = len(states)
    if mode == "expectation":
        p = np.array([success_probability(s, config, marked, policy) for s in states])
        p_hat = float(p.mean())
        se = float(p.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        hist = Counter()
        for s in states:
            hist.update(outcome_distribution(s, config, policy))
        unread = n - sum(hist.values())
        histogram = dict(sorted(hist.items()))
        if unread > 1e-12:
            histogram["unread"] = unread
    elif mode == "sampling":
        if rngs is None or len(rngs) != n:
            raise ValueError("sampling mode needs one generator per trajectory")
        outcomes = [sample_outcome(s, config, g, policy) for s, g in zip(states, rngs)]
        hits = sum(o == marked for o in outcomes)
        p_hat = hits / n
        se = float(np.sqrt(p_hat * (1 - p_hat) / n))
        histogram = dict(sorted(Counter(outcomes).items()))
    else:
        raise ValueError(f"unknown estimator mode {mode!r}")
    return EnsembleStats(iteration, min(max(p_hat, 0.0), 1.0), se, n, histogram)


def majority_vote(samples) -> tuple[str, bool]:
    """Most frequent bitstring and whether it tied (ties go to the lexicographically first)."""
    counts = Counter(samples)
    if not counts:
        raise ValueError("no samples to vote on")
    top = max(counts.values())
    leaders = sorted(s for s, c in counts.items() if c == top)
    return leaders[0], len(leaders) > 1
