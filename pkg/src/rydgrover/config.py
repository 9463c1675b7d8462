"""Experiment configuration, parameter presets and unit conversion.

Keys carry their units; everything is converted to rad/s, 1/s and seconds
once, in :meth:`ExperimentConfig.build`.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .hilbert import RegisterConfig, Scheme
from .model import InteractionSpec, ModelContext, RelaxationRates, reference_linewidth
from .schedule import PulseParams, Schedule, compile_algorithm

TWO_PI = 2 * np.pi

# Rydberg decay / dephasing per letter, laser Rabi frequency per digit.
_RYDBERG = {"a": (1e3, 1e3), "b": (4.76e3, 10e3), "c": (100e3, 100e3)}
_LASER_MHZ = {"1": 0.5, "2": 2.0}

COMMON = {
    "omega_mw_khz_over_2pi": 20.0,
    "delta_mw_over_omega_mw": 25.0,
    "gap_ns": 50.0,
    "v_aa_over_w": 50.0,
}


def _preset(letter, digit):
    gamma_r, deph_r = _RYDBERG[letter]
    rates = RelaxationRates.from_rydberg_total(gamma_r, deph_r, gamma0=2.0, gamma1=2.0, deph_z=100.0)
    return {**COMMON, "omega_l_mhz_over_2pi": _LASER_MHZ[digit], "rates_per_s": rates.as_dict()}


PRESETS = {f"{a}{d}": _preset(a, d) for a in "abc" for d in "12"}
PRESETS["ideal"] = {
    "omega_mw_khz_over_2pi": 20.0,
    "delta_mw_over_omega_mw": 1e4,
    "gap_ns": 50.0,
    "v_aa_over_w": 1e3,
    "omega_l_mhz_over_2pi": 0.5,
    "rates_per_s": RelaxationRates().as_dict(),
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    k: int = 2
    scheme: str = "direct"
    marked: str = ""
    preset: str | None = "b1"
    omega_mw_khz_over_2pi: float | None = None
    delta_mw_over_omega_mw: float | None = None
    omega_l_mhz_over_2pi: float | None = None
    rates_per_s: dict | None = None
    ancilla_rates_per_s: dict | None = None
    v_aa_over_w: float | None = None
    v_aa_mhz_over_2pi: float | None = None
    positions_um: list | None = None
    c_p_rad_um_p_per_s: float | None = None
    p: int | None = None
    gap_ns: float | None = None
    iterations: int = 3
    trajectories: int = 200
    seed: int | None = None
    out: str | None = None
    estimator: str = "expectation"
    count_rydberg_as_nonzero: bool = False
    threads: int = 1
    trace_mode: str = "trajectory"
    trace_points: int = 20

    def __post_init__(self):
        if not self.marked:
            self.marked = ("01" * self.k)[:self.k]
        self.validate()

    def validate(self):
        def bad(key, why):
            raise ConfigError(f"config key {key!r}: {why}")

        if not isinstance(self.k, int) or not 1 <= self.k <= 6:
            bad("k", f"expected integer 1..6, got {self.k!r}")
        try:
            Scheme(self.scheme)
        except ValueError:
            bad("scheme", f"expected 'direct' or 'ancilla', got {self.scheme!r}")
        if len(self.marked) != self.k or set(self.marked) - {"0", "1"}:
            bad("marked", f"expected {self.k} binary digits, got {self.marked!r}")
        if self.preset is not None and self.preset not in PRESETS:
            bad("preset", f"unknown preset {self.preset!r}; choose from {sorted(PRESETS)}")
        if not isinstance(self.iterations, int) or self.iterations < 1:
            bad("iterations", "must be a positive integer")
        if not isinstance(self.trajectories, int) or self.trajectories < 1:
            bad("trajectories", "must be a positive integer")
        if self.seed is not None and not isinstance(self.seed, int):
            bad("seed", "must be an integer")
        if self.estimator not in ("expectation", "sampling"):
            bad("estimator", "expected 'expectation' or 'sampling'")
        if self.trace_mode not in ("trajectory", "me"):
            bad("trace_mode", "expected 'trajectory' or 'me'")
        if self.threads < 1:
            bad("threads", "must be >= 1")
        if self.v_aa_over_w is not None and self.v_aa_mhz_over_2pi is not None:
            bad("v_aa_mhz_over_2pi", "give either v_aa_over_w or v_aa_mhz_over_2pi")
        if self.positions_um is not None and (self.c_p_rad_um_p_per_s is None or self.p is None):
            bad("positions_um", "positions need c_p_rad_um_p_per_s and p")
        for key in ("rates_per_s", "ancilla_rates_per_s"):
            value = getattr(self, key)
            if value is not None:
                unknown = set(value) - set(RelaxationRates().as_dict())
                if unknown:
                    bad(key, f"unknown rate names {sorted(unknown)}")

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config document must be a JSON object")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text())

    # -- resolution ----------------------------------------------------
    def value(self, key):
        value = getattr(self, key)
        if value is None and self.preset is not None:
            value = PRESETS[self.preset].get(key)
        return value

    def require(self, key):
        value = self.value(key)
        if value is None:
            raise ConfigError(f"config key {key!r} is required (no preset supplies it)")
        return value

    def build(self) -> "Experiment":
        register = RegisterConfig(self.k, Scheme(self.scheme), self.marked)
        mw_amp = TWO_PI * 1e3 * self.require("omega_mw_khz_over_2pi")
        laser_amp = TWO_PI * 1e6 * self.require("omega_l_mhz_over_2pi")
        params = PulseParams(
            mw_amp=mw_amp,
            mw_detuning=self.require("delta_mw_over_omega_mw") * mw_amp,
            laser_amp=laser_amp,
            gap=1e-9 * self.require("gap_ns"),
        )
        rate_values = {**RelaxationRates().as_dict(), **self.require("rates_per_s")}
        rates = RelaxationRates(**rate_values)
        ancilla_rates = None
        if self.ancilla_rates_per_s is not None:
            ancilla_rates = RelaxationRates(**{**RelaxationRates().as_dict(), **self.ancilla_rates_per_s})

        if self.positions_um is not None:
            c_p = self.c_p_rad_um_p_per_s * (1e-6) ** self.p
            interaction = InteractionSpec.from_positions(register, np.asarray(self.positions_um) * 1e-6, c_p, self.p)
        elif self.v_aa_mhz_over_2pi is not None:
            interaction = InteractionSpec.uniform(register, TWO_PI * 1e6 * self.v_aa_mhz_over_2pi)
        else:
            w = reference_linewidth(laser_amp, rates)
            interaction = InteractionSpec.uniform(register, self.require("v_aa_over_w") * w)
        context = ModelContext(register, rates, interaction, ancilla_rates)
        schedule = compile_algorithm(register, params, self.iterations)
        return Experiment(self, register, params, context, schedule)


@dataclass
class Experiment:
    config: ExperimentConfig
    register: RegisterConfig
    params: PulseParams
    context: ModelContext
    schedule: Schedule
