"""Circuit-level cell models: SP4T load bank, hybrid sense/reflect split,
and the shorting-pin loaded disc patch."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
from scipy.optimize import bisect

from .errors import HRISError, InvalidInput


class DegenerateLoad(HRISError):
    pass


class NoResonanceInBracket(HRISError):
    pass


class SwitchState(IntEnum):
    S0 = 0
    S1 = 1
    S2 = 2
    S3 = 3


class _Open:
    """Open-circuit load; kept symbolic so the reflection is exactly 1."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "OPEN"


OPEN = _Open()


def load_reflection(z_load, z0: float = 50.0) -> complex:
    if z_load is OPEN:
        return 1 + 0j
    z_load = complex(z_load)
    if z_load == -z0:
        raise DegenerateLoad(f"load {z_load} equals -z0")
    return (z_load - z0) / (z_load + z0)


def default_loads(z0: float = 50.0) -> dict:
    # 0/90/180/270 degree constellation
    return {SwitchState.S0: OPEN, SwitchState.S1: 1j * z0, SwitchState.S2: 0j, SwitchState.S3: -1j * z0}


@dataclass(frozen=True)
class LoadBank:
    loads: dict = field(default_factory=default_loads)
    z0: float = 50.0
    insertion_loss: float = 1.0

    def __post_init__(self):
        loads = {SwitchState(k) if not isinstance(k, str) else SwitchState[k]: v for k, v in self.loads.items()}
        if set(loads) != set(SwitchState):
            raise InvalidInput("load bank needs exactly the four states S0..S3")
        if not 0 < self.insertion_loss <= 1:
            raise InvalidInput("insertion_loss must lie in (0, 1]")
        if not self.z0 > 0:
            raise InvalidInput("reference impedance must be positive")
        object.__setattr__(self, "loads", loads)

    @classmethod
    def default(cls, z0: float = 50.0, insertion_loss: float = 1.0) -> "LoadBank":
        return cls(default_loads(z0), z0, insertion_loss)

    def reflections(self) -> np.ndarray:
        """Reflection coefficient of every state, indexed by state value."""
        return np.array([state_reflection(s, self) for s in SwitchState])

    def phases(self) -> np.ndarray:
        """State reflection phases in [0, 2*pi)."""
        return np.mod(np.angle(self.reflections()), 2 * np.pi)

    def to_dict(self) -> dict:
        def enc(z):
            return "open" if z is OPEN else [complex(z).real, complex(z).imag]

        return {"z0_ohm": self.z0, "insertion_loss": self.insertion_loss,
                "loads": {s.name: enc(self.loads[s]) for s in SwitchState}}

    @classmethod
    def from_dict(cls, data: dict) -> "LoadBank":
        def dec(v):
            if isinstance(v, str):
                if v.lower() != "open":
                    raise InvalidInput(f"unknown load {v!r}")
                return OPEN
            return complex(float(v[0]), float(v[1]))

        return cls({SwitchState[k]: dec(v) for k, v in data["loads"].items()},
                   float(data.get("z0_ohm", 50.0)), float(data.get("insertion_loss", 1.0)))

    @classmethod
    def from_json(cls, text: str) -> "LoadBank":
        return cls.from_dict(json.loads(text))


def state_reflection(state: SwitchState, bank: LoadBank) -> complex:
    return bank.insertion_loss * load_reflection(bank.loads[SwitchState(state)], bank.z0)


@dataclass(frozen=True)
class HybridCellModel:
    """``rho`` is the fraction of incident power routed to the sensing disc."""

    rho: float = 0.5
    load_bank: LoadBank = field(default_factory=LoadBank.default)

    def __post_init__(self):
        if not 0 <= self.rho <= 1:
            raise InvalidInput("rho must lie in [0, 1]")


def hybrid_response(model: HybridCellModel, state: SwitchState) -> tuple[complex, complex]:
    """Return ``(reflect_coeff, sense_coeff)`` for one switch state."""
    sense = math.sqrt(model.rho)
    reflect = math.sqrt(1 - model.rho) * state_reflection(state, model.load_bank)
    return reflect, complex(sense)


@dataclass(frozen=True)
class ShortedPatchModel:
    """Disc patch as a parallel GLC resonator loaded by a shorting-pin inductance.

    The pin inductance grows linearly with the pin-feed distance. Set
    ``pin_inductance_per_meter`` to ``math.inf`` to model a patch without a pin.
    Defaults put the unloaded resonance at 5.5 GHz; they are fixture values.
    """

    patch_capacitance: float = 1.0e-12
    patch_inductance: float = 1.0 / ((2 * math.pi * 5.5e9) ** 2 * 1.0e-12)
    patch_conductance: float = 1.0 / 50.0
    pin_inductance_per_meter: float = 5.0e-6
    pin_feed_distance: float = 0.5e-3
    disc_radius: float = 1.9e-3

    def __post_init__(self):
        vals = (self.patch_capacitance, self.patch_inductance, self.patch_conductance,
                self.pin_inductance_per_meter, self.pin_feed_distance, self.disc_radius)
        if not all(v > 0 for v in vals):
            raise InvalidInput("all shorted-patch parameters must be positive")
        if self.pin_feed_distance >= self.disc_radius:
            raise InvalidInput("pin-feed distance must be less than the disc radius")

    @property
    def pin_inductance(self) -> float:
        return self.pin_inductance_per_meter * self.pin_feed_distance

    def admittance(self, f):
        w = 2 * np.pi * np.asarray(f, dtype=float)
        y = self.patch_conductance + 1j * (w * self.patch_capacitance - 1 / (w * self.patch_inductance))
        if math.isfinite(self.pin_inductance):
            y = y + 1 / (1j * w * self.pin_inductance)
        return y


def shorted_patch_input(model: ShortedPatchModel, f):
    """Input impedance 1/Y(f) of the pin-loaded patch."""
    if np.any(np.asarray(f) <= 0):
        raise InvalidInput("frequency must be positive")
    return 1 / model.admittance(f)


def resonance(model: ShortedPatchModel, bracket: tuple[float, float] = (1e9, 20e9)) -> float:
    """Frequency where Im(Y) = 0, located by bisection inside ``bracket``."""
    lo, hi = bracket
    if not 0 < lo < hi:
        raise InvalidInput("bracket must satisfy 0 < lo < hi")

    def susceptance(f):
        return float(model.admittance(f).imag)

    if susceptance(lo) * susceptance(hi) > 0:
        raise NoResonanceInBracket(f"Im(Y) does not change sign on [{lo:g}, {hi:g}] Hz")
    return bisect(susceptance, lo, hi, xtol=1e-6, rtol=4 * np.finfo(float).eps, maxiter=400)
