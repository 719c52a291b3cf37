"""Two-variable quadratic integrate-and-fire neuron (Izhikevich form).

Continuous dynamics
    dv/dt = 0.04 v^2 + 5 v + 140 - u + I
    du/dt = a (b v - u)
with a discrete event: when v crosses 30 mV the neuron spikes and the
state resets to v = c, u = u + d.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .rng import RandomStream

THRESHOLD_MV = 30.0


@dataclass(frozen=True)
class NeuronParams:
    a: Fraction
    b: Fraction
    c: Fraction
    d: Fraction
    threshold: Fraction = Fraction(30)

    @classmethod
    def preset(cls, name: str) -> "NeuronParams":
        try:
            return _PRESETS[name.upper()]
        except KeyError:
            raise ValueError(f"unknown neuron preset {name!r}") from None


def _p(a, b, c, d):
    return NeuronParams(Fraction(a), Fraction(b), Fraction(c), Fraction(d))


# Regular spiking, chattering and fast spiking parameter sets.
_PRESETS = {
    "RS": _p("0.02", "0.2", -65, 8),
    "CH": _p("0.02", "0.2", -50, 2),
    "FS": _p("0.1", "0.2", -65, 2),
}

PRESET_NAMES = tuple(_PRESETS)


@dataclass(frozen=True)
class NeuronState:
    v: float
    u: float


def initial_state(params: NeuronParams) -> NeuronState:
    """Rest initialisation: v0 = c, u0 = b*c."""
    v0 = float(params.c)
    return NeuronState(v=v0, u=float(params.b) * v0)


def derivative(state: NeuronState, i_in: float, params: NeuronParams):
    """(dv/dt, du/dt) in the reference (double) arithmetic."""
    v, u = state.v, state.u
    dv = 0.04 * v * v + 5.0 * v + 140.0 - u + i_in
    du = float(params.a) * (float(params.b) * v - u)
    return dv, du


def apply_reset(state: NeuronState, params: NeuronParams):
    """Threshold/reset event; returns (new_state, spiked)."""
    if state.v >= float(params.threshold):
        return NeuronState(v=float(params.c), u=state.u + float(params.d)), True
    return state, False


@dataclass(frozen=True)
class InputSource:
    """Per-step input current in nA.

    kind: "dc" (constant), "exp" (amplitude * exp(-t/tau)), or
    "dithered" (constant plus fresh zero-mean Gaussian noise each step,
    SD expressed in multiples of the s16.15 LSB).
    """

    kind: str
    amplitude: float
    decay_tau: float = 0.0
    dither_sd_lsb: float = 0.0

    def __post_init__(self):
        if self.kind not in ("dc", "exp", "dithered"):
            raise ValueError(f"unknown input kind {self.kind!r}")
        if self.kind == "exp" and self.decay_tau <= 0:
            raise ValueError("exp input needs decay_tau > 0")
        if self.dither_sd_lsb < 0:
            raise ValueError("dither SD must be non-negative")

    @property
    def dither_sd(self) -> float:
        return self.dither_sd_lsb * 2.0**-15

    def sample(self, t_ms: float, rng: Optional[RandomStream] = None) -> float:
        if self.kind == "dc":
            return self.amplitude
        if self.kind == "exp":
            return self.amplitude * math.exp(-t_ms / self.decay_tau)
        if self.dither_sd_lsb == 0.0:
            return self.amplitude
        if rng is None:
            raise ValueError("dithered input requires a RandomStream")
        return self.amplitude + self.dither_sd * gaussian_draw(rng)


def dc(amplitude: float) -> InputSource:
    return InputSource("dc", amplitude)


def dithered_dc(amplitude: float, sd_lsb: float) -> InputSource:
    return InputSource("dithered", amplitude, dither_sd_lsb=sd_lsb)


def exponential(amplitude: float, tau_ms: float) -> InputSource:
    return InputSource("exp", amplitude, decay_tau=tau_ms)


def gaussian_draw(rng: RandomStream) -> float:
    """One standard normal via Box-Muller from two uniform words."""
    u1 = (rng.next_u32() + 1) * 2.0**-32  # in (0, 1]
    u2 = rng.next_u32() * 2.0**-32
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


DEFAULT_DC_NA = 4.775
