"""Whole-run simulation: solver program x backend x input, compiled loop.

``simulate`` wires a frozen solver step program to one arithmetic
backend and runs it for a fixed number of 0.1 ms (configurable) steps,
recording spike times.  All randomness (stochastic rounding, dithered
input, stochastic constant selection) comes from a single seeded
stream, so a run is exactly reproducible from its arguments.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from . import _kernels, backends, esr, neuron, rng
from .rounding import RoundingMode

_KIND_CODE = {
    rng.GeneratorKind.KISS99: _kernels.KIND_KISS99,
    rng.GeneratorKind.LFSR33: _kernels.KIND_LFSR33,
    rng.GeneratorKind.RANQD1: _kernels.KIND_RANQD1,
}

_MODE_CODE = {
    RoundingMode.RD: _kernels.MODE_RD,
    RoundingMode.RN: _kernels.MODE_RN,
    RoundingMode.SR: _kernels.MODE_SR,
}


@dataclass(frozen=True)
class SimulationResult:
    solver: esr.SolverKind
    backend: backends.Backend
    h_ms: float
    spike_times: np.ndarray      # ms, float64
    n_spikes: int                # total, even if beyond the recording cap
    steps_run: int
    draws_used: int
    saturations: int
    trace_t: Optional[np.ndarray] = None
    trace_v: Optional[np.ndarray] = None
    trace_u: Optional[np.ndarray] = None


@functools.lru_cache(maxsize=None)
def _program(solver: esr.SolverKind, params: neuron.NeuronParams,
             h: Fraction) -> esr.EsrProgram:
    return esr.build_program(solver, params, h)


@functools.lru_cache(maxsize=None)
def _fixed_tables(program: esr.EsrProgram, backend: backends.Backend):
    return backends.build_fixed_tables(program, backend)


@functools.lru_cache(maxsize=None)
def _float_consts(program: esr.EsrProgram, backend: backends.Backend):
    return backends.build_float_consts(program, backend)


def _stream_to_array(stream: rng.RandomStream) -> np.ndarray:
    st = np.zeros(_kernels.STATE_LEN, dtype=np.uint64)
    for i, w in enumerate(stream.state):
        st[i] = w
    st[4] = stream.draws_made
    return st


def _round_nearest_raw(value: float, frac_bits: int, raw_min: int, raw_max: int) -> int:
    raw = math.floor(value * (1 << frac_bits) + 0.5)
    return min(max(raw, raw_min), raw_max)


def _input_schedule(source: neuron.InputSource, n_steps: int, h_ms: float):
    """(constant dc, per-step schedule or empty, dither sd)."""
    if source.kind == "exp":
        t = np.arange(n_steps, dtype=np.float64) * h_ms
        return 0.0, source.amplitude * np.exp(-t / source.decay_tau), 0.0
    empty = np.empty(0, dtype=np.float64)
    if source.kind == "dithered":
        return source.amplitude, empty, source.dither_sd
    return source.amplitude, empty, 0.0


def simulate(solver: esr.SolverKind,
             params: neuron.NeuronParams,
             backend: backends.Backend,
             *,
             duration_ms: float,
             input_source: Optional[neuron.InputSource] = None,
             stop_after_spikes: int = 0,
             rng_kind: rng.GeneratorKind = rng.GeneratorKind.KISS99,
             seed: int = 1,
             h: Fraction = Fraction(1, 10),
             record_trace: bool = False,
             max_recorded_spikes: int = 2_000_000) -> SimulationResult:
    """Run one neuron for duration_ms (or until stop_after_spikes spikes).

    The state starts at rest (v = c, u = b*c) encoded in the backend's
    number format; spike times are (step index)*h in ms.
    """
    if isinstance(solver, str):
        solver = esr.SolverKind(solver)
    if isinstance(params, str):
        params = neuron.NeuronParams.preset(params)
    if isinstance(backend, str):
        backend = backends.Backend.parse(backend)
    if input_source is None:
        input_source = neuron.dc(neuron.DEFAULT_DC_NA)

    h_ms = float(h)
    n_steps = int(round(duration_ms / h_ms))
    if n_steps <= 0:
        raise ValueError("duration must cover at least one step")

    program = _program(solver, params, h)
    stream = rng.seed(rng_kind, seed)
    st = _stream_to_array(stream)
    kind_code = _KIND_CODE[stream.kind]

    cap = stop_after_spikes if stop_after_spikes > 0 else max_recorded_spikes
    spike_steps = np.zeros(cap, dtype=np.int64)
    trace_n = n_steps if record_trace else 0
    trace_v = np.zeros(trace_n, dtype=np.float64)
    trace_u = np.zeros(trace_n, dtype=np.float64)
    i_dc, sched, dither_sd = _input_schedule(input_source, n_steps, h_ms)
    has_sched = 1 if sched.size else 0
    sat_count = np.zeros(1, dtype=np.int64)

    v0 = float(params.c)
    u0 = float(params.b * params.c)
    thr = float(params.threshold)

    if backend.is_fixed:
        t = _fixed_tables(program, backend)
        spec = backend.rounding
        n_spk, steps = _kernels.sim_fixed(
            t.ops, t.n_regs, t.out_v, t.out_u,
            t.c_lo, t.c_hi, t.c_prob, t.op_dbits, t.op_rmin, t.op_rmax,
            1 if backend.stochastic_constants else 0,
            t.frac_bits, t.raw_min, t.raw_max,
            _MODE_CODE[spec.mode], spec.sr_bits, kind_code, st,
            np.int64(_round_nearest_raw(v0, t.frac_bits, t.raw_min, t.raw_max)),
            np.int64(_round_nearest_raw(u0, t.frac_bits, t.raw_min, t.raw_max)),
            np.int64(_round_nearest_raw(i_dc, t.frac_bits, t.raw_min, t.raw_max)),
            sched, has_sched, dither_sd,
            n_steps,
            np.int64(_round_nearest_raw(thr, t.frac_bits, t.raw_min, t.raw_max)),
            np.int64(_round_nearest_raw(float(params.c), t.frac_bits, t.raw_min, t.raw_max)),
            np.int64(_round_nearest_raw(float(params.d), t.frac_bits, t.raw_min, t.raw_max)),
            spike_steps, stop_after_spikes, trace_v, trace_u,
            1 if record_trace else 0, sat_count)
    else:
        consts = _float_consts(program, backend)
        if backend.kind is backends.BackendKind.DOUBLE:
            n_spk, steps = _kernels.sim_f64(
                t_ops := backends.ops_array(program), program.n_regs,
                program.out_v, program.out_u, consts,
                kind_code, st, v0, u0, i_dc, sched, has_sched, dither_sd,
                n_steps, thr, float(params.c), float(params.d),
                spike_steps, stop_after_spikes, trace_v, trace_u,
                1 if record_trace else 0)
        else:
            n_spk, steps = _kernels.sim_f32(
                backends.ops_array(program), program.n_regs,
                program.out_v, program.out_u, consts,
                kind_code, st,
                np.float32(v0), np.float32(u0), np.float32(i_dc),
                sched, has_sched, dither_sd,
                n_steps, np.float32(thr),
                np.float32(params.c), np.float32(params.d),
                spike_steps, stop_after_spikes, trace_v, trace_u,
                1 if record_trace else 0)

    recorded = min(n_spk, cap)
    times = spike_steps[:recorded].astype(np.float64) * h_ms
    return SimulationResult(
        solver=solver,
        backend=backend,
        h_ms=h_ms,
        spike_times=times,
        n_spikes=int(n_spk),
        steps_run=int(steps),
        draws_used=int(st[4]),
        saturations=int(sat_count[0]),
        trace_t=(np.arange(1, steps + 1, dtype=np.float64) * h_ms)[:steps] if record_trace else None,
        trace_v=trace_v[:steps] if record_trace else None,
        trace_u=trace_u[:steps] if record_trace else None,
    )
