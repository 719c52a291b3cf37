"""Study orchestration: spike-lag comparisons against a double-precision
reference, SR bit-width sweeps, input-dither sweeps, and the multiply
error-distribution suite, all emitting frozen-schema CSV files.

Every study is deterministic given (config, base seed): repeat r of a
stochastic cell runs on seed base_seed + r, and the double reference
train for a (solver, neuron) pair is computed once and shared by all
backends compared against it.
"""

from __future__ import annotations

import functools
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from . import bed as bed_mod
from . import neuron as neuron_mod
from .backends import Backend
from .esr import SolverKind
from .neuron import DEFAULT_DC_NA, NeuronParams
from .rng import GeneratorKind
from .rounding import RoundingMode, RoundingSpec
from .simulate import SimulationResult, simulate

OUTPUT_DIR_ENV = "FXPSR_OUTPUT_DIR"

DEFAULT_SPIKE_INDEX = 650
DEFAULT_SR_BITS = (2, 4, 6, 8, 12)
DEFAULT_DITHER_MULTIPLIERS = (0, 1, 2, 4, 8, 16, 32, 64, 128, 256, 512,
                              1024, 2048, 4096, 8192)
_H = Fraction(1, 10)
_REFERENCE_CAP_MS = 400_000.0


def output_dir(override: Optional[str] = None) -> str:
    return override or os.environ.get(OUTPUT_DIR_ENV) or "."


def fmt(x: float) -> str:
    """Float cell formatting: 17 significant digits, 'nan' when censored."""
    if x != x:
        return "nan"
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# Lag computation


def spike_lag(test_times: np.ndarray, ref_times: np.ndarray,
              upto: int) -> np.ndarray:
    """Index-wise spike time differences (positive = test lags) for
    spike indices 1..min(upto, len(test), len(ref))."""
    if len(test_times) == 0 or len(ref_times) == 0:
        raise ValueError("spike trains must be nonempty")
    n = min(upto, len(test_times), len(ref_times))
    return np.asarray(test_times[:n], dtype=np.float64) - np.asarray(
        ref_times[:n], dtype=np.float64)


@functools.lru_cache(maxsize=None)
def reference_train(solver: SolverKind, params: NeuronParams,
                    n_spikes: int = DEFAULT_SPIKE_INDEX,
                    h: Fraction = _H) -> np.ndarray:
    """Double-backend spike times, run just past the n-th spike."""
    res = simulate(solver, params, Backend.parse("double"),
                   duration_ms=_REFERENCE_CAP_MS, stop_after_spikes=n_spikes,
                   h=h)
    if res.n_spikes < n_spikes:
        raise RuntimeError(
            f"reference produced only {res.n_spikes}/{n_spikes} spikes")
    times = res.spike_times
    times.setflags(write=False)
    return times


def _is_stochastic(backend: Backend, dither_sd_lsb: float) -> bool:
    if dither_sd_lsb > 0 or backend.stochastic_constants:
        return True
    return (backend.is_fixed
            and backend.rounding.mode is RoundingMode.SR)


# ---------------------------------------------------------------------------
# Lag study


@dataclass(frozen=True)
class LagCell:
    solver: SolverKind
    neuron: str
    backend: str
    spike_index: int
    mean_lag_ms: float   # nan when every run was censored
    sd_ms: float
    n_runs: int          # uncensored runs contributing to the mean


def _run_cell(solver: SolverKind, params: NeuronParams, backend: Backend,
              ref: np.ndarray, spike_indices: Sequence[int], repeats: int,
              base_seed: int, rng_kind: GeneratorKind,
              input_source: neuron_mod.InputSource,
              duration_ms: float) -> dict[int, list[float]]:
    """Per spike index, the lag of each run that reached it."""
    max_idx = max(spike_indices)
    dither = input_source.dither_sd_lsb if input_source.kind == "dithered" else 0.0
    n_runs = repeats if _is_stochastic(backend, dither) else 1
    lags: dict[int, list[float]] = {k: [] for k in spike_indices}
    for r in range(n_runs):
        res = simulate(solver, params, backend, duration_ms=duration_ms,
                       stop_after_spikes=max_idx, seed=base_seed + r,
                       rng_kind=rng_kind, input_source=input_source, h=_H)
        for k in spike_indices:
            if res.n_spikes >= k:
                lags[k].append(float(res.spike_times[k - 1] - ref[k - 1]))
    return lags


def _summarise(vals: list[float]) -> tuple[float, float, int]:
    n = len(vals)
    if n == 0:
        return math.nan, math.nan, 0
    arr = np.asarray(vals)
    sd = float(arr.std(ddof=1)) if n > 1 else 0.0
    return float(arr.mean()), sd, n


def run_lag_study(solvers: Iterable[SolverKind | str],
                  neurons: Iterable[str],
                  backend_labels: Iterable[str | Backend],
                  *,
                  spike_indices: Sequence[int] = (DEFAULT_SPIKE_INDEX,),
                  repeats: int = 100,
                  base_seed: int = 1,
                  rng_kind: GeneratorKind = GeneratorKind.KISS99,
                  amplitude: float = DEFAULT_DC_NA,
                  margin: float = 0.10) -> list[LagCell]:
    """Spike-lag study vs the shared double reference, DC input.

    The run budget per cell is the reference time to the last requested
    spike plus a margin; runs that never reach a spike index within
    that budget are censored (excluded from the mean, reflected in
    n_runs).
    """
    solvers = [SolverKind(s) if isinstance(s, str) else s for s in solvers]
    backs = [Backend.parse(b) if isinstance(b, str) else b
             for b in backend_labels]
    src = neuron_mod.dc(amplitude)
    max_idx = max(spike_indices)
    cells: list[LagCell] = []
    for solver in solvers:
        for name in neurons:
            params = NeuronParams.preset(name)
            ref = reference_train(solver, params, max_idx)
            duration = float(ref[-1]) * (1.0 + margin)
            for backend in backs:
                lags = _run_cell(solver, params, backend, ref, spike_indices,
                                 repeats, base_seed, rng_kind, src, duration)
                for k in spike_indices:
                    mean, sd, n = _summarise(lags[k])
                    cells.append(LagCell(solver, name.upper(), backend.label,
                                         k, mean, sd, n))
    return cells


# ---------------------------------------------------------------------------
# SR bit-width sweep


@dataclass(frozen=True)
class SrBitsCell:
    solver: SolverKind
    neuron: str
    k_bits: int
    mean_lag650_ms: float
    sd_ms: float
    n_runs: int


def run_sr_bits_sweep(solvers: Iterable[SolverKind | str],
                      neurons: Iterable[str],
                      *,
                      sr_bits: Sequence[int] = DEFAULT_SR_BITS,
                      repeats: int = 100,
                      base_seed: int = 1,
                      rng_kind: GeneratorKind = GeneratorKind.KISS99,
                      spike_index: int = DEFAULT_SPIKE_INDEX) -> list[SrBitsCell]:
    """Lag at the target spike vs the SR comparison width k (Fxp32)."""
    out: list[SrBitsCell] = []
    for k in sr_bits:
        label = f"fxp32:sr{k}" if k != 32 else "fxp32:sr"
        cells = run_lag_study(solvers, neurons, [label],
                              spike_indices=(spike_index,), repeats=repeats,
                              base_seed=base_seed, rng_kind=rng_kind)
        for c in cells:
            out.append(SrBitsCell(c.solver, c.neuron, k, c.mean_lag_ms,
                                  c.sd_ms, c.n_runs))
    out.sort(key=lambda c: (c.solver.value, c.neuron, c.k_bits))
    return out


# ---------------------------------------------------------------------------
# Dither sweep


@dataclass(frozen=True)
class DitherCell:
    solver: SolverKind
    neuron: str
    backend: str
    multiplier: float
    mean_lag650_ms: float
    sd_ms: float
    n_runs: int


def _dither_backend(label: str) -> Backend:
    base = Backend.parse(label)
    # The sweep pins every backend to single-precision constant values
    # so the only difference between backends is the state arithmetic.
    return Backend(base.kind, base.rounding, float32_constants=True)


def run_dither_sweep(solvers: Iterable[SolverKind | str],
                     neurons: Iterable[str],
                     backend_labels: Iterable[str] = ("double", "float",
                                                      "fxp32:rn", "fxp32:sr"),
                     *,
                     multipliers: Sequence[float] = DEFAULT_DITHER_MULTIPLIERS,
                     repeats: int = 40,
                     base_seed: int = 1,
                     rng_kind: GeneratorKind = GeneratorKind.KISS99,
                     spike_index: int = DEFAULT_SPIKE_INDEX) -> list[DitherCell]:
    """Lag at the target spike vs input dither SD (in s16.15 LSBs)."""
    solvers = [SolverKind(s) if isinstance(s, str) else s for s in solvers]
    backs = [_dither_backend(b) for b in backend_labels]
    cells: list[DitherCell] = []
    for solver in solvers:
        for name in neurons:
            params = NeuronParams.preset(name)
            ref = reference_train(solver, params, spike_index)
            duration = float(ref[-1]) * 1.10
            for backend, mult in ((b, m) for b in backs for m in multipliers):
                src = (neuron_mod.dithered_dc(DEFAULT_DC_NA, float(mult))
                       if mult > 0 else neuron_mod.dc(DEFAULT_DC_NA))
                lags = _run_cell(solver, params, backend, ref, (spike_index,),
                                 repeats, base_seed, rng_kind, src, duration)
                mean, sd, n = _summarise(lags[spike_index])
                cells.append(DitherCell(solver, name.upper(), backend.label,
                                        float(mult), mean, sd, n))
    return cells


# ---------------------------------------------------------------------------
# BED suite


def run_bed_suite(cases: Optional[Iterable[str]] = None,
                  modes: Sequence[RoundingSpec] = (
                      RoundingSpec(RoundingMode.RD),
                      RoundingSpec(RoundingMode.RN),
                      RoundingSpec(RoundingMode.SR)),
                  *,
                  n: int = bed_mod.N_SAMPLES_DEFAULT,
                  seed: int = 1,
                  rng_kind: GeneratorKind = GeneratorKind.KISS99
                  ) -> list[bed_mod.BedResult]:
    if cases is None:
        cases = list(bed_mod.MUL_CASES)
    results = []
    for case in cases:
        for spec in modes:
            results.append(bed_mod.run_bed(case, spec, n, rng_kind=rng_kind,
                                           seed=seed))
    return results


# ---------------------------------------------------------------------------
# CSV writers (frozen schemas)


def _write(path: str, header: str, rows: Iterable[str]) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="\n") as f:
        f.write(header + "\n")
        for row in rows:
            f.write(row + "\n")


def write_lag_csv(path: str, cells: Sequence[LagCell]) -> None:
    _write(path, "solver,neuron,backend,spike_index,mean_lag_ms,sd_ms,n_runs",
           (f"{c.solver.value},{c.neuron},{c.backend},{c.spike_index},"
            f"{fmt(c.mean_lag_ms)},{fmt(c.sd_ms)},{c.n_runs}"
            for c in cells))


def write_srbits_csv(path: str, cells: Sequence[SrBitsCell]) -> None:
    _write(path, "solver,neuron,k_bits,mean_lag650_ms,sd_ms",
           (f"{c.solver.value},{c.neuron},{c.k_bits},"
            f"{fmt(c.mean_lag650_ms)},{fmt(c.sd_ms)}" for c in cells))


def write_dither_csv(path: str, cells: Sequence[DitherCell]) -> None:
    _write(path, "solver,neuron,backend,multiplier,mean_lag650_ms,sd_ms",
           (f"{c.solver.value},{c.neuron},{c.backend},{fmt(c.multiplier)},"
            f"{fmt(c.mean_lag650_ms)},{fmt(c.sd_ms)}" for c in cells))


def write_bed_samples_csv(path: str, result: bed_mod.BedResult) -> None:
    _write(path, "sample_index,error_lsb",
           (f"{i},{fmt(e)}" for i, e in enumerate(result.errors_lsb)))


def write_bed_summary_csv(path: str,
                          results: Sequence[bed_mod.BedResult]) -> None:
    _write(path, "case,mode,n,mean,sd,min,max",
           (f"{r.case},{r.mode},{r.n},{fmt(r.mean)},{fmt(r.sd)},"
            f"{fmt(r.min)},{fmt(r.max)}" for r in results))


def write_spike_csv(path: str, result_or_times) -> None:
    times = (result_or_times.spike_times
             if isinstance(result_or_times, SimulationResult)
             else result_or_times)
    _write(path, "spike_index,t_ms",
           (f"{i + 1},{fmt(t)}" for i, t in enumerate(times)))


def write_trace_csv(path: str, result: SimulationResult) -> None:
    if result.trace_v is None:
        raise ValueError("simulation was run without record_trace")
    _write(path, "t_ms,v,u",
           (f"{fmt(t)},{fmt(v)},{fmt(u)}"
            for t, v, u in zip(result.trace_t, result.trace_v,
                               result.trace_u)))
