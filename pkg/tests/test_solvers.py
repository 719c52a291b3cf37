import math
from fractions import Fraction

import numpy as np
import pytest

from fxpsr import _kernels
from fxpsr.backends import (Backend, build_fixed_tables, build_float_consts,
                            eval_fixed_reference, ops_array)
from fxpsr.esr import (ADD, ADDC, MULC, MULR, SUB, SolverKind, build_program,
                       eval_float)
from fxpsr.neuron import NeuronParams
from fxpsr.rng import GeneratorKind, seed
from fxpsr.rounding import RoundingMode, RoundingSpec, round_raw, sr
from fxpsr.simulate import simulate

RS = NeuronParams.preset("RS")
H = Fraction(1, 10)

EXPECTED_MULS = {
    SolverKind.RK2_MIDPOINT: 14,
    SolverKind.RK2_TRAPEZOID: 14,
    SolverKind.RK3_HEUN: 23,
    SolverKind.CHAN_TSAI: 32,
}


# --- independent staged reference implementations ---------------------------
#
# The programs fold the stage fraction into the derivative constants
# (scale*F rather than scale times F), so the oracle evaluates the same
# pre-scaled derivative but keeps the Runge-Kutta stage structure
# explicit instead of flattening it to straight-line code.

def _f(v, u, i_in, p, scale):
    c_vsq = float(scale * Fraction("0.04"))
    c_vlin = float(scale * 5)
    c_scale = float(scale)
    c_bias = float(scale * 140)
    dv = (((c_vsq * v) * v + c_vlin * v) + c_bias) - c_scale * u
    dv = dv + c_scale * i_in
    du = float(scale * p.a) * (float(p.b) * v - u)
    return dv, du


def _g(v, fv, fu, p, h):
    # Second time derivatives along the flow (DC input), given the
    # h-scaled first derivatives fv = h*dv, fu = h*du.
    c_fv = float(h * Fraction("0.08"))
    c_fv0 = float(h * 5)
    gv = (c_fv * v + c_fv0) * fv - float(h) * fu
    gu = float(h * p.a) * (float(p.b) * fv - fu)
    return gv, gu


def staged_step(solver, v, u, i_in, p, h):
    if solver is SolverKind.RK2_MIDPOINT:
        k1 = _f(v, u, i_in, p, h / 2)
        k2 = _f(v + k1[0], u + k1[1], i_in, p, h)
        return v + k2[0], u + k2[1]
    if solver is SolverKind.RK2_TRAPEZOID:
        k1 = _f(v, u, i_in, p, h / 2)
        k2 = _f(v + (k1[0] + k1[0]), u + (k1[1] + k1[1]), i_in, p, h / 2)
        return v + (k1[0] + k2[0]), u + (k1[1] + k2[1])
    if solver is SolverKind.RK3_HEUN:
        k1 = _f(v, u, i_in, p, h / 3)
        k2 = _f(v + k1[0], u + k1[1], i_in, p, 2 * h / 3)
        k3 = _f(v + k2[0], u + k2[1], i_in, p, 3 * h / 4)
        return v + (0.75 * k1[0] + k3[0]), u + (0.75 * k1[1] + k3[1])
    # two-derivative third-order variant
    f1 = _f(v, u, i_in, p, h)
    g1 = _g(v, f1[0], f1[1], p, h)
    v2 = v + (0.5 * f1[0] + 0.125 * g1[0])
    u2 = u + (0.5 * f1[1] + 0.125 * g1[1])
    f2 = _f(v2, u2, i_in, p, h)
    g2 = _g(v2, f2[0], f2[1], p, h)
    sixth, third = float(Fraction(1, 6)), float(Fraction(1, 3))
    return (v + (f1[0] + (sixth * g1[0] + third * g2[0])),
            u + (f1[1] + (sixth * g1[1] + third * g2[1])))


def _ulps(a, b):
    return abs(a - b) / math.ulp(max(abs(a), abs(b), 1e-30))


# --- program structure -------------------------------------------------------

@pytest.mark.parametrize("solver", list(SolverKind))
def test_multiplication_count_is_fixed(solver):
    program = build_program(solver, RS, H)
    assert program.muls_per_step == EXPECTED_MULS[solver]


@pytest.mark.parametrize("solver", list(SolverKind))
def test_backends_share_one_program(solver):
    program = build_program(solver, RS, H)
    t32 = build_fixed_tables(program, Backend.parse("fxp32:rn"))
    t16 = build_fixed_tables(program, Backend.parse("fxp16:rn"))
    assert np.array_equal(t32.ops, t16.ops)
    assert np.array_equal(t32.ops, ops_array(program))
    assert len(t32.c_lo) == len(t16.c_lo) == len(program.consts)
    # Same instruction mix in every backend by construction.
    assert t32.out_v == t16.out_v == program.out_v


@pytest.mark.parametrize("solver", list(SolverKind))
def test_programs_write_single_assignment(solver):
    program = build_program(solver, RS, H)
    written = set()
    for opcode, a1, a2, dest in program.ops:
        if opcode in (MULR, ADD, SUB):
            assert a1 < dest and a2 < dest
        else:
            assert a2 < dest
        assert dest not in written
        written.add(dest)


# --- double-backend faithfulness (staged oracle) -----------------------------

@pytest.mark.parametrize("solver", list(SolverKind))
def test_double_backend_matches_staged_rk(solver):
    program = build_program(solver, RS, H)
    consts = build_float_consts(program, Backend.parse("double"))
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(2000):
        v = rng.uniform(-80.0, 29.0)
        u = rng.uniform(-16.0, 0.0)
        i_in = rng.uniform(0.0, 8.0)
        ev, eu = eval_float(program, consts, v, u, i_in)
        sv, su = staged_step(solver, v, u, i_in, RS, H)
        worst = max(worst, _ulps(ev, sv), _ulps(eu, su))
    assert worst <= 4.0, f"{solver}: {worst:.2f} ulps"


@pytest.mark.parametrize("solver", list(SolverKind))
def test_zero_timestep_is_identity(solver):
    program = build_program(solver, RS, Fraction(0))
    consts = build_float_consts(program, Backend.parse("double"))
    assert eval_float(program, consts, -65.0, -13.0, 4.775) == (-65.0, -13.0)
    backend = Backend.parse("fxp32:rn")
    tables = build_fixed_tables(program, backend)
    v, u = eval_fixed_reference(program, tables, backend.rounding, None,
                                -65 << 15, -13 << 15, 4775)
    assert (v, u) == (-65 << 15, -13 << 15)


@pytest.mark.parametrize("solver", list(SolverKind))
def test_fixed_rd_one_step_close_to_double(solver):
    # Each of the muls rounds at most once into a grid no coarser than
    # the state grid, so one RD step sits within muls*eps of double.
    program = build_program(solver, RS, H)
    consts = build_float_consts(program, Backend.parse("double"))
    backend = Backend.parse("fxp32:rd")
    tables = build_fixed_tables(program, backend)
    dv, du = eval_float(program, consts, -65.0, -13.0, 4.775)
    i_raw = round(4.775 * (1 << 15))
    fv, fu = eval_fixed_reference(program, tables, backend.rounding, None,
                                  -65 << 15, -13 << 15, i_raw)
    eps = 2.0**-15
    bound = (program.muls_per_step + 2) * eps  # + input/constant encoding
    assert abs(fv / (1 << 15) - dv) <= bound
    assert abs(fu / (1 << 15) - du) <= bound


# --- compiled kernel equals the pure-python interpreter ----------------------

def _python_sim(program, tables, backend, kind, seed_value, n_steps,
                v0_raw, u0_raw, i_raw, thr_raw, reset_raw, incr_raw):
    """Reimplementation of the simulation loop on Python ints."""
    stream = seed(kind, seed_value)
    spec = backend.rounding
    v, u = v0_raw, u0_raw
    spikes = []
    c_raw = [int(x) for x in tables.c_lo]
    for step in range(1, n_steps + 1):
        if backend.stochastic_constants:
            for i in range(len(c_raw)):
                draw = stream.next_u32()
                c_raw[i] = int(tables.c_hi[i]) if draw < int(tables.c_prob[i]) \
                    else int(tables.c_lo[i])
        regs = [0] * tables.n_regs
        regs[0], regs[1], regs[2] = v, u, i_raw
        for j, (opcode, a1, a2, dest) in enumerate(program.ops):
            if opcode == MULC:
                q = round_raw(c_raw[a1] * regs[a2], int(tables.op_dbits[j]),
                              spec, stream)
            elif opcode == MULR:
                q = round_raw(regs[a1] * regs[a2], int(tables.op_dbits[j]),
                              spec, stream)
            elif opcode == ADD:
                q = regs[a1] + regs[a2]
            elif opcode == SUB:
                q = regs[a1] - regs[a2]
            else:
                q = c_raw[a1] + regs[a2]
            regs[dest] = min(max(q, int(tables.op_rmin[j])),
                             int(tables.op_rmax[j]))
        v, u = regs[tables.out_v], regs[tables.out_u]
        if v >= thr_raw:
            spikes.append(step)
            v = reset_raw
            u = min(max(u + incr_raw, tables.raw_min), tables.raw_max)
    return v, u, spikes, stream.draws_made


@pytest.mark.parametrize("backend_label", ["fxp32:rd", "fxp32:rn",
                                           "fxp32:sr", "fxp32:sr6",
                                           "fxp16:sr"])
@pytest.mark.parametrize("kind", list(GeneratorKind))
def test_kernel_bit_identical_to_python(backend_label, kind):
    solver = SolverKind.RK2_MIDPOINT
    backend = Backend.parse(backend_label)
    program = build_program(solver, RS, H)
    tables = build_fixed_tables(program, backend)
    pf = tables.frac_bits
    n_steps = 3000
    v0 = -65 << pf
    u0 = -13 << pf
    i_raw = round(4.775 * (1 << pf))
    thr = 30 << pf
    incr = 8 << pf

    res = simulate(solver, RS, backend, duration_ms=n_steps / 10,
                   seed=5, rng_kind=kind)
    pv, pu, pspikes, pdraws = _python_sim(
        program, tables, backend, kind, 5, n_steps, v0, u0, i_raw, thr,
        v0, incr)
    assert [round(t * 10) for t in res.spike_times] == pspikes
    assert res.draws_used == pdraws


def test_stochastic_constants_match_python():
    solver = SolverKind.RK2_TRAPEZOID
    backend = Backend(Backend.parse("fxp32:rn").kind,
                      Backend.parse("fxp32:rn").rounding,
                      stochastic_constants=True)
    program = build_program(solver, RS, H)
    tables = build_fixed_tables(program, backend)
    assert (tables.c_hi != tables.c_lo).any()  # something to dither
    res = simulate(solver, RS, backend, duration_ms=200.0, seed=9)
    pv, pu, pspikes, pdraws = _python_sim(
        program, tables, backend, GeneratorKind.KISS99, 9, 2000,
        -65 << 15, -13 << 15, round(4.775 * (1 << 15)), 30 << 15,
        -65 << 15, 8 << 15)
    assert [round(t * 10) for t in res.spike_times] == pspikes
    assert res.draws_used == pdraws


# --- randomness accounting ----------------------------------------------------

@pytest.mark.parametrize("solver", list(SolverKind))
def test_sr_draw_count_is_steps_times_muls(solver):
    res = simulate(solver, RS, Backend.parse("fxp32:sr"), duration_ms=100.0,
                   seed=1)
    assert res.draws_used == res.steps_run * EXPECTED_MULS[solver]


def test_deterministic_modes_use_no_draws():
    for label in ("fxp32:rd", "fxp32:rn", "double", "float"):
        res = simulate(SolverKind.RK2_MIDPOINT, RS, Backend.parse(label),
                       duration_ms=100.0, seed=1)
        assert res.draws_used == 0


def test_dither_uses_two_draws_per_step():
    from fxpsr.neuron import dithered_dc
    res = simulate(SolverKind.RK2_MIDPOINT, RS, Backend.parse("double"),
                   duration_ms=100.0, seed=1,
                   input_source=dithered_dc(4.775, 16.0))
    assert res.draws_used == 2 * res.steps_run


# --- whole-run behaviour ------------------------------------------------------

def test_spike_times_on_step_grid():
    res = simulate(SolverKind.RK3_HEUN, RS, Backend.parse("fxp32:sr"),
                   duration_ms=2000.0, seed=2)
    assert res.n_spikes > 0
    for t in res.spike_times:
        assert abs(t / 0.1 - round(t / 0.1)) < 1e-9


def test_same_seed_same_train():
    kw = dict(duration_ms=1500.0, seed=31)
    a = simulate(SolverKind.RK2_MIDPOINT, RS, Backend.parse("fxp32:sr"), **kw)
    b = simulate(SolverKind.RK2_MIDPOINT, RS, Backend.parse("fxp32:sr"), **kw)
    assert np.array_equal(a.spike_times, b.spike_times)
    assert a.draws_used == b.draws_used


def test_zero_input_stays_subthreshold():
    from fxpsr.neuron import dc
    res = simulate(SolverKind.RK2_MIDPOINT, RS, Backend.parse("double"),
                   duration_ms=1000.0, input_source=dc(0.0), seed=1)
    assert res.n_spikes == 0


def test_trace_recording():
    res = simulate(SolverKind.RK2_MIDPOINT, RS, Backend.parse("fxp32:rn"),
                   duration_ms=100.0, seed=1, record_trace=True)
    assert len(res.trace_v) == res.steps_run == 1000
    assert res.trace_v.max() <= 30.0
    assert res.trace_t[0] == pytest.approx(0.1)


def test_16bit_runs_saturate_but_survive():
    res = simulate(SolverKind.RK2_MIDPOINT, RS, Backend.parse("fxp16:sr"),
                   duration_ms=2000.0, seed=3)
    assert res.n_spikes > 0
