"""Unrolled one-step update programs for the fixed-timestep solvers.

Each solver step is frozen as a short straight-line program over three
input registers (v, u, I) with named constants.  Every arithmetic
backend interprets the *same* program; only the meaning of the
instructions differs (float ops vs raw-integer ops with rounding), so
the expression tree, the constant multiset and the number of
multiplications per step are identical across backends by construction.

The derivative of the neuron is always evaluated pre-scaled by the
relevant step fraction (e.g. h, h/2), which folds the timestep into
the constants and keeps every intermediate within the range of the
16-bit state format:

    scale*F(v,u,I) = ((scale*0.04)*v)*v + (scale*5)*v + scale*140
                     - scale*u + scale*I
    scale*G(v,u)   = (scale*a)*(b*v - u)

That form uses 7 multiplications per derivative evaluation, giving 14
for the two-stage second-order solvers.

Registers carry a grid tag.  Most live on the state grid (s16.15 or
s8.7 in the fixed backends); sub-unit intermediates that a later
multiply would amplify — (scale*0.04)*v before the *v, and the
second-derivative slope term — are held on the fraction-only grid
(s0.31 / s0.15) so their rounding error stays below an output LSB.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction

from .neuron import NeuronParams

# Opcodes.  MULC/ADDC take (const_index, src_reg); MULR/ADD/SUB take
# (reg, reg).  Every instruction writes a fresh register.
MULC = 0
MULR = 1
ADD = 2
SUB = 3
ADDC = 4

# Register grid tags.
GRID_STATE = 0   # s16.15 / s8.7 (or the plain float value)
GRID_FRAC = 1    # s0.31 / s0.15 signed pure fraction

# Fixed input registers.
REG_V = 0
REG_U = 1
REG_I = 2


class SolverKind(enum.Enum):
    RK2_MIDPOINT = "rk2mid"
    RK2_TRAPEZOID = "rk2trap"
    RK3_HEUN = "rk3heun"
    CHAN_TSAI = "chantsai"


@dataclass(frozen=True)
class ConstSpec:
    name: str
    value: Fraction
    additive: bool       # added (same grid as its operand) vs multiplied
    grid: int = GRID_STATE  # storage grid; only meaningful when additive


@dataclass(frozen=True)
class EsrProgram:
    solver: SolverKind
    ops: tuple[tuple[int, int, int, int], ...]  # (opcode, a1, a2, dest)
    op_grids: tuple[int, ...]                   # output grid per op
    consts: tuple[ConstSpec, ...]
    reg_grids: tuple[int, ...]                  # grid per register
    n_regs: int
    out_v: int
    out_u: int

    @property
    def muls_per_step(self) -> int:
        return sum(1 for op in self.ops if op[0] in (MULC, MULR))


class _Builder:
    def __init__(self):
        self.ops: list[tuple[int, int, int, int]] = []
        self.op_grids: list[int] = []
        self.consts: list[ConstSpec] = []
        self._const_index: dict[tuple[Fraction, bool, int], int] = {}
        self.reg_grids: list[int] = [GRID_STATE, GRID_STATE, GRID_STATE]

    @property
    def next_reg(self) -> int:
        return len(self.reg_grids)

    def const(self, name: str, value: Fraction, additive: bool = False,
              grid: int = GRID_STATE) -> int:
        key = (Fraction(value), additive, grid)
        idx = self._const_index.get(key)
        if idx is None:
            idx = len(self.consts)
            self.consts.append(ConstSpec(name, key[0], additive, grid))
            self._const_index[key] = idx
        return idx

    def _emit(self, opcode: int, a1: int, a2: int, grid: int) -> int:
        dest = self.next_reg
        self.reg_grids.append(grid)
        self.ops.append((opcode, a1, a2, dest))
        self.op_grids.append(grid)
        return dest

    def mulc(self, c: int, r: int, out: int = GRID_STATE) -> int:
        return self._emit(MULC, c, r, out)

    def mulr(self, a: int, b: int, out: int = GRID_STATE) -> int:
        return self._emit(MULR, a, b, out)

    def add(self, a: int, b: int) -> int:
        if self.reg_grids[a] != self.reg_grids[b]:
            raise ValueError("add operands must share a grid")
        return self._emit(ADD, a, b, self.reg_grids[a])

    def sub(self, a: int, b: int) -> int:
        if self.reg_grids[a] != self.reg_grids[b]:
            raise ValueError("sub operands must share a grid")
        return self._emit(SUB, a, b, self.reg_grids[a])

    def addc(self, c: int, r: int) -> int:
        spec = self.consts[c]
        if not spec.additive or spec.grid != self.reg_grids[r]:
            raise ValueError("addc constant/operand grid mismatch")
        return self._emit(ADDC, c, r, self.reg_grids[r])


def _scaled_deriv(b: _Builder, v: int, u: int, params: NeuronParams,
                  scale: Fraction, tag: str) -> tuple[int, int]:
    """Emit (scale*dv, scale*du) evaluated at registers (v, u, I)."""
    c_vsq = b.const(f"vsq_{tag}", scale * Fraction("0.04"))
    c_vlin = b.const(f"vlin_{tag}", scale * 5)
    c_scale = b.const(f"step_{tag}", scale)
    c_bias = b.const(f"bias_{tag}", scale * 140, additive=True)
    c_b = b.const("b", params.b)
    c_a = b.const(f"a_{tag}", scale * params.a)

    # (scale*0.04)*v stays sub-unit (|v| < 100, scale <= 0.1), so it is
    # held on the fraction grid until the amplifying *v.
    t = b.mulc(c_vsq, v, out=GRID_FRAC)
    t = b.mulr(t, v)
    t2 = b.mulc(c_vlin, v)
    t3 = b.mulc(c_scale, u)
    t4 = b.mulc(c_scale, REG_I)
    dv = b.add(t, t2)
    dv = b.addc(c_bias, dv)
    dv = b.sub(dv, t3)
    dv = b.add(dv, t4)
    s = b.mulc(c_b, v)
    s = b.sub(s, u)
    du = b.mulc(c_a, s)
    return dv, du


def _second_deriv(b: _Builder, v: int, p: int, q: int, params: NeuronParams,
                  h: Fraction, tag: str) -> tuple[int, int]:
    """Emit (h^2 * dv', h^2 * du') given p = h*dv, q = h*du at (v, u).

    dv' = (0.08 v + 5) dv - du and du' = a (b dv - du), so the scaled
    forms are (0.08h*v + 5h)*p - h*q and (a*h)*(b*p - q).  The slope
    term 0.08h*v + 5h stays within (-0.2, 0.8) for realistic v, so it
    lives on the fraction grid until the *p.
    """
    c_fv = b.const("fv_slope_h", h * Fraction("0.08"))
    c_fv0 = b.const("fv_offset_h", h * 5, additive=True, grid=GRID_FRAC)
    c_h = b.const("step_h", h)
    c_b = b.const("b", params.b)
    c_ah = b.const("a_h", h * params.a)

    w = b.mulc(c_fv, v, out=GRID_FRAC)
    w = b.addc(c_fv0, w)
    gv = b.sub(b.mulr(w, p), b.mulc(c_h, q))
    gu = b.mulc(c_ah, b.sub(b.mulc(c_b, p), q))
    return gv, gu


def _rk2_midpoint(b: _Builder, params: NeuronParams, h: Fraction):
    half = h / 2
    d1v, d1u = _scaled_deriv(b, REG_V, REG_U, params, half, "h2")
    vm = b.add(REG_V, d1v)
    um = b.add(REG_U, d1u)
    d2v, d2u = _scaled_deriv(b, vm, um, params, h, "h")
    return b.add(REG_V, d2v), b.add(REG_U, d2u)


def _rk2_trapezoid(b: _Builder, params: NeuronParams, h: Fraction):
    half = h / 2
    d1v, d1u = _scaled_deriv(b, REG_V, REG_U, params, half, "h2")
    vp = b.add(REG_V, b.add(d1v, d1v))
    up = b.add(REG_U, b.add(d1u, d1u))
    d2v, d2u = _scaled_deriv(b, vp, up, params, half, "h2")
    vo = b.add(REG_V, b.add(d1v, d2v))
    uo = b.add(REG_U, b.add(d1u, d2u))
    return vo, uo


def _rk3_heun(b: _Builder, params: NeuronParams, h: Fraction):
    d1v, d1u = _scaled_deriv(b, REG_V, REG_U, params, h / 3, "h3")
    v2 = b.add(REG_V, d1v)
    u2 = b.add(REG_U, d1u)
    d2v, d2u = _scaled_deriv(b, v2, u2, params, 2 * h / 3, "2h3")
    v3 = b.add(REG_V, d2v)
    u3 = b.add(REG_U, d2u)
    d3v, d3u = _scaled_deriv(b, v3, u3, params, 3 * h / 4, "3h4")
    c34 = b.const("w34", Fraction(3, 4))
    vo = b.add(REG_V, b.add(b.mulc(c34, d1v), d3v))
    uo = b.add(REG_U, b.add(b.mulc(c34, d1u), d3u))
    return vo, uo


def _chan_tsai(b: _Builder, params: NeuronParams, h: Fraction):
    # Two-derivative explicit third-order method: one derivative
    # evaluation plus two second-derivative evaluations,
    #   y2 = y + (h/2) f + (h^2/8) g(y)
    #   y' = y + h f + h^2 (g(y)/6 + g(y2)/3)
    p, q = _scaled_deriv(b, REG_V, REG_U, params, h, "h")
    g1v, g1u = _second_deriv(b, REG_V, p, q, params, h, "g1")
    chalf = b.const("w12", Fraction(1, 2))
    c8 = b.const("w18", Fraction(1, 8))
    v2 = b.add(REG_V, b.add(b.mulc(chalf, p), b.mulc(c8, g1v)))
    u2 = b.add(REG_U, b.add(b.mulc(chalf, q), b.mulc(c8, g1u)))
    p2, q2 = _scaled_deriv(b, v2, u2, params, h, "h")
    g2v, g2u = _second_deriv(b, v2, p2, q2, params, h, "g2")
    c6 = b.const("w16", Fraction(1, 6))
    c3 = b.const("w13", Fraction(1, 3))
    vo = b.add(REG_V, b.add(p, b.add(b.mulc(c6, g1v), b.mulc(c3, g2v))))
    uo = b.add(REG_U, b.add(q, b.add(b.mulc(c6, g1u), b.mulc(c3, g2u))))
    return vo, uo


_BUILDERS = {
    SolverKind.RK2_MIDPOINT: _rk2_midpoint,
    SolverKind.RK2_TRAPEZOID: _rk2_trapezoid,
    SolverKind.RK3_HEUN: _rk3_heun,
    SolverKind.CHAN_TSAI: _chan_tsai,
}


def build_program(solver: SolverKind, params: NeuronParams,
                  h: Fraction = Fraction(1, 10)) -> EsrProgram:
    b = _Builder()
    out_v, out_u = _BUILDERS[solver](b, params, h)
    return EsrProgram(
        solver=solver,
        ops=tuple(b.ops),
        op_grids=tuple(b.op_grids),
        consts=tuple(b.consts),
        reg_grids=tuple(b.reg_grids),
        n_regs=b.next_reg,
        out_v=out_v,
        out_u=out_u,
    )


def eval_float(program: EsrProgram, const_vals, v: float, u: float, i_in: float):
    """Reference interpreter over ordinary floats (one solver step)."""
    regs = [0.0] * program.n_regs
    regs[REG_V], regs[REG_U], regs[REG_I] = v, u, i_in
    for opcode, a1, a2, dest in program.ops:
        if opcode == MULC:
            regs[dest] = const_vals[a1] * regs[a2]
        elif opcode == MULR:
            regs[dest] = regs[a1] * regs[a2]
        elif opcode == ADD:
            regs[dest] = regs[a1] + regs[a2]
        elif opcode == SUB:
            regs[dest] = regs[a1] - regs[a2]
        else:
            regs[dest] = const_vals[a1] + regs[a2]
    return regs[program.out_v], regs[program.out_u]
