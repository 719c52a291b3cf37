"""Arithmetic backends for the solver step programs.

A backend fixes the number representation the program runs in:
IEEE double, IEEE single, or a saturating fixed-point word (32-bit
s16.15 state, or 16-bit s8.7 state) with a configurable rounding rule
on every multiply.

The same frozen program is shared by all backends; only the constant
table is re-encoded.  Multiplicative constants with magnitude below
one get the full-word fraction-only format (u0.32 / s0.31, or the
16-bit analogues); everything else lives on the state grid.  Registers
tagged with the fraction grid are held in s0.31 / s0.15.
"""

from __future__ import annotations

import dataclasses
import enum
import re
from fractions import Fraction

import numpy as np

from .esr import ADD, ADDC, GRID_FRAC, MULC, MULR, SUB, EsrProgram
from .formats import (FixedFormat, S0_15, S0_31, S8_7, S16_15, U0_16, U0_32)
from .rng import RandomStream
from .rounding import RoundingMode, RoundingSpec, round_raw


class BackendKind(enum.Enum):
    DOUBLE = "double"
    SINGLE = "float"
    FXP32 = "fxp32"
    FXP16 = "fxp16"


_FXP_STATE = {BackendKind.FXP32: S16_15, BackendKind.FXP16: S8_7}
_FXP_UFRAC = {BackendKind.FXP32: U0_32, BackendKind.FXP16: U0_16}
_FXP_SFRAC = {BackendKind.FXP32: S0_31, BackendKind.FXP16: S0_15}


@dataclasses.dataclass(frozen=True)
class Backend:
    """A number system plus its constant-encoding policy.

    stochastic_constants: re-draw each constant every step, choosing
    the floor or ceiling grid neighbour with probability equal to the
    fractional residual (an unbiased dither on the constant table).

    float32_constants: squash every constant through IEEE single
    before encoding, so all backends share the 23-bit-significand
    constant values.
    """

    kind: BackendKind
    rounding: RoundingSpec | None = None
    stochastic_constants: bool = False
    float32_constants: bool = False

    def __post_init__(self) -> None:
        if self.is_fixed:
            if self.rounding is None:
                raise ValueError(f"{self.kind.value} backend needs a rounding spec")
        elif self.rounding is not None:
            raise ValueError(f"{self.kind.value} backend takes no rounding spec")
        if self.stochastic_constants and not self.is_fixed:
            raise ValueError("stochastic constant selection is a fixed-point policy")

    @property
    def is_fixed(self) -> bool:
        return self.kind in (BackendKind.FXP32, BackendKind.FXP16)

    @property
    def state_format(self) -> FixedFormat:
        if not self.is_fixed:
            raise ValueError("floating backends have no fixed state format")
        return _FXP_STATE[self.kind]

    @property
    def label(self) -> str:
        if not self.is_fixed:
            return self.kind.value
        spec = self.rounding
        if spec.mode is RoundingMode.SR:
            tag = "sr" if spec.sr_bits == 32 else f"sr{spec.sr_bits}"
        else:
            tag = spec.mode.value
        return f"{self.kind.value}:{tag}"

    @classmethod
    def parse(cls, label: str) -> "Backend":
        """Inverse of .label, e.g. 'double', 'fxp32:rn', 'fxp16:sr4'."""
        label = label.strip().lower()
        if label in ("double", "float64"):
            return cls(BackendKind.DOUBLE)
        if label in ("float", "single", "float32"):
            return cls(BackendKind.SINGLE)
        m = re.fullmatch(r"(fxp32|fxp16):(rd|rn|sr(\d+)?)", label)
        if not m:
            raise ValueError(f"unknown backend label: {label!r}")
        kind = BackendKind(m.group(1))
        if m.group(2).startswith("sr"):
            bits = int(m.group(3)) if m.group(3) else 32
            spec = RoundingSpec(RoundingMode.SR, sr_bits=bits)
        else:
            spec = RoundingSpec(RoundingMode(m.group(2)))
        return cls(kind, spec)


DOUBLE = Backend(BackendKind.DOUBLE)
SINGLE = Backend(BackendKind.SINGLE)


def _effective_value(backend: Backend, value: Fraction) -> Fraction:
    if backend.float32_constants:
        return Fraction(float(np.float32(float(value))))
    return value


def _const_format(backend: Backend, value: Fraction, additive: bool,
                  grid: int) -> FixedFormat:
    if additive:
        # Must share the raw scale of the register it is added to.
        return _FXP_SFRAC[backend.kind] if grid == GRID_FRAC \
            else _FXP_STATE[backend.kind]
    if abs(value) >= 1:
        return _FXP_STATE[backend.kind]
    if value >= 0:
        return _FXP_UFRAC[backend.kind]
    return _FXP_SFRAC[backend.kind]


@dataclasses.dataclass(frozen=True)
class FixedTables:
    """Raw-integer encoding of one program for one fixed-point backend.

    c_lo/c_hi are the floor/ceiling grid raws of each constant and
    c_prob the ceiling-selection probability in units of 2^-32; with
    deterministic constants c_lo holds the round-to-nearest raw and
    c_prob is all zero.  op_dbits/op_rmin/op_rmax give, per instruction,
    the multiply discard width and the saturation bounds of the
    destination register's format.
    """

    ops: np.ndarray          # (n_ops, 4) int64
    c_lo: np.ndarray         # int64
    c_hi: np.ndarray         # int64
    c_prob: np.ndarray       # uint64, compare against a fresh u32 draw
    op_dbits: np.ndarray     # int64, 0 for add/sub
    op_rmin: np.ndarray      # int64
    op_rmax: np.ndarray      # int64
    n_regs: int
    out_v: int
    out_u: int
    frac_bits: int           # state grid fraction length
    raw_min: int             # state grid bounds
    raw_max: int


def ops_array(program: EsrProgram) -> np.ndarray:
    return np.array(program.ops, dtype=np.int64).reshape(len(program.ops), 4)


def build_fixed_tables(program: EsrProgram, backend: Backend) -> FixedTables:
    if not backend.is_fixed:
        raise ValueError("build_fixed_tables needs a fixed-point backend")
    state = backend.state_format
    frac = _FXP_SFRAC[backend.kind]

    n = len(program.consts)
    c_lo = np.zeros(n, dtype=np.int64)
    c_hi = np.zeros(n, dtype=np.int64)
    c_prob = np.zeros(n, dtype=np.uint64)
    c_fbits = [0] * n
    for i, spec in enumerate(program.consts):
        value = _effective_value(backend, spec.value)
        fmt = _const_format(backend, value, spec.additive, spec.grid)
        c_fbits[i] = fmt.frac_bits
        scaled = value * (1 << fmt.frac_bits)
        lo = scaled.numerator // scaled.denominator
        residual = scaled - lo
        lo_s = fmt.saturate(lo)
        hi_s = fmt.saturate(lo + 1)
        if backend.stochastic_constants and residual != 0 and lo_s == lo and hi_s == lo + 1:
            c_lo[i] = lo_s
            c_hi[i] = hi_s
            c_prob[i] = (residual.numerator * (1 << 32)) // residual.denominator
        else:
            nearest = lo + 1 if residual * 2 >= 1 else lo
            c_lo[i] = c_hi[i] = fmt.saturate(nearest)

    def reg_fbits(r: int) -> int:
        return frac.frac_bits if program.reg_grids[r] == GRID_FRAC \
            else state.frac_bits

    n_ops = len(program.ops)
    op_dbits = np.zeros(n_ops, dtype=np.int64)
    op_rmin = np.zeros(n_ops, dtype=np.int64)
    op_rmax = np.zeros(n_ops, dtype=np.int64)
    for j, (opcode, a1, a2, dest) in enumerate(program.ops):
        out_fmt = frac if program.op_grids[j] == GRID_FRAC else state
        op_rmin[j] = out_fmt.raw_min
        op_rmax[j] = out_fmt.raw_max
        if opcode == MULC:
            d = c_fbits[a1] + reg_fbits(a2) - out_fmt.frac_bits
        elif opcode == MULR:
            d = reg_fbits(a1) + reg_fbits(a2) - out_fmt.frac_bits
        else:
            d = 0
        if opcode in (MULC, MULR) and d < 1:
            raise ValueError("multiply must discard at least one bit")
        op_dbits[j] = d

    return FixedTables(
        ops=ops_array(program),
        c_lo=c_lo,
        c_hi=c_hi,
        c_prob=c_prob,
        op_dbits=op_dbits,
        op_rmin=op_rmin,
        op_rmax=op_rmax,
        n_regs=program.n_regs,
        out_v=program.out_v,
        out_u=program.out_u,
        frac_bits=state.frac_bits,
        raw_min=state.raw_min,
        raw_max=state.raw_max,
    )


def build_float_consts(program: EsrProgram, backend: Backend) -> np.ndarray:
    if backend.is_fixed:
        raise ValueError("build_float_consts needs a floating backend")
    vals = [float(_effective_value(backend, c.value)) for c in program.consts]
    dtype = np.float64 if backend.kind is BackendKind.DOUBLE else np.float32
    return np.array(vals, dtype=dtype)


def eval_fixed_reference(program: EsrProgram, tables: FixedTables,
                         spec: RoundingSpec, stream: RandomStream | None,
                         v_raw: int, u_raw: int, i_raw: int,
                         ) -> tuple[int, int]:
    """One solver step on raw integers via the pure-Python kernels.

    Slow validation path; the simulation loop uses the compiled
    interpreter in ``_kernels`` and must agree with this bit for bit.
    """
    regs = [0] * tables.n_regs
    regs[0], regs[1], regs[2] = v_raw, u_raw, i_raw
    for j, (opcode, a1, a2, dest) in enumerate(program.ops):
        if opcode == MULC:
            q = round_raw(int(tables.c_lo[a1]) * regs[a2],
                          int(tables.op_dbits[j]), spec, stream)
        elif opcode == MULR:
            q = round_raw(regs[a1] * regs[a2], int(tables.op_dbits[j]),
                          spec, stream)
        elif opcode == ADD:
            q = regs[a1] + regs[a2]
        elif opcode == SUB:
            q = regs[a1] - regs[a2]
        else:
            q = int(tables.c_lo[a1]) + regs[a2]
        regs[dest] = min(max(q, int(tables.op_rmin[j])), int(tables.op_rmax[j]))
    return regs[tables.out_v], regs[tables.out_u]
