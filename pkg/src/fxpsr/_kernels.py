"""Compiled inner loops: PRNG steps, rounding, and the step-program
interpreters for fixed-point and floating-point backends.

These mirror the pure-Python implementations in ``rng``, ``rounding``
and ``esr`` bit for bit; the test suite asserts the equivalence.  All
fixed-point arithmetic stays within int64 (32-bit words, 64-bit
intermediates).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

KIND_KISS99 = 0
KIND_LFSR33 = 1
KIND_RANQD1 = 2

MODE_RD = 0
MODE_RN = 1
MODE_SR = 2

_U64 = np.uint64
_M32 = _U64(0xFFFFFFFF)
_M33 = _U64(0x1FFFFFFFF)
_M16 = _U64(0xFFFF)

# State array layout: slots 0..3 generator words, slot 4 draw counter.
STATE_LEN = 5


@njit(cache=True)
def next_u32(kind, st):
    """Advance the stream one word; returns the word as uint64."""
    st[4] += _U64(1)
    if kind == KIND_KISS99:
        z = (_U64(36969) * (st[0] & _M16) + (st[0] >> _U64(16))) & _M32
        w = (_U64(18000) * (st[1] & _M16) + (st[1] >> _U64(16))) & _M32
        mwc = ((z << _U64(16)) + w) & _M32
        jsr = st[2]
        jsr = (jsr ^ ((jsr << _U64(17)) & _M32)) & _M32
        jsr = jsr ^ (jsr >> _U64(13))
        jsr = (jsr ^ ((jsr << _U64(5)) & _M32)) & _M32
        jcong = (_U64(69069) * st[3] + _U64(1234567)) & _M32
        st[0], st[1], st[2], st[3] = z, w, jsr, jcong
        return ((mwc ^ jcong) + jsr) & _M32
    if kind == KIND_LFSR33:
        reg = st[0]
        out = _U64(0)
        for _ in range(32):
            bit = ((reg >> _U64(32)) ^ (reg >> _U64(19))) & _U64(1)
            reg = ((reg << _U64(1)) | bit) & _M33
            out = ((out << _U64(1)) | bit) & _M32
        st[0] = reg
        return out
    x = (_U64(1664525) * st[0] + _U64(1013904223)) & _M32
    st[0] = x
    return x


@njit(cache=True)
def generate_u32(kind, st, n):
    out = np.empty(n, dtype=np.uint32)
    for i in range(n):
        out[i] = next_u32(kind, st)
    return out


@njit(cache=True)
def round_q(x, d, mode, sr_bits, kind, st):
    """Round an int64 intermediate, discarding d (>= 1) bottom bits."""
    if mode == MODE_RD:
        return x >> d
    if mode == MODE_RN:
        return (x + (np.int64(1) << (d - 1))) >> d
    k = sr_bits if sr_bits < d else d
    draw = np.int64(next_u32(kind, st) >> _U64(32 - k))
    residual = x & ((np.int64(1) << d) - 1)
    r_top = residual >> (d - k)
    q = x >> d
    if draw < r_top:
        q += 1
    return q


@njit(cache=True)
def sr_up_count(x, d, sr_bits, kind, st, n):
    """Count round-ups of SR applied n times to the same intermediate."""
    base = x >> d
    ups = 0
    for _ in range(n):
        if round_q(x, d, MODE_SR, sr_bits, kind, st) != base:
            ups += 1
    return ups


@njit(cache=True)
def _eval_fixed(ops, c_raw, op_dbits, op_rmin, op_rmax, regs,
                mode, sr_bits, kind, st, sat_count):
    for j in range(ops.shape[0]):
        opc = ops[j, 0]
        a1 = ops[j, 1]
        a2 = ops[j, 2]
        if opc == 0:  # MULC
            q = round_q(c_raw[a1] * regs[a2], op_dbits[j], mode, sr_bits, kind, st)
        elif opc == 1:  # MULR
            q = round_q(regs[a1] * regs[a2], op_dbits[j], mode, sr_bits, kind, st)
        elif opc == 2:  # ADD
            q = regs[a1] + regs[a2]
        elif opc == 3:  # SUB
            q = regs[a1] - regs[a2]
        else:  # ADDC
            q = c_raw[a1] + regs[a2]
        if q > op_rmax[j]:
            q = op_rmax[j]
            sat_count[0] += 1
        elif q < op_rmin[j]:
            q = op_rmin[j]
            sat_count[0] += 1
        regs[ops[j, 3]] = q


@njit(cache=True)
def _eval_float(ops, consts, regs):
    for j in range(ops.shape[0]):
        opc = ops[j, 0]
        a1 = ops[j, 1]
        a2 = ops[j, 2]
        if opc == 0:
            regs[ops[j, 3]] = consts[a1] * regs[a2]
        elif opc == 1:
            regs[ops[j, 3]] = regs[a1] * regs[a2]
        elif opc == 2:
            regs[ops[j, 3]] = regs[a1] + regs[a2]
        elif opc == 3:
            regs[ops[j, 3]] = regs[a1] - regs[a2]
        else:
            regs[ops[j, 3]] = consts[a1] + regs[a2]


@njit(cache=True)
def _gaussian(kind, st):
    u1 = (np.float64(next_u32(kind, st)) + 1.0) * 2.0**-32  # (0, 1]
    u2 = np.float64(next_u32(kind, st)) * 2.0**-32
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


@njit(cache=True)
def sim_fixed(ops, n_regs, out_v, out_u,
              c_lo, c_hi, c_prob, op_dbits, op_rmin, op_rmax, stoch_consts,
              pf, raw_min, raw_max, mode, sr_bits, kind, st,
              v0_raw, u0_raw, i_dc_raw, i_sched, has_sched, dither_sd,
              n_steps, thr_raw, reset_v_raw, incr_u_raw,
              spike_steps, stop_spikes, trace_v, trace_u, record_trace,
              sat_count):
    """Run n_steps of one fixed-point backend; returns (n_spikes, steps_run).

    Spike steps are recorded 1-based (the step whose post-update v
    crossed threshold).  Stops early once stop_spikes spikes are seen
    (0 disables).  Dither and the input schedule are evaluated in
    double precision and converted to the state grid round-to-nearest.
    """
    regs = np.zeros(n_regs, dtype=np.int64)
    c_raw = np.empty(c_lo.shape[0], dtype=np.int64)
    for i in range(c_lo.shape[0]):
        c_raw[i] = c_lo[i]
    scale = np.float64(np.int64(1) << pf)
    v = v0_raw
    u = u0_raw
    n_spikes = 0
    step = 0
    while step < n_steps:
        if stoch_consts == 1:
            for i in range(c_lo.shape[0]):
                if next_u32(kind, st) < c_prob[i]:
                    c_raw[i] = c_hi[i]
                else:
                    c_raw[i] = c_lo[i]
        i_raw = i_dc_raw
        if has_sched == 1:
            i_raw = np.int64(math.floor(i_sched[step] * scale + 0.5))
        if dither_sd > 0.0:
            i_raw += np.int64(math.floor(_gaussian(kind, st) * dither_sd * scale + 0.5))
        if i_raw > raw_max:
            i_raw = raw_max
        elif i_raw < raw_min:
            i_raw = raw_min
        regs[0] = v
        regs[1] = u
        regs[2] = i_raw
        _eval_fixed(ops, c_raw, op_dbits, op_rmin, op_rmax, regs,
                    mode, sr_bits, kind, st, sat_count)
        v = regs[out_v]
        u = regs[out_u]
        step += 1
        if record_trace == 1:
            vl = v if v < thr_raw else thr_raw
            trace_v[step - 1] = np.float64(vl) / scale
            trace_u[step - 1] = np.float64(u) / scale
        if v >= thr_raw:
            if n_spikes < spike_steps.shape[0]:
                spike_steps[n_spikes] = step
            n_spikes += 1
            v = reset_v_raw
            u += incr_u_raw
            if u > raw_max:
                u = raw_max
                sat_count[0] += 1
            elif u < raw_min:
                u = raw_min
                sat_count[0] += 1
            if stop_spikes > 0 and n_spikes >= stop_spikes:
                break
    return n_spikes, step


@njit(cache=True)
def sim_f64(ops, n_regs, out_v, out_u, consts,
            kind, st, v0, u0, i_dc, i_sched, has_sched, dither_sd,
            n_steps, thr, reset_v, incr_u,
            spike_steps, stop_spikes, trace_v, trace_u, record_trace):
    regs = np.zeros(n_regs, dtype=np.float64)
    v = v0
    u = u0
    n_spikes = 0
    step = 0
    while step < n_steps:
        i_t = i_dc
        if has_sched == 1:
            i_t = i_sched[step]
        if dither_sd > 0.0:
            i_t = i_t + _gaussian(kind, st) * dither_sd
        regs[0] = v
        regs[1] = u
        regs[2] = i_t
        _eval_float(ops, consts, regs)
        v = regs[out_v]
        u = regs[out_u]
        step += 1
        if record_trace == 1:
            trace_v[step - 1] = v if v < thr else thr
            trace_u[step - 1] = u
        if v >= thr:
            if n_spikes < spike_steps.shape[0]:
                spike_steps[n_spikes] = step
            n_spikes += 1
            v = reset_v
            u = u + incr_u
            if stop_spikes > 0 and n_spikes >= stop_spikes:
                break
    return n_spikes, step


@njit(cache=True)
def sim_f32(ops, n_regs, out_v, out_u, consts,
            kind, st, v0, u0, i_dc, i_sched, has_sched, dither_sd,
            n_steps, thr, reset_v, incr_u,
            spike_steps, stop_spikes, trace_v, trace_u, record_trace):
    # Same loop as sim_f64 with float32 state; the input signal is
    # formed in double and converted (dither is an input property).
    regs = np.zeros(n_regs, dtype=np.float32)
    v = v0
    u = u0
    n_spikes = 0
    step = 0
    while step < n_steps:
        i_ref = np.float64(i_dc)
        if has_sched == 1:
            i_ref = i_sched[step]
        if dither_sd > 0.0:
            i_ref = i_ref + _gaussian(kind, st) * dither_sd
        regs[0] = v
        regs[1] = u
        regs[2] = np.float32(i_ref)
        _eval_float(ops, consts, regs)
        v = regs[out_v]
        u = regs[out_u]
        step += 1
        if record_trace == 1:
            trace_v[step - 1] = np.float64(v if v < thr else thr)
            trace_u[step - 1] = np.float64(u)
        if v >= thr:
            if n_spikes < spike_steps.shape[0]:
                spike_steps[n_spikes] = step
            n_spikes += 1
            v = reset_v
            u = u + incr_u
            if stop_spikes > 0 and n_spikes >= stop_spikes:
                break
    return n_spikes, step
