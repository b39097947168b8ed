"""Compiled kernels for coalescing random-walk estimation.

Hot path packs a d<=3 lattice vector into one int64 (three 21-bit lanes,
each biased by 2^20) so a walk step is a single add and a coincidence
test a single compare.  The packing is exact while every lane stays in
[0, 2^21); callers guarantee horizon * kernel_range < 2^20.  A generic
array-of-coordinates fallback covers the remaining cases and doubles as
a cross-check implementation.

Per-sample RNG substreams: sample s runs a splitmix64 counter started at
mix64(seed ^ mix64((s+1)*GOLD)), so any sample range reproduces the same
values regardless of batching.

Kernel steps come from a Walker alias table consuming one 64-bit draw
per event: high 32 bits select the column (fixed-point multiply, bias
O(2^-32)), low 32 bits decide column vs. alias.  The two-line table
lookup is written out inside every loop on purpose — hoisting it into a
helper function defeats the optimizer (~9x slower) because of the
data-dependent branch.
"""
from __future__ import annotations

import numpy as np
from numba import int64, njit, uint64

GOLD = np.uint64(0x9E3779B97F4A7C15)
_U32 = np.uint64(32)
_M32 = np.uint64(0xFFFFFFFF)
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
LANE_BIAS = np.int64((1 << 20) | (1 << 41) | (1 << 62))
MAX_LANE_DRIFT = 1 << 20


@njit(inline="always")
def _mix64(z):
    z = (z ^ (z >> _S30)) * _C1
    z = (z ^ (z >> _S27)) * _C2
    return z ^ (z >> _S31)


@njit(inline="always")
def _stream_init(seed, sample):
    return _mix64(seed ^ _mix64((sample + np.uint64(1)) * GOLD))


@njit(cache=True)
def pair_escape_packed(seed, nsamples, horizon, steps, thresh, alias, ndraws):
    """Count samples whose difference walk avoids the origin up to the horizon.

    Start = sum of ndraws kernel draws; each event is one kernel step of
    the difference walk.  A coincident start counts as absorbed.
    """
    k = uint64(len(steps))
    escapes = 0
    for s in range(nsamples):
        st = _stream_init(seed, uint64(s))
        x = LANE_BIAS
        for _ in range(ndraws):
            st += GOLD
            u = _mix64(st)
            j = int64((u >> _U32) * k >> _U32)
            if (u & _M32) >= thresh[j]:
                j = alias[j]
            x += steps[j]
        if x == LANE_BIAS:
            continue
        alive = True
        for _ in range(horizon):
            st += GOLD
            u = _mix64(st)
            j = int64((u >> _U32) * k >> _U32)
            if (u & _M32) >= thresh[j]:
                j = alias[j]
            x += steps[j]
            if x == LANE_BIAS:
                alive = False
                break
        if alive:
            escapes += 1
    return escapes


@njit(cache=True)
def triple_classes_packed(seed, nsamples, horizon, steps, thresh, alias,
                          d12_delta, d13_delta, thresh3, alias3, mode):
    """Partition-class counts for three coalescing walks (jump chain).

    mode 0: starts 0, v1, v1+v2.  mode 1: starts v1, v2, v2+v3.
    Returns int64[5]: (all apart, {12}, {13}, {23}, all together); the
    index doubles as the internal state id.  An event moves one
    surviving cluster (uniformly chosen) by one kernel step; the horizon
    counts events across both phases.
    """
    k = uint64(len(steps))
    k3 = uint64(len(d12_delta))
    counts = np.zeros(5, np.int64)
    for s in range(nsamples):
        st = _stream_init(seed, uint64(s))
        st += GOLD
        u = _mix64(st)
        j = int64((u >> _U32) * k >> _U32)
        if (u & _M32) >= thresh[j]:
            j = alias[j]
        a = steps[j]
        st += GOLD
        u = _mix64(st)
        j = int64((u >> _U32) * k >> _U32)
        if (u & _M32) >= thresh[j]:
            j = alias[j]
        b = steps[j]
        if mode == 0:
            d12 = LANE_BIAS + a
            d13 = LANE_BIAS + a + b
        else:
            st += GOLD
            u = _mix64(st)
            j = int64((u >> _U32) * k >> _U32)
            if (u & _M32) >= thresh[j]:
                j = alias[j]
            d12 = LANE_BIAS + b - a
            d13 = LANE_BIAS + b + steps[j] - a
        state = 0
        e = int64(0)
        if d12 == LANE_BIAS:
            state, e = 1, d13
        elif d13 == LANE_BIAS:
            state, e = 2, d12
        elif d12 == d13:
            state, e = 3, d12
        ev = 0
        while ev < horizon and state != 4:
            st += GOLD
            u = _mix64(st)
            if state == 0:
                j = int64((u >> _U32) * k3 >> _U32)
                if (u & _M32) >= thresh3[j]:
                    j = alias3[j]
                d12 += d12_delta[j]
                d13 += d13_delta[j]
                if d12 == LANE_BIAS:
                    state, e = 1, d13
                elif d13 == LANE_BIAS:
                    state, e = 2, d12
                elif d12 == d13:
                    state, e = 3, d12
            else:
                j = int64((u >> _U32) * k >> _U32)
                if (u & _M32) >= thresh[j]:
                    j = alias[j]
                e += steps[j]
                if e == LANE_BIAS:
                    state = 4
            ev += 1
        counts[state] += 1
    return counts


# ---------------------------------------------------------------------------
# generic-dimension fallbacks (slower; also the cross-check implementation)


@njit(inline="always")
def _is_zero(v):
    for i in range(v.shape[0]):
        if v[i] != 0:
            return False
    return True


@njit(inline="always")
def _equal(v, w):
    for i in range(v.shape[0]):
        if v[i] != w[i]:
            return False
    return True


@njit(cache=True)
def pair_escape_generic(seed, nsamples, horizon, offs, thresh, alias, ndraws):
    k = uint64(offs.shape[0])
    dim = offs.shape[1]
    x = np.zeros(dim, np.int64)
    escapes = 0
    for s in range(nsamples):
        st = _stream_init(seed, uint64(s))
        x[:] = 0
        for _ in range(ndraws):
            st += GOLD
            u = _mix64(st)
            j = int64((u >> _U32) * k >> _U32)
            if (u & _M32) >= thresh[j]:
                j = alias[j]
            for i in range(dim):
                x[i] += offs[j, i]
        if _is_zero(x):
            continue
        alive = True
        for _ in range(horizon):
            st += GOLD
            u = _mix64(st)
            j = int64((u >> _U32) * k >> _U32)
            if (u & _M32) >= thresh[j]:
                j = alias[j]
            for i in range(dim):
                x[i] += offs[j, i]
            if _is_zero(x):
                alive = False
                break
        if alive:
            escapes += 1
    return escapes


@njit(cache=True)
def triple_classes_generic(seed, nsamples, horizon, offs, thresh, alias,
                           thresh3, alias3, mode):
    k = uint64(offs.shape[0])
    kk = offs.shape[0]
    k3 = uint64(3 * kk)
    dim = offs.shape[1]
    counts = np.zeros(5, np.int64)
    d12 = np.zeros(dim, np.int64)
    d13 = np.zeros(dim, np.int64)
    e = np.zeros(dim, np.int64)
    for s in range(nsamples):
        st = _stream_init(seed, uint64(s))
        st += GOLD
        u = _mix64(st)
        ja = int64((u >> _U32) * k >> _U32)
        if (u & _M32) >= thresh[ja]:
            ja = alias[ja]
        st += GOLD
        u = _mix64(st)
        jb = int64((u >> _U32) * k >> _U32)
        if (u & _M32) >= thresh[jb]:
            jb = alias[jb]
        if mode == 0:
            for i in range(dim):
                d12[i] = offs[ja, i]
                d13[i] = offs[ja, i] + offs[jb, i]
        else:
            st += GOLD
            u = _mix64(st)
            jc = int64((u >> _U32) * k >> _U32)
            if (u & _M32) >= thresh[jc]:
                jc = alias[jc]
            for i in range(dim):
                d12[i] = offs[jb, i] - offs[ja, i]
                d13[i] = offs[jb, i] + offs[jc, i] - offs[ja, i]
        state = 0
        if _is_zero(d12):
            state = 1
            e[:] = d13
        elif _is_zero(d13):
            state = 2
            e[:] = d12
        elif _equal(d12, d13):
            state = 3
            e[:] = d12
        ev = 0
        while ev < horizon and state != 4:
            st += GOLD
            u = _mix64(st)
            if state == 0:
                j3 = int64((u >> _U32) * k3 >> _U32)
                if (u & _M32) >= thresh3[j3]:
                    j3 = alias3[j3]
                w = j3 // kk
                j = j3 % kk
                if w == 0:  # walker 1 moves: both differences shift back
                    for i in range(dim):
                        d12[i] -= offs[j, i]
                        d13[i] -= offs[j, i]
                elif w == 1:
                    for i in range(dim):
                        d12[i] += offs[j, i]
                else:
                    for i in range(dim):
                        d13[i] += offs[j, i]
                if _is_zero(d12):
                    state = 1
                    e[:] = d13
                elif _is_zero(d13):
                    state = 2
                    e[:] = d12
                elif _equal(d12, d13):
                    state = 3
                    e[:] = d12
            else:
                j = int64((u >> _U32) * k >> _U32)
                if (u & _M32) >= thresh[j]:
                    j = alias[j]
                for i in range(dim):
                    e[i] += offs[j, i]
                if _is_zero(e):
                    state = 4
            ev += 1
        counts[state] += 1
    return counts
