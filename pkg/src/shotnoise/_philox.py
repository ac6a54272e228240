"""Philox4x64-10 counter-based generator usable from nopython code.

Each replicate owns a stream keyed by ``(seed, replicate)``.  The raw output
of a stream is bit-identical to ``numpy.random.Philox(key=seed + (replicate << 64))``
so any stream can be inspected from plain numpy.
"""

import numpy as np
from numba import njit

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_MASK32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_ZERO = np.uint64(0)
_TWO_M53 = 1.0 / 9007199254740992.0

# state layout: counter[0:4], key[4:6], buffer[6:10], buffer position at 10
STATE_SIZE = 11


@njit(cache=True, inline="always")
def _mulhilo(a, b):
    lo = a * b
    a_lo = a & _MASK32
    a_hi = a >> _S32
    b_lo = b & _MASK32
    b_hi = b >> _S32
    ll = a_lo * b_lo
    lh = a_lo * b_hi
    hl = a_hi * b_lo
    hh = a_hi * b_hi
    mid = (ll >> _S32) + (lh & _MASK32) + (hl & _MASK32)
    hi = hh + (lh >> _S32) + (hl >> _S32) + (mid >> _S32)
    return hi, lo


@njit(cache=True)
def _block(state):
    c0 = state[0]
    c1 = state[1]
    c2 = state[2]
    c3 = state[3]
    k0 = state[4]
    k1 = state[5]
    for i in range(10):
        if i > 0:
            k0 = k0 + _W0
            k1 = k1 + _W1
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
    state[6] = c0
    state[7] = c1
    state[8] = c2
    state[9] = c3


@njit(cache=True)
def seed_state(state, seed, replicate):
    """Reset ``state`` to the start of stream ``(seed, replicate)``."""
    for i in range(4):
        state[i] = _ZERO
    state[4] = seed
    state[5] = replicate
    state[10] = np.uint64(4)


@njit(cache=True)
def next_raw(state):
    pos = state[10]
    if pos >= np.uint64(4):
        state[0] = state[0] + _ONE
        if state[0] == _ZERO:
            state[1] = state[1] + _ONE
            if state[1] == _ZERO:
                state[2] = state[2] + _ONE
                if state[2] == _ZERO:
                    state[3] = state[3] + _ONE
        _block(state)
        pos = _ZERO
    out = state[6 + np.int64(pos)]
    state[10] = pos + _ONE
    return out


@njit(cache=True)
def next_open_uniform(state):
    """Uniform on the open interval (0, 1)."""
    return (np.float64(next_raw(state) >> _S11) + 0.5) * _TWO_M53


@njit(cache=True)
def next_exponential(state):
    """Unit-rate exponential draw, strictly positive."""
    return -np.log(next_open_uniform(state))


def new_state():
    return np.zeros(STATE_SIZE, dtype=np.uint64)


def numpy_stream(seed, replicate=0):
    """The numpy ``Generator`` whose bit stream matches stream ``(seed, replicate)``."""
    seed = int(seed) % 2**64
    return np.random.Generator(np.random.Philox(key=seed + (int(replicate) << 64)))
