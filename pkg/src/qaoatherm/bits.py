"""Bit-level helpers shared by the simulator and analysis code.

Convention used everywhere: configuration integer x encodes spin i in bit i
(bit 0 least significant), and spin values are s_i = 2*bit_i(x) - 1.
"""

import numpy as np

_BYTE_POPCOUNT = np.unpackbits(np.arange(256, dtype=np.uint8)[:, None], axis=1).sum(axis=1)

_HAS_BITWISE_COUNT = hasattr(np, "bitwise_count")


def popcount(x):
    """Number of set bits, elementwise, for a non-negative integer array."""
    x = np.asarray(x, dtype=np.uint64)
    if _HAS_BITWISE_COUNT:
        return np.bitwise_count(x).astype(np.int64)
    out = np.zeros(x.shape, dtype=np.int64)
    v = x.copy()
    for _ in range(8):
        out += _BYTE_POPCOUNT[(v & np.uint64(0xFF)).astype(np.uint8)]
        v >>= np.uint64(8)
    return out


def all_configurations(n):
    """Integers 0 .. 2**n - 1 as uint64."""
    return np.arange(1 << n, dtype=np.uint64)


def hamming_to_all(x, n):
    """Hamming distance from configuration x to every configuration 0..2**n-1."""
    return popcount(all_configurations(n) ^ np.uint64(x))


def spins_of(x, n):
    """Spin vector (+-1 floats) of a single configuration integer."""
    return ((np.uint64(x) >> np.arange(n, dtype=np.uint64)) & np.uint64(1)).astype(float) * 2.0 - 1.0


def spin_blocks(n, chunk=1 << 16):
    """Yield (start, spins) blocks covering all 2**n configurations.

    spins has shape (block, n) with +-1 float entries; chunking bounds peak
    memory for large n.
    """
    total = 1 << n
    shifts = np.arange(n, dtype=np.uint64)
    for start in range(0, total, chunk):
        xs = np.arange(start, min(start + chunk, total), dtype=np.uint64)
        bits = (xs[:, None] >> shifts[None, :]) & np.uint64(1)
        yield start, bits.astype(np.float64) * 2.0 - 1.0
