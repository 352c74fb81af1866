"""Counter-based random numbers.

Every random draw is a pure function of ``(key, counter)`` through the
SplitMix64 finalizer, so a Monte Carlo stream can be replayed from its index
alone and any partition of the streams across threads gives the same numbers.

Stream ``i`` of a run seeded with ``seed`` uses the key
``mix(mix(seed) + (i + 1) * GOLDEN)``; its ``n``-th draw is
``mix(key + (n + 1) * GOLDEN)``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numba as nb
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_TWO_M53 = 1.0 / 9007199254740992.0

# Domain tags keep environment draws and walker draws from sharing keys.
DOMAIN_ENVIRONMENT = 0x454E5649524F4E4D
DOMAIN_MARKOV_FORWARD = 0x4D4B5646574152
DOMAIN_MARKOV_BACKWARD = 0x4D4B5642574152
DOMAIN_PHASE = 0x5048415345
DOMAIN_STREAMS = 0x53545245414D53

DEFAULT_CHUNK = 2048


def _as_u64(value: int) -> np.uint64:
    return np.uint64(int(value) & 0xFFFFFFFFFFFFFFFF)


# -- numpy (vectorised) versions --------------------------------------------

def mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer on a uint64 array (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def derive_key(seed: int, domain: int) -> np.uint64:
    """Key for one named use of a master seed."""
    with np.errstate(over="ignore"):
        z = mix64(np.array([_as_u64(seed)], dtype=np.uint64))[0]
        z = mix64(np.array([z ^ _as_u64(domain)], dtype=np.uint64))[0]
    return np.uint64(z)


def hash_uniform(key: np.uint64, counters: np.ndarray) -> np.ndarray:
    """Uniforms in the open interval (0, 1) for signed integer counters."""
    c = np.asarray(counters, dtype=np.int64).astype(np.uint64)
    with np.errstate(over="ignore"):
        z = mix64(np.uint64(key) + (c + _ONE) * GOLDEN)
    return ((z >> _S11).astype(np.float64) + 0.5) * _TWO_M53


def stream_keys(seed: int, indices: np.ndarray) -> np.ndarray:
    """Per-stream keys ``hash(master seed, stream index)``."""
    base = derive_key(seed, DOMAIN_STREAMS)
    idx = np.asarray(indices, dtype=np.int64).astype(np.uint64)
    with np.errstate(over="ignore"):
        return mix64(base + (idx + _ONE) * GOLDEN)


# -- numba versions for the compiled kernels --------------------------------

@nb.njit(inline="always", cache=True)
def nb_mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@nb.njit(inline="always", cache=True)
def nb_stream_key(base, index):
    return nb_mix64(base + (np.uint64(index) + _ONE) * GOLDEN)


@nb.njit(inline="always", cache=True)
def nb_uniform(key, counter):
    z = nb_mix64(key + (np.uint64(counter) + _ONE) * GOLDEN)
    return (np.float64(z >> _S11) + 0.5) * _TWO_M53


@nb.njit(inline="always", cache=True)
def nb_normal_pair(key, counter):
    """Two independent standard normals by Marsaglia's polar method.

    Consumes uniform draws ``counter, counter + 1, ...`` and returns the
    counter of the next unused draw, so a stream stays a pure function of
    its key.
    """
    while True:
        v1 = 2.0 * nb_uniform(key, counter) - 1.0
        v2 = 2.0 * nb_uniform(key, counter + 1) - 1.0
        counter += 2
        r2 = v1 * v1 + v2 * v2
        if 0.0 < r2 < 1.0:
            f = np.sqrt(-2.0 * np.log(r2) / r2)
            return v1 * f, v2 * f, counter


# -- stream partitioning -----------------------------------------------------

def run_chunked(
    work: Callable[[int, int], object],
    n_streams: int,
    threads: int = 1,
    chunk: int = DEFAULT_CHUNK,
) -> list:
    """Call ``work(start, count)`` over fixed-size blocks of stream indices.

    Block boundaries do not depend on ``threads``; results come back in
    stream order so downstream reductions are identical for any thread count.
    """
    blocks = [(s, min(chunk, n_streams - s)) for s in range(0, n_streams, chunk)]
    if threads <= 1 or len(blocks) <= 1:
        return [work(s, c) for s, c in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda b: work(*b), blocks))
