"""Counter-based random streams keyed by (seed, replica, purpose, site, counter).

Every random quantity in the simulators is a pure function of a 64-bit key
chain, so a site's randomness never depends on the region it is embedded in,
on the number of worker processes, or on how many other sites were sampled
before it.  That is what makes the couplings exact: the same site sees the
same birth/ignition times in a small box, in a big box, in the optimized
engine and in the naive reference engine.

Two layers:

* splitmix64-style avalanche mixing (``mix64``) for per-site event streams,
  with vectorized numpy equivalents used to fill whole regions at once;
* numpy ``Philox`` bulk generators (counter-based as well) for Monte Carlo
  estimators that just need a lot of i.i.d. variates fast.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

# stream purposes; distinct tags make e.g. birth and ignition times at the
# same site independent
BIRTH = 0x42495254
IGNITE = 0x49474E54
BERNOULLI = 0x4245524E
HOLE_FLAG = 0x484F4C46
HOLE_RADIUS = 0x484F4C52
ESTIMATOR = 0x45535449
TAU = 0x54415530


def splitmix64(x: int) -> int:
    """One splitmix64 output step on a 64-bit state."""
    x = (x + _GAMMA) & _MASK
    x = ((x ^ (x >> 30)) * _M1) & _MASK
    x = ((x ^ (x >> 27)) * _M2) & _MASK
    return x ^ (x >> 31)


def mix64(*parts: int) -> int:
    """Fold any number of integers (negative allowed) into one 64-bit hash."""
    h = 0x9E3779B97F4A7C15
    for p in parts:
        h = splitmix64((h ^ (p & _MASK)) & _MASK)
    return h


def replica_seed(root_seed: int, replica: int, purpose: int) -> int:
    """Derived seed for one (replica, purpose) stream family."""
    return mix64(root_seed, replica, purpose)


def _np_splitmix64(x: np.ndarray) -> np.ndarray:
    x = (x + np.uint64(_GAMMA))
    x = (x ^ (x >> np.uint64(30))) * np.uint64(_M1)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(_M2)
    return x ^ (x >> np.uint64(31))


def site_hash(seed: int, x: np.ndarray, y: np.ndarray, counter=0) -> np.ndarray:
    """Vectorized mix64(seed, x, y, counter) for coordinate arrays."""
    with np.errstate(over="ignore"):
        h = np.full(np.broadcast(x, y).shape, splitmix64(seed ^ _GAMMA), np.uint64)
        h = _np_splitmix64(h ^ x.astype(np.int64).view(np.uint64))
        h = _np_splitmix64(h ^ y.astype(np.int64).view(np.uint64))
        h = _np_splitmix64(h ^ np.asarray(counter, np.uint64))
    return h


def uniform_from_hash(h: np.ndarray) -> np.ndarray:
    """Map 64-bit hashes to doubles, strictly inside (0, 1)."""
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def site_uniform(seed: int, x: np.ndarray, y: np.ndarray, counter=0) -> np.ndarray:
    return uniform_from_hash(site_hash(seed, x, y, counter))


def site_exponential(seed: int, x: np.ndarray, y: np.ndarray, counter=0) -> np.ndarray:
    """Exp(1) variates per site, strictly positive, by inverse CDF."""
    return -np.log(site_uniform(seed, x, y, counter))


def poisson_arrivals(seed: int, x: np.ndarray, y: np.ndarray, rate: float,
                     horizon: float) -> tuple[np.ndarray, np.ndarray]:
    """All Poisson(rate) arrival times up to ``horizon`` for each site.

    Returns (site_index, time) arrays sorted by (time, site index).  The k-th
    arrival of a site uses counter k, so truncating the horizon or masking
    sites never changes the times of surviving arrivals (shared-stream
    prefix property).
    """
    x = np.asarray(x, np.int64)
    y = np.asarray(y, np.int64)
    times = site_exponential(seed, x, y, 0) / rate
    alive = times <= horizon
    out_idx = [np.nonzero(alive)[0]]
    out_t = [times[alive]]
    cur_idx = out_idx[0]
    cur_t = out_t[0]
    counter = 1
    while cur_idx.size:
        step = site_exponential(seed, x[cur_idx], y[cur_idx], counter) / rate
        cur_t = cur_t + step
        keep = cur_t <= horizon
        cur_idx = cur_idx[keep]
        cur_t = cur_t[keep]
        out_idx.append(cur_idx)
        out_t.append(cur_t)
        counter += 1
    idx = np.concatenate(out_idx)
    t = np.concatenate(out_t)
    order = np.lexsort((idx, t))
    return idx[order], t[order]


def bulk_generator(root_seed: int, replica: int, purpose: int) -> np.random.Generator:
    """Counter-based Philox generator for estimator-style bulk sampling."""
    return np.random.Generator(np.random.Philox(key=replica_seed(root_seed, replica, purpose)))
