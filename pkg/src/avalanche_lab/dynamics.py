"""Event-driven engines: pure birth, N-frozen percolation (original and
modified boundary rules), forest fires without/with recovery, plus a naive
reference engine that recomputes clusters by flood fill after every event.

All engines for one (region, seed, replica) consume exactly the same
per-site event streams, so optimized and reference runs are comparable
event-by-event.  Simultaneous events (a measure-zero case) are ordered by
(time, dense site index, kind).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from . import rng as rnglib
from .lattice import Region, dense_region, DenseRegion
from .percolation import Configuration, DEAD, OCCUPIED, VACANT

EVENT_NAMES = {1: "birth", 2: "blocked", 3: "freeze", 4: "ignite", 5: "burn", 6: "recover-birth"}
EV_BIRTH, EV_BLOCKED, EV_FREEZE, EV_IGNITE, EV_BURN, EV_RECOVER = 1, 2, 3, 4, 5, 6


@dataclass
class EventLog:
    """Time-ordered event record arrays; Freeze/Burn rows carry a member
    segment (sorted dense indices) in the CSR buffer ``members``."""

    dreg: DenseRegion
    type: np.ndarray      # int8
    time: np.ndarray      # float64
    site: np.ndarray      # int32 dense index (triggering site)
    cluster: np.ndarray   # int32 dense index of cluster representative, -1
    volume: np.ndarray    # int64
    mlo: np.ndarray       # int64 member segment start, -1
    mhi: np.ndarray       # int64 member segment end, -1
    members: np.ndarray   # int32 buffer

    def __len__(self) -> int:
        return len(self.type)

    def members_of(self, i: int) -> np.ndarray:
        if self.mlo[i] < 0:
            raise ValueError(f"event {i} has no member set")
        return self.members[self.mlo[i]:self.mhi[i]]

    def cluster_events(self) -> np.ndarray:
        """Indices of Freeze/Burn events, in time order."""
        return np.nonzero((self.type == EV_FREEZE) | (self.type == EV_BURN))[0]

    def equals(self, other: "EventLog") -> bool:
        return (np.array_equal(self.type, other.type)
                and np.array_equal(self.time, other.time)
                and np.array_equal(self.site, other.site)
                and np.array_equal(self.cluster, other.cluster)
                and np.array_equal(self.volume, other.volume)
                and np.array_equal(self.mlo, other.mlo)
                and np.array_equal(self.mhi, other.mhi)
                and np.array_equal(self.members, other.members))


# ---------------------------------------------------------------------------
# per-site streams


def birth_times(region: Region, seed: int, replica: int = 0) -> np.ndarray:
    """First birth time of every site: i.i.d. Exp(1), keyed by site."""
    d = dense_region(region)
    s = rnglib.replica_seed(seed, replica, rnglib.BIRTH)
    return rnglib.site_exponential(s, d.xy[:, 0], d.xy[:, 1])


def birth_arrivals(region: Region, horizon: float, seed: int, replica: int = 0):
    """All rate-1 Poisson birth arrivals up to the horizon (for FFWR)."""
    d = dense_region(region)
    s = rnglib.replica_seed(seed, replica, rnglib.BIRTH)
    return rnglib.poisson_arrivals(s, d.xy[:, 0], d.xy[:, 1], 1.0, horizon)


def ignition_stream(region: Region, zeta: float, horizon: float, seed: int,
                    replica: int = 0, truncation: float | None = None,
                    mask=None, mask_after: float = 0.0):
    """Per-site Poisson(zeta) ignition arrivals up to the horizon.

    ``truncation`` implements ignitions discarded after a fixed time; ``mask``
    (a site set / boolean dense array) with ``mask_after`` discards ignitions
    at masked sites after the given time.  Under shared streams the truncated
    stream is a prefix of the untruncated one.
    """
    if zeta <= 0:
        raise ValueError("zeta must be > 0")
    d = dense_region(region)
    s = rnglib.replica_seed(seed, replica, rnglib.IGNITE)
    idx, t = rnglib.poisson_arrivals(s, d.xy[:, 0], d.xy[:, 1], zeta, horizon)
    if truncation is not None:
        keep = t <= truncation
        idx, t = idx[keep], t[keep]
    if mask is not None:
        m = np.zeros(d.size, bool)
        m[_as_indices(d, mask)] = True
        keep = ~(m[idx] & (t > mask_after))
        idx, t = idx[keep], t[keep]
    return idx.astype(np.int64), t


def _as_indices(d: DenseRegion, sites) -> np.ndarray:
    sites = np.asarray(sites)
    if sites.ndim == 2:
        out = d.indices_of(sites.astype(np.int64))
        if (out < 0).any():
            raise ValueError("site outside region")
        return out
    return sites.astype(np.int64)


def _merge_streams(b_idx, b_t, i_idx, i_t):
    """Merge births (kind 0) and ignitions (kind 1) into one stream ordered
    by (time, site, kind)."""
    kind = np.concatenate([np.zeros(len(b_idx), np.int8), np.ones(len(i_idx), np.int8)])
    site = np.concatenate([b_idx, i_idx]).astype(np.int64)
    time = np.concatenate([b_t, i_t])
    order = np.lexsort((kind, site, time))
    return kind[order], site[order], time[order]


# ---------------------------------------------------------------------------
# optimized engines


def snapshot_birth(region: Region, times: list[float], seed: int,
                   replica: int = 0) -> list[Configuration]:
    """Coupled snapshots of the pure birth process at the given sorted times."""
    ts = list(times)
    if ts != sorted(ts):
        raise ValueError("times must be sorted")
    d = dense_region(region)
    bt = birth_times(region, seed, replica)
    out = []
    for t in ts:
        states = np.where(bt <= t, OCCUPIED, VACANT).astype(np.int8)
        out.append(Configuration(d, states))
    return out


def run_frozen(region: Region, N: int, rule: str = "original", seed: int = 0,
               replica: int = 0, birth_order=None):
    """N-frozen percolation until all births are processed (t = infinity).

    ``birth_order`` (tests/oracles): explicit site order; times become ranks.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if rule not in ("original", "modified"):
        raise ValueError("rule must be 'original' or 'modified'")
    d = dense_region(region)
    order, times = _birth_order(d, region, seed, replica, birth_order)
    from ._kernels import fp_kernel
    res = fp_kernel(d.neigh, order, times, np.int64(N), rule == "modified")
    return _package(d, res)


def _birth_order(d: DenseRegion, region: Region, seed: int, replica: int, birth_order):
    if birth_order is not None:
        order = _as_indices(d, np.asarray(birth_order)).astype(np.int64)
        times = np.arange(1.0, len(order) + 1.0)
        return order, times
    bt = birth_times(region, seed, replica)
    order = np.lexsort((np.arange(d.size), bt)).astype(np.int64)
    return order, bt[order]


def run_ffwor(region: Region, zeta: float, horizon: float, seed: int = 0,
              replica: int = 0, ignition_truncation: float | None = None,
              local_ignition_mask=None, mask_after: float = 0.0):
    """Forest fire without recovery up to the horizon."""
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    d = dense_region(region)
    bt = birth_times(region, seed, replica)
    keep = bt <= horizon
    b_idx = np.nonzero(keep)[0].astype(np.int64)
    i_idx, i_t = ignition_stream(region, zeta, horizon, seed, replica,
                                 truncation=ignition_truncation,
                                 mask=local_ignition_mask, mask_after=mask_after)
    kind, site, time = _merge_streams(b_idx, bt[keep], i_idx, i_t)
    from ._kernels import ffwor_kernel
    res = ffwor_kernel(d.neigh, kind, site, time)
    return _package(d, res)


def run_ffwor_until_dead(region: Region, zeta: float, seed: int = 0,
                         replica: int = 0, max_events: int = 10_000_000,
                         start_horizon: float = 2.0):
    """FFWoR run extended until every site is dead, or the event budget is
    hit (then ``truncated`` is set).  Horizon doubling is exact because the
    per-site streams make longer runs extensions of shorter ones.

    Returns (final, log, truncated).
    """
    horizon = start_horizon
    while True:
        final, log = run_ffwor(region, zeta, horizon, seed, replica)
        if (final.states == DEAD).all():
            return final, log, False
        if len(log) > max_events:
            return final, log, True
        horizon *= 2.0


def run_ffwr(region: Region, zeta: float, horizon: float, seed: int = 0,
             replica: int = 0):
    """Forest fire with recovery up to the horizon."""
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    d = dense_region(region)
    b_idx, b_t = birth_arrivals(region, horizon, seed, replica)
    i_idx, i_t = ignition_stream(region, zeta, horizon, seed, replica)
    kind, site, time = _merge_streams(b_idx.astype(np.int64), b_t, i_idx, i_t)
    from ._kernels import ffwr_kernel
    res = ffwr_kernel(d.neigh, kind, site, time)
    return _package(d, res)


def _package(d: DenseRegion, res):
    (ev_type, ev_time, ev_site, ev_cluster, ev_volume, ev_mlo, ev_mhi,
     mem, state) = res
    log = EventLog(d, ev_type, ev_time, ev_site, ev_cluster, ev_volume,
                   ev_mlo, ev_mhi, mem)
    final = Configuration(d, np.asarray(state, np.int8))
    return final, log


# ---------------------------------------------------------------------------
# naive reference engine (the oracle): flood fill after every event


def run_reference(engine: str, region: Region, seed: int = 0, replica: int = 0,
                  N: int | None = None, rule: str = "original",
                  zeta: float | None = None, horizon: float | None = None,
                  birth_order=None, ignition_truncation: float | None = None,
                  local_ignition_mask=None, mask_after: float = 0.0):
    """Same semantics as the optimized engines, recomputing every cluster by
    flood fill; shares the per-site streams with the optimized engines."""
    d = dense_region(region)
    if engine == "frozen":
        order, times = _birth_order(d, region, seed, replica, birth_order)
        return _reference_frozen(d, order, times, N, rule)
    if engine == "ffwor":
        bt = birth_times(region, seed, replica)
        keep = bt <= horizon
        b_idx = np.nonzero(keep)[0].astype(np.int64)
        i_idx, i_t = ignition_stream(region, zeta, horizon, seed, replica,
                                     truncation=ignition_truncation,
                                     mask=local_ignition_mask, mask_after=mask_after)
        kind, site, time = _merge_streams(b_idx, bt[keep], i_idx, i_t)
        return _reference_fire(d, kind, site, time, recovery=False)
    if engine == "ffwr":
        b_idx, b_t = birth_arrivals(region, horizon, seed, replica)
        i_idx, i_t = ignition_stream(region, zeta, horizon, seed, replica)
        kind, site, time = _merge_streams(b_idx.astype(np.int64), b_t, i_idx, i_t)
        return _reference_fire(d, kind, site, time, recovery=True)
    raise ValueError(f"unknown engine {engine!r}")


class _LogBuilder:
    def __init__(self, d: DenseRegion):
        self.d = d
        self.type: list[int] = []
        self.time: list[float] = []
        self.site: list[int] = []
        self.cluster: list[int] = []
        self.volume: list[int] = []
        self.mlo: list[int] = []
        self.mhi: list[int] = []
        self.members: list[int] = []

    def add(self, ev, t, v, members=None):
        self.type.append(ev)
        self.time.append(t)
        self.site.append(v)
        if members is None:
            self.cluster.append(-1)
            self.volume.append(0)
            self.mlo.append(-1)
            self.mhi.append(-1)
        else:
            members = sorted(int(m) for m in members)
            self.cluster.append(members[0])
            self.volume.append(len(members))
            self.mlo.append(len(self.members))
            self.members.extend(members)
            self.mhi.append(len(self.members))

    def build(self) -> EventLog:
        return EventLog(
            self.d,
            np.array(self.type, np.int8),
            np.array(self.time, np.float64),
            np.array(self.site, np.int32),
            np.array(self.cluster, np.int32),
            np.array(self.volume, np.int64),
            np.array(self.mlo, np.int64),
            np.array(self.mhi, np.int64),
            np.array(self.members, np.int32),
        )


def _flood(d: DenseRegion, state: np.ndarray, start: int) -> list[int]:
    comp = [start]
    seen = {start}
    q = deque([start])
    while q:
        v = q.popleft()
        for w in d.neigh[v]:
            if w >= 0 and w not in seen and state[w] == 1:
                seen.add(int(w))
                comp.append(int(w))
                q.append(int(w))
    return comp


def _reference_frozen(d: DenseRegion, order, times, N, rule):
    if N is None or N < 1:
        raise ValueError("N must be >= 1")
    state = np.zeros(d.size, np.int8)
    frozen_sites = np.zeros(d.size, bool)
    log = _LogBuilder(d)
    for k in range(len(order)):
        v = int(order[k])
        t = float(times[k])
        nbr_clusters: list[list[int]] = []
        claimed: set[int] = set()
        for w in d.neigh[v]:
            if w >= 0 and state[w] == 1 and int(w) not in claimed:
                comp = _flood(d, state, int(w))
                claimed.update(comp)
                nbr_clusters.append(comp)
        if rule == "original":
            if any(len(c) >= N for c in nbr_clusters):
                log.add(EV_BLOCKED, t, v)
                continue
            state[v] = 1
            log.add(EV_BIRTH, t, v)
            comp = _flood(d, state, v)
            if len(comp) >= N:
                frozen_sites[comp] = True
                log.add(EV_FREEZE, t, v, comp)
        else:
            total = 1 + sum(len(c) for c in nbr_clusters)
            if total >= N:
                members = [v] + [u for c in nbr_clusters for u in c]
                for u in members:
                    state[u] = DEAD
                log.add(EV_FREEZE, t, v, members)
            else:
                state[v] = 1
                log.add(EV_BIRTH, t, v)
    if rule == "original":
        state[frozen_sites] = DEAD
    return Configuration(d, state), log.build()


def _reference_fire(d: DenseRegion, kind, site, time, recovery: bool):
    state = np.zeros(d.size, np.int8)
    born_once = np.zeros(d.size, bool)
    log = _LogBuilder(d)
    for k in range(len(kind)):
        v = int(site[k])
        t = float(time[k])
        if kind[k] == 0:
            if state[v] != 0:
                continue
            state[v] = 1
            log.add(EV_RECOVER if (recovery and born_once[v]) else EV_BIRTH, t, v)
            born_once[v] = True
        else:
            log.add(EV_IGNITE, t, v)
            if state[v] != 1:
                continue
            comp = _flood(d, state, v)
            for u in comp:
                state[u] = VACANT if recovery else DEAD
            log.add(EV_BURN, t, v, comp)
    return Configuration(d, state), log.build()


# ---------------------------------------------------------------------------
# audits and invariants


def audit_burn_clusters(log: EventLog) -> bool:
    """Replay the log and check every Burn/Freeze member set is a maximal
    occupied cluster at its event time (flood-fill audit, debug use)."""
    d = log.dreg
    state = np.zeros(d.size, np.int8)
    for i in range(len(log)):
        ev = int(log.type[i])
        v = int(log.site[i])
        if ev in (EV_BIRTH, EV_RECOVER):
            state[v] = 1
        elif ev == EV_FREEZE:
            # modified rule freezes {v} + adjacent clusters; original rule
            # freezes the cluster of v after its birth: both equal the
            # cluster of v if v is occupied, else {v} + adjacent clusters
            members = set(int(m) for m in log.members_of(i))
            if state[v] == 1:
                comp = set(_flood(d, state, v))
            else:
                comp = {v}
                for w in d.neigh[v]:
                    if w >= 0 and state[w] == 1:
                        comp.update(_flood(d, state, int(w)))
            if comp != members:
                return False
            for m in members:
                state[m] = DEAD
        elif ev == EV_BURN:
            members = set(int(m) for m in log.members_of(i))
            comp = set(_flood(d, state, v))
            if comp != members:
                return False
            for m in members:
                state[m] = DEAD
    return True


def freeze_volumes_in_window(log: EventLog, N: int) -> bool:
    """Original-rule invariant: every Freeze volume lies in [N, 3N-2]."""
    idx = np.nonzero(log.type == EV_FREEZE)[0]
    vols = log.volume[idx]
    return bool(((vols >= N) & (vols <= 3 * N - 2)).all())


def dead_set_nondecreasing(log: EventLog) -> bool:
    """FFWoR: burn member sets are disjoint and their union only grows."""
    seen: set[int] = set()
    for i in np.nonzero(log.type == EV_BURN)[0]:
        members = set(int(m) for m in log.members_of(i))
        if members & seen:
            return False
        seen |= members
    return True
