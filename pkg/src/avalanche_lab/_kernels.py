"""Numba kernels for the event-driven engines and the 0/1-weight BFS.

The engines share conventions:

* cluster id of a Freeze/Burn record = smallest dense site index among its
  members, member segments are emitted sorted ascending;
* union-find is array-based with path halving and union by size; member
  lists are intrusive linked lists (O(1) concatenation on union);
* event codes: 1 Birth, 2 Blocked, 3 Freeze, 4 Ignite, 5 Burn,
  6 Recover-birth.

Everything here is deterministic given its inputs; all randomness lives in
the per-site streams prepared by the callers.
"""

from __future__ import annotations

import numpy as np
from numba import njit

EV_BIRTH = 1
EV_BLOCKED = 2
EV_FREEZE = 3
EV_IGNITE = 4
EV_BURN = 5
EV_RECOVER = 6


@njit(cache=True)
def _find(parent, v):
    while parent[v] != v:
        parent[v] = parent[parent[v]]
        v = parent[v]
    return v


@njit(cache=True)
def zero_one_bfs(neigh, weight, origin, target):
    """Min total site weight (0/1) over lattice paths from origin to a target
    site, counting the weight of every visited site including endpoints."""
    K = neigh.shape[0]
    seen = np.zeros(K, np.bool_)
    cur = np.empty(K, np.int32)
    nxt = np.empty(K, np.int32)
    ncur = 0
    d = np.int64(weight[origin])
    cur[ncur] = origin
    ncur += 1
    seen[origin] = True
    while ncur > 0:
        nnxt = 0
        head = 0
        while head < ncur:
            v = cur[head]
            head += 1
            if target[v]:
                return d
            for j in range(6):
                w = neigh[v, j]
                if w < 0 or seen[w]:
                    continue
                seen[w] = True
                if weight[w] != 0:
                    nxt[nnxt] = w
                    nnxt += 1
                else:
                    cur[ncur] = w
                    ncur += 1
        tmp = cur
        cur = nxt
        nxt = tmp
        ncur = nnxt
        d += 1
    return d


@njit(cache=True)
def _emit_members_from_list(head_site, nxt, mem, mpos):
    """Copy a linked member list into mem starting at mpos; returns new end."""
    s = head_site
    while s >= 0:
        mem[mpos] = s
        mpos += 1
        s = nxt[s]
    return mpos


@njit(cache=True)
def fp_kernel(neigh, order, times, N, modified):
    """Frozen percolation (original or modified boundary rules).

    order/times: birth attempts in increasing time order (one per site).
    Returns event arrays, member CSR, and the final state per site
    (0 vacant, 1 occupied, -1 frozen).
    """
    K = neigh.shape[0]
    cap_ev = 2 * K + 4
    ev_type = np.zeros(cap_ev, np.int8)
    ev_time = np.zeros(cap_ev, np.float64)
    ev_site = np.full(cap_ev, -1, np.int32)
    ev_cluster = np.full(cap_ev, -1, np.int32)
    ev_volume = np.zeros(cap_ev, np.int64)
    ev_mlo = np.full(cap_ev, -1, np.int64)
    ev_mhi = np.full(cap_ev, -1, np.int64)
    mem = np.empty(K, np.int32)
    nev = 0
    mpos = 0

    state = np.zeros(K, np.int8)
    parent = np.arange(K).astype(np.int32)
    size = np.ones(K, np.int64)
    frozen = np.zeros(K, np.bool_)  # per root
    head = np.arange(K).astype(np.int32)
    tail = np.arange(K).astype(np.int32)
    nxt = np.full(K, -1, np.int32)
    roots_buf = np.empty(6, np.int32)

    for k in range(order.shape[0]):
        v = order[k]
        t = times[k]
        nroots = 0
        blocked = False
        total = np.int64(1)
        for j in range(6):
            w = neigh[v, j]
            if w < 0 or state[w] != 1:
                continue
            r = _find(parent, w)
            dup = False
            for q in range(nroots):
                if roots_buf[q] == r:
                    dup = True
                    break
            if dup:
                continue
            if frozen[r]:
                blocked = True
                if not modified:
                    break
            roots_buf[nroots] = r
            nroots += 1
            total += size[r]

        if not modified:
            if blocked:
                ev_type[nev] = EV_BLOCKED
                ev_time[nev] = t
                ev_site[nev] = v
                nev += 1
                continue
            state[v] = 1
            rv = v
            for q in range(nroots):
                r = roots_buf[q]
                if size[r] < size[rv]:
                    big, small = rv, r
                else:
                    big, small = r, rv
                parent[small] = big
                size[big] += size[small]
                nxt[tail[big]] = head[small]
                tail[big] = tail[small]
                rv = big
            ev_type[nev] = EV_BIRTH
            ev_time[nev] = t
            ev_site[nev] = v
            nev += 1
            if size[rv] >= N:
                frozen[rv] = True
                lo = mpos
                mpos = _emit_members_from_list(head[rv], nxt, mem, mpos)
                seg = np.sort(mem[lo:mpos])
                mem[lo:mpos] = seg
                ev_type[nev] = EV_FREEZE
                ev_time[nev] = t
                ev_site[nev] = v
                ev_cluster[nev] = seg[0]
                ev_volume[nev] = mpos - lo
                ev_mlo[nev] = lo
                ev_mhi[nev] = mpos
                nev += 1
        else:
            # modified boundary rules: frozen sites have state -1, so the
            # adjacent clusters here are never frozen
            if total >= N:
                lo = mpos
                mem[mpos] = v
                mpos += 1
                for q in range(nroots):
                    mpos = _emit_members_from_list(head[roots_buf[q]], nxt, mem, mpos)
                seg = np.sort(mem[lo:mpos])
                mem[lo:mpos] = seg
                for i in range(lo, mpos):
                    state[mem[i]] = -1
                ev_type[nev] = EV_FREEZE
                ev_time[nev] = t
                ev_site[nev] = v
                ev_cluster[nev] = seg[0]
                ev_volume[nev] = mpos - lo
                ev_mlo[nev] = lo
                ev_mhi[nev] = mpos
                nev += 1
            else:
                state[v] = 1
                rv = v
                for q in range(nroots):
                    r = roots_buf[q]
                    if size[r] < size[rv]:
                        big, small = rv, r
                    else:
                        big, small = r, rv
                    parent[small] = big
                    size[big] += size[small]
                    nxt[tail[big]] = head[small]
                    tail[big] = tail[small]
                    rv = big
                ev_type[nev] = EV_BIRTH
                ev_time[nev] = t
                ev_site[nev] = v
                nev += 1

    if not modified:
        # report frozen clusters as state -1 in the final configuration
        for v in range(K):
            if state[v] == 1 and frozen[_find(parent, v)]:
                state[v] = -1

    return (ev_type[:nev], ev_time[:nev], ev_site[:nev], ev_cluster[:nev],
            ev_volume[:nev], ev_mlo[:nev], ev_mhi[:nev], mem[:mpos], state)


@njit(cache=True)
def ffwor_kernel(neigh, kind, site, time):
    """Forest fire without recovery.

    kind/site/time: merged event stream sorted by (time, site, kind);
    kind 0 = birth attempt (one per site), kind 1 = ignition.
    Burnt sites get state -1 forever.
    """
    K = neigh.shape[0]
    M = kind.shape[0]
    cap_ev = M + K + 4
    ev_type = np.zeros(cap_ev, np.int8)
    ev_time = np.zeros(cap_ev, np.float64)
    ev_site = np.full(cap_ev, -1, np.int32)
    ev_cluster = np.full(cap_ev, -1, np.int32)
    ev_volume = np.zeros(cap_ev, np.int64)
    ev_mlo = np.full(cap_ev, -1, np.int64)
    ev_mhi = np.full(cap_ev, -1, np.int64)
    mem = np.empty(K, np.int32)
    nev = 0
    mpos = 0

    state = np.zeros(K, np.int8)
    parent = np.arange(K).astype(np.int32)
    size = np.ones(K, np.int64)
    head = np.arange(K).astype(np.int32)
    tail = np.arange(K).astype(np.int32)
    nxt = np.full(K, -1, np.int32)

    for k in range(M):
        v = site[k]
        t = time[k]
        if kind[k] == 0:
            if state[v] != 0:
                continue
            state[v] = 1
            rv = v
            for j in range(6):
                w = neigh[v, j]
                if w < 0 or state[w] != 1:
                    continue
                r = _find(parent, w)
                if r == rv:
                    continue
                if size[r] < size[rv]:
                    big, small = rv, r
                else:
                    big, small = r, rv
                parent[small] = big
                size[big] += size[small]
                nxt[tail[big]] = head[small]
                tail[big] = tail[small]
                rv = big
            ev_type[nev] = EV_BIRTH
            ev_time[nev] = t
            ev_site[nev] = v
            nev += 1
        else:
            ev_type[nev] = EV_IGNITE
            ev_time[nev] = t
            ev_site[nev] = v
            nev += 1
            if state[v] != 1:
                continue
            r = _find(parent, v)
            lo = mpos
            mpos = _emit_members_from_list(head[r], nxt, mem, mpos)
            seg = np.sort(mem[lo:mpos])
            mem[lo:mpos] = seg
            for i in range(lo, mpos):
                state[mem[i]] = -1
            ev_type[nev] = EV_BURN
            ev_time[nev] = t
            ev_site[nev] = v
            ev_cluster[nev] = seg[0]
            ev_volume[nev] = mpos - lo
            ev_mlo[nev] = lo
            ev_mhi[nev] = mpos
            nev += 1

    return (ev_type[:nev], ev_time[:nev], ev_site[:nev], ev_cluster[:nev],
            ev_volume[:nev], ev_mlo[:nev], ev_mhi[:nev], mem[:mpos], state)


@njit(cache=True)
def ffwr_kernel(neigh, kind, site, time):
    """Forest fire with recovery: burnt sites become vacant and are reborn at
    their later birth-stream arrivals.  Union-find nodes are per incarnation
    (never deleted); member lists are per live incarnation."""
    K = neigh.shape[0]
    M = kind.shape[0]
    cap_nodes = M + 4
    cap_ev = 2 * M + 4
    ev_type = np.zeros(cap_ev, np.int8)
    ev_time = np.zeros(cap_ev, np.float64)
    ev_site = np.full(cap_ev, -1, np.int32)
    ev_cluster = np.full(cap_ev, -1, np.int32)
    ev_volume = np.zeros(cap_ev, np.int64)
    ev_mlo = np.full(cap_ev, -1, np.int64)
    ev_mhi = np.full(cap_ev, -1, np.int64)
    mem = np.empty(M + 4, np.int32)
    nev = 0
    mpos = 0

    state = np.zeros(K, np.int8)
    born_once = np.zeros(K, np.bool_)
    node_of = np.full(K, -1, np.int64)
    parent = np.arange(cap_nodes).astype(np.int64)
    size = np.ones(cap_nodes, np.int64)
    head = np.full(cap_nodes, -1, np.int32)
    tail = np.full(cap_nodes, -1, np.int32)
    nxt = np.full(K, -1, np.int32)
    nnodes = 0

    for k in range(M):
        v = site[k]
        t = time[k]
        if kind[k] == 0:
            if state[v] != 0:
                continue  # arrival at an occupied site: nothing happens
            node = nnodes
            nnodes += 1
            parent[node] = node
            size[node] = 1
            head[node] = v
            tail[node] = v
            nxt[v] = -1
            node_of[v] = node
            state[v] = 1
            rv = node
            for j in range(6):
                w = neigh[v, j]
                if w < 0 or state[w] != 1:
                    continue
                r = _find(parent, node_of[w])
                if r == rv:
                    continue
                if size[r] < size[rv]:
                    big, small = rv, r
                else:
                    big, small = r, rv
                parent[small] = big
                size[big] += size[small]
                nxt[tail[big]] = head[small]
                tail[big] = tail[small]
                rv = big
            ev_type[nev] = EV_RECOVER if born_once[v] else EV_BIRTH
            ev_time[nev] = t
            ev_site[nev] = v
            nev += 1
            born_once[v] = True
        else:
            ev_type[nev] = EV_IGNITE
            ev_time[nev] = t
            ev_site[nev] = v
            nev += 1
            if state[v] != 1:
                continue
            r = _find(parent, node_of[v])
            lo = mpos
            mpos = _emit_members_from_list(head[r], nxt, mem, mpos)
            seg = np.sort(mem[lo:mpos])
            mem[lo:mpos] = seg
            for i in range(lo, mpos):
                state[mem[i]] = 0
                node_of[mem[i]] = -1
            ev_type[nev] = EV_BURN
            ev_time[nev] = t
            ev_site[nev] = v
            ev_cluster[nev] = seg[0]
            ev_volume[nev] = mpos - lo
            ev_mlo[nev] = lo
            ev_mhi[nev] = mpos
            nev += 1

    return (ev_type[:nev], ev_time[:nev], ev_site[:nev], ev_cluster[:nev],
            ev_volume[:nev], ev_mlo[:nev], ev_mhi[:nev], mem[:mpos], state)
