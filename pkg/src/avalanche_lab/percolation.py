"""Static configuration analysis: sampling, cluster labeling, crossings,
circuits, arm events, largest clusters, and disjoint-circuit counting.

States are Vacant=0, Occupied=1, Dead=-1 (burnt or frozen, depending on the
process).  Dead sites never participate in occupied connectivity.

Connectivity on the axial grid (row=y, col=x) is the square-lattice adjacency
plus the (1,-1)/(-1,1) diagonal, which is exactly the 6-neighbor triangular
adjacency; ``LABEL_STRUCTURE`` encodes it for scipy.ndimage.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import rng as rnglib
from .lattice import (
    Ball,
    Annulus,
    Lozenge,
    Rect,
    Region,
    ball_norm_arr,
    dense_region,
    DenseRegion,
    NEIGHBOR_OFFSETS,
)

VACANT = 0
OCCUPIED = 1
DEAD = -1


@dataclass(frozen=True)
class ColorSequence:
    """An arm-color prescription, a word over {'o', 'v'}.

    Only the monochromatic sequences and the alternating four-arm word are
    detected exactly here (general words need interface tracing); the type
    exists to name them.
    """

    word: str

    def __post_init__(self):
        if not self.word or set(self.word) - {"o", "v"}:
            raise ValueError("color sequence must be a nonempty word over {o, v}")

    def __len__(self) -> int:
        return len(self.word)


ONE_ARM = ColorSequence("o")
FOUR_ARM_ALT = ColorSequence("ovov")

# on the (row=y, col=x) grid: offsets (dy,dx) in {(0,+-1),(+-1,0),(-1,1),(1,-1)}
LABEL_STRUCTURE = np.array([[0, 1, 1], [1, 1, 1], [1, 1, 0]], dtype=np.int32)


@dataclass
class Configuration:
    dreg: DenseRegion
    states: np.ndarray  # int8, dense indices
    _labels: dict = field(default_factory=dict, repr=False)

    @classmethod
    def empty(cls, region: Region) -> "Configuration":
        d = dense_region(region)
        return cls(d, np.zeros(d.size, np.int8))

    @property
    def region(self) -> Region:
        return self.dreg.region

    def state_of(self, v: tuple[int, int]) -> int:
        i = self.dreg.index_of(v)
        if i < 0:
            raise KeyError(f"site {v} not in region")
        return int(self.states[i])

    def color_mask(self, color: str) -> np.ndarray:
        if color == "occupied":
            return self.states == OCCUPIED
        if color == "vacant":
            return self.states == VACANT
        raise ValueError(f"unknown color {color!r}")

    def grid_mask(self, color: str) -> np.ndarray:
        """Boolean grid (embedding array) of the given color."""
        g = np.zeros(self.dreg.shape, bool)
        xy = self.dreg.xy
        m = self.color_mask(color)
        g[xy[m, 1] - self.dreg.ymin, xy[m, 0] - self.dreg.xmin] = True
        return g

    def invalidate(self):
        self._labels.clear()


@dataclass
class Labeling:
    """Cluster labeling: root[i] = dense index of the cluster representative
    (smallest dense index in the cluster), -1 off-color; size[root] = volume."""

    root: np.ndarray  # int32 per dense site
    sizes: np.ndarray  # int64 per dense site; nonzero only at roots

    def size_of(self, i: int) -> int:
        return int(self.sizes[self.root[i]]) if self.root[i] >= 0 else 0

    @property
    def roots(self) -> np.ndarray:
        return np.nonzero(self.sizes > 0)[0]


def sample_bernoulli(region: Region, p: float, stream_seed: int) -> Configuration:
    """I.i.d. Bernoulli(p) occupation, a pure function of (stream_seed, site)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    d = dense_region(region)
    u = rnglib.site_uniform(stream_seed, d.xy[:, 0], d.xy[:, 1])
    states = np.where(u < p, OCCUPIED, VACANT).astype(np.int8)
    return Configuration(d, states)


def label_clusters(config: Configuration, color: str = "occupied") -> Labeling:
    """Connected-component labeling of one color, cached per configuration."""
    if color in config._labels:
        return config._labels[color]
    d = config.dreg
    grid = config.grid_mask(color)
    lab, _ = ndimage.label(grid, structure=LABEL_STRUCTURE)
    comp = lab[d.xy[:, 1] - d.ymin, d.xy[:, 0] - d.xmin]
    root = np.full(d.size, -1, np.int32)
    sizes = np.zeros(d.size, np.int64)
    on = comp > 0
    if on.any():
        ncomp = int(comp.max())
        rep = np.full(ncomp + 1, d.size, np.int64)
        idx = np.nonzero(on)[0]
        np.minimum.at(rep, comp[idx], idx)
        root[idx] = rep[comp[idx]].astype(np.int32)
        counts = np.bincount(comp[idx], minlength=ncomp + 1)
        sizes[rep[1:][counts[1:] > 0]] = counts[1:][counts[1:] > 0]
    out = Labeling(root, sizes)
    config._labels[color] = out
    return out


def flood_fill_labels(config: Configuration, color: str = "occupied") -> Labeling:
    """Pure-BFS reference labeling (oracle for label_clusters)."""
    d = config.dreg
    m = config.color_mask(color)
    root = np.full(d.size, -1, np.int32)
    sizes = np.zeros(d.size, np.int64)
    for start in range(d.size):
        if not m[start] or root[start] >= 0:
            continue
        comp = [start]
        root[start] = start
        q = deque([start])
        while q:
            v = q.popleft()
            for w in d.neigh[v]:
                if w >= 0 and m[w] and root[w] < 0:
                    root[w] = start
                    comp.append(w)
                    q.append(w)
        sizes[start] = len(comp)
    return Labeling(root, sizes)


def largest_cluster(config: Configuration, color: str = "occupied"):
    """(root dense index, volume) of the largest cluster; ties broken by the
    smallest root index; None if there is no cluster of that color."""
    lab = label_clusters(config, color)
    roots = lab.roots
    if len(roots) == 0:
        return None
    best = roots[np.argmax(lab.sizes[roots])]  # argmax takes first max: smallest root
    return int(best), int(lab.sizes[best])


# ---------------------------------------------------------------------------
# crossings


def _rect_side_masks(d: DenseRegion, rect: Rect):
    """Masks over dense sites: in-rect, and within L-inf distance 1 of each side."""
    x, y = d.xy[:, 0], d.xy[:, 1]
    re2 = 2 * x + y
    im = y * (math.sqrt(3) / 2.0)
    inside = (re2 >= 2 * rect.x1) & (re2 <= 2 * rect.x2) & (im >= rect.y1 - 1e-12) & (im <= rect.y2 + 1e-12)
    left = inside & (re2 <= 2 * (rect.x1 + 1))
    right = inside & (re2 >= 2 * (rect.x2 - 1))
    bottom = inside & (im <= rect.y1 + 1 + 1e-12)
    top = inside & (im >= rect.y2 - 1 - 1e-12)
    return inside, left, right, bottom, top


def crossing(config: Configuration, rect, direction: str = "horizontal",
             color: str = "occupied") -> bool:
    """Crossing of an embedded rectangle (or of a Lozenge, in lattice coords).

    Horizontal: a color path joining sites within distance 1 of the left and
    right sides; vertical: bottom and top.  For a Lozenge region the sides are
    the lattice-coordinate columns x=0, x=k-1 (horizontal) or rows y=0, y=k-1
    (vertical); this is the version with an exact vacant/occupied duality.
    """
    d = config.dreg
    if isinstance(rect, Lozenge):
        x, y = d.xy[:, 0], d.xy[:, 1]
        inside = (x >= 0) & (x < rect.k) & (y >= 0) & (y < rect.k)
        if direction == "horizontal":
            a, b = inside & (x == 0), inside & (x == rect.k - 1)
        else:
            a, b = inside & (y == 0), inside & (y == rect.k - 1)
    else:
        inside, left, right, bottom, top = _rect_side_masks(d, rect)
        if not inside.any():
            raise ValueError("rectangle does not meet the region")
        a, b = (left, right) if direction == "horizontal" else (bottom, top)
    return _connects(config, inside, a, b, color)


def _connects(config: Configuration, allowed: np.ndarray, a: np.ndarray,
              b: np.ndarray, color: str) -> bool:
    """Is there a color path inside ``allowed`` joining masks a and b?"""
    d = config.dreg
    m = config.color_mask(color) & allowed
    if not (m & a).any() or not (m & b).any():
        return False
    g = np.zeros(d.shape, np.int8)
    rows = d.xy[:, 1] - d.ymin
    cols = d.xy[:, 0] - d.xmin
    g[rows[m], cols[m]] = 1
    lab, _ = ndimage.label(g, structure=LABEL_STRUCTURE)
    la = np.unique(lab[rows[m & a], cols[m & a]])
    lb = np.unique(lab[rows[m & b], cols[m & b]])
    return bool(np.intersect1d(la, lb, assume_unique=True).size)


def mono_arm(config: Configuration, annulus: Annulus, color: str = "occupied") -> bool:
    """A color path joining d_out B_n1 to d_in B_n2 inside the annulus."""
    d = config.dreg
    nu = _centered_norm(d, annulus.center)
    inside = (nu > annulus.n1) & (nu <= annulus.n2)
    inner_rim = inside & _touches_ball(d, annulus.center, annulus.n1)
    outer_rim = inside & _on_ball_inner_boundary(d, annulus.center, annulus.n2)
    return _connects(config, inside, inner_rim, outer_rim, color)


def _centered_norm(d: DenseRegion, center: tuple[int, int]) -> np.ndarray:
    if center == (0, 0):
        return d.norm
    return ball_norm_arr(d.xy[:, 0] - center[0], d.xy[:, 1] - center[1])


def _touches_ball(d: DenseRegion, center: tuple[int, int], n: int) -> np.ndarray:
    """Sites with a lattice neighbor inside B_n(center) (coordinate test, so
    exact even when the ball itself lies outside the region)."""
    cx, cy = center
    out = np.zeros(d.size, bool)
    for dx, dy in NEIGHBOR_OFFSETS:
        out |= ball_norm_arr(d.xy[:, 0] + dx - cx, d.xy[:, 1] + dy - cy) <= n
    return out


def _on_ball_inner_boundary(d: DenseRegion, center: tuple[int, int], n: int) -> np.ndarray:
    """Sites of B_n(center) adjacent to its complement (coordinate test)."""
    cx, cy = center
    nu = _centered_norm(d, center)
    cand = nu == n
    out = np.zeros(d.size, bool)
    idx = np.nonzero(cand)[0]
    for dx, dy in NEIGHBOR_OFFSETS:
        out[idx] |= ball_norm_arr(d.xy[idx, 0] + dx - cx, d.xy[idx, 1] + dy - cy) > n
    return out & cand


def has_circuit(config: Configuration, annulus: Annulus, color: str = "occupied") -> bool:
    """A color circuit in the annulus surrounding its center.

    Exact on the triangular lattice by self-matching: a circuit exists iff
    there is NO opposite-color radial crossing of the annulus.
    """
    opposite = "vacant" if color == "occupied" else "occupied"
    return not mono_arm(config, annulus, opposite)


def circuit_trace_oracle(config: Configuration, annulus: Annulus, color: str = "occupied") -> bool:
    """Independent circuit detector: some color component of the annulus
    surrounds the center (checked by blocking, cluster by cluster)."""
    d = config.dreg
    nu = _centered_norm(d, annulus.center)
    inside = (nu > annulus.n1) & (nu <= annulus.n2)
    m = config.color_mask(color) & inside
    lab = _masked_components(d, m)
    for comp_id in np.unique(lab[lab >= 0]):
        members = np.nonzero(lab == comp_id)[0]
        if _blocks_center(d, members, annulus):
            return True
    return False


def _masked_components(d: DenseRegion, m: np.ndarray) -> np.ndarray:
    g = np.zeros(d.shape, np.int8)
    rows, cols = d.xy[:, 1] - d.ymin, d.xy[:, 0] - d.xmin
    g[rows[m], cols[m]] = 1
    lab, _ = ndimage.label(g, structure=LABEL_STRUCTURE)
    out = lab[rows, cols].astype(np.int64) - 1
    out[~m] = -1
    return out


def _blocks_center(d: DenseRegion, members: np.ndarray, annulus: Annulus) -> bool:
    """Does the member set cut the center of the annulus off from outside B_n2?
    Flood fill from the center through non-members of B_n2."""
    nu = _centered_norm(d, annulus.center)
    blocked = np.zeros(d.size, bool)
    blocked[members] = True
    start = d.index_of(annulus.center)
    if start < 0:
        raise ValueError("annulus center outside region")
    allowed = nu <= annulus.n2
    seen = np.zeros(d.size, bool)
    seen[start] = True
    q = deque([start])
    while q:
        v = q.popleft()
        if nu[v] == annulus.n2:
            return False
        for w in d.neigh[v]:
            if w >= 0 and allowed[w] and not blocked[w] and not seen[w]:
                seen[w] = True
                q.append(w)
    return True


def pivotal_four_arm(config: Configuration, n: int) -> bool:
    """Is the center site pivotal for the left-right occupied crossing of B_n?

    Equivalent to the four alternating arms event from the center, up to
    constants; used as the working definition of the four-arm event.
    """
    d = config.dreg
    center = d.index_of((0, 0))
    if center < 0:
        raise ValueError("origin not in region")
    x, y = d.xy[:, 0], d.xy[:, 1]
    re2 = 2 * x + y
    nu = d.norm
    inside = nu <= n
    left = inside & (re2 <= -2 * n + 2)
    right = inside & (re2 >= 2 * n - 2)
    m = (config.states == OCCUPIED) & inside
    m[center] = False
    lab = _masked_components(d, m)
    la = set(lab[left & (lab >= 0)].tolist())
    lb = set(lab[right & (lab >= 0)].tolist())
    if la & lb:
        return False  # crossing without the center: not pivotal
    adj = set()
    for w in d.neigh[center]:
        if w >= 0 and lab[w] >= 0:
            adj.add(int(lab[w]))
    return bool(adj & la) and bool(adj & lb)


def circuit_and_arm_in_cluster(config: Configuration, annulus: Annulus) -> bool:
    """Does the largest occupied cluster contain both an occupied circuit and
    an occupied radial crossing of the annulus?"""
    best = largest_cluster(config)
    if best is None:
        return False
    root, _ = best
    lab = label_clusters(config)
    d = config.dreg
    nu = _centered_norm(d, annulus.center)
    inside = (nu > annulus.n1) & (nu <= annulus.n2)
    in_cluster = (lab.root == root) & inside
    if not in_cluster.any():
        return False
    # radial arm within the cluster
    inner_rim = inside & _touches_ball(d, annulus.center, annulus.n1)
    outer_rim = inside & _on_ball_inner_boundary(d, annulus.center, annulus.n2)
    comp = _masked_components(d, in_cluster)
    la = set(comp[inner_rim & (comp >= 0)].tolist())
    lb = set(comp[outer_rim & (comp >= 0)].tolist())
    if not (la & lb):
        return False
    # circuit within the cluster: no crossing of the annulus avoiding it
    not_cluster = inside & ~in_cluster
    return not _connects_mask(d, inside, inner_rim, outer_rim, not_cluster)


def _connects_mask(d: DenseRegion, allowed, a, b, m) -> bool:
    mm = m & allowed
    if not (mm & a).any() or not (mm & b).any():
        return False
    comp = _masked_components(d, mm)
    la = set(comp[a & (comp >= 0)].tolist())
    lb = set(comp[b & (comp >= 0)].tolist())
    return bool(la & lb)


# ---------------------------------------------------------------------------
# surrounding clusters and disjoint circuits


def surrounds_origin(members, region: Region) -> bool:
    """True iff 0 is in the set, or the set blocks every lattice path from 0
    to the inner boundary of the region."""
    d = dense_region(region)
    idx = _member_indices(d, members)
    origin = d.index_of((0, 0))
    if origin < 0:
        raise ValueError("origin not in region")
    blocked = np.zeros(d.size, bool)
    blocked[idx] = True
    if blocked[origin]:
        return True
    if not _semi_axis_filter(d, idx):
        return False
    seen = np.zeros(d.size, bool)
    seen[origin] = True
    boundary = np.zeros(d.size, bool)
    boundary[d.inner_boundary] = True
    q = deque([origin])
    while q:
        v = q.popleft()
        if boundary[v]:
            return False
        for w in d.neigh[v]:
            if w >= 0 and not blocked[w] and not seen[w]:
                seen[w] = True
                q.append(w)
    return True


def _member_indices(d: DenseRegion, members) -> np.ndarray:
    members = np.asarray(members)
    if members.ndim == 2:  # (x, y) pairs
        idx = d.indices_of(members.astype(np.int64))
        if (idx < 0).any():
            raise ValueError("member site outside region")
        return idx
    return members.astype(np.int64)


def _semi_axis_filter(d: DenseRegion, idx: np.ndarray) -> bool:
    """Necessary condition to surround 0: a circuit around 0 must contain
    vertices on all four semi-axes {y=0, x>0}, {y=0, x<0}, {x=0, y>0},
    {x=0, y<0} (closed curves cross those rays at lattice points)."""
    x = d.xy[idx, 0]
    y = d.xy[idx, 1]
    return bool(((y == 0) & (x > 0)).any() and ((y == 0) & (x < 0)).any()
                and ((x == 0) & (y > 0)).any() and ((x == 0) & (y < 0)).any())


def max_disjoint_circuits(members, region: Region) -> int:
    """Maximal number of vertex-disjoint circuits inside the member set that
    surround 0; by Menger duality on the triangular lattice this equals the
    minimum number of member sites on any path from 0 to d_in(region).

    Computed as a 0/1-weight shortest path (weight 1 on member sites).
    """
    d = dense_region(region)
    idx = _member_indices(d, members)
    origin = d.index_of((0, 0))
    if origin < 0:
        raise ValueError("origin not in region")
    weight = np.zeros(d.size, np.int8)
    weight[idx] = 1
    if weight[origin]:
        raise ValueError("origin belongs to the site set")
    target = np.zeros(d.size, bool)
    target[d.inner_boundary] = True
    return _zero_one_bfs(d.neigh, weight, origin, target)


def _zero_one_bfs(neigh: np.ndarray, weight: np.ndarray, origin: int,
                  target: np.ndarray) -> int:
    """Level-by-level 0/1 BFS: flood through weight-0 sites, collect weight-1
    frontier, repeat.  Returns the level at which a target is first reached."""
    try:
        from ._kernels import zero_one_bfs as kernel
        return int(kernel(neigh, weight, np.int64(origin), target))
    except ImportError:  # pragma: no cover - numba should be present
        pass
    K = len(weight)
    seen = np.zeros(K, bool)
    level = deque([origin])
    seen[origin] = True
    d = int(weight[origin])
    while level:
        nxt: list[int] = []
        q = level
        while q:
            v = q.popleft()
            if target[v]:
                return d
            for w in neigh[v]:
                if w < 0 or seen[w]:
                    continue
                seen[w] = True
                if weight[w]:
                    nxt.append(w)
                else:
                    q.append(w)
        level = deque(nxt)
        d += 1
    return d  # unreachable boundary: fully enclosed (should not happen)


def peeling_circuit_count(members, region: Region) -> int:
    """Oracle for max_disjoint_circuits: repeatedly flood-fill from 0 through
    non-member sites and peel the innermost adjacent member layer."""
    d = dense_region(region)
    idx = _member_indices(d, members)
    origin = d.index_of((0, 0))
    in_set = np.zeros(d.size, bool)
    in_set[idx] = True
    if in_set[origin]:
        raise ValueError("origin belongs to the site set")
    boundary = np.zeros(d.size, bool)
    boundary[d.inner_boundary] = True
    count = 0
    while True:
        seen = np.zeros(d.size, bool)
        seen[origin] = True
        q = deque([origin])
        layer = set()
        escaped = False
        while q:
            v = q.popleft()
            if boundary[v]:
                escaped = True
                break
            for w in d.neigh[v]:
                if w < 0 or seen[w]:
                    continue
                if in_set[w]:
                    layer.add(int(w))
                else:
                    seen[w] = True
                    q.append(w)
        if escaped or not layer:
            return count
        count += 1
        for w in layer:
            in_set[w] = False


# ---------------------------------------------------------------------------
# estimators


def wilson_ci(successes: int, n: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n == 0:
        return (0.0, 1.0)
    phat = successes / n
    denom = 1 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass
class ConnectionEstimate:
    n: int
    p: float
    samples: int
    successes: int

    @property
    def estimate(self) -> float:
        return self.successes / self.samples if self.samples else 0.0

    @property
    def ci(self) -> tuple[float, float]:
        return wilson_ci(self.successes, self.samples)


def estimate_connection(p: float, n: int, samples: int, seed: int,
                        replica: int = 0) -> ConnectionEstimate:
    """Monte Carlo estimate of P_p(0 <-> d_in B_n)."""
    if samples < 1:
        raise ValueError("samples >= 1 required")
    if p == 0.0:
        return ConnectionEstimate(n, p, samples, 0)
    if p == 1.0:
        return ConnectionEstimate(n, p, samples, samples)
    [est] = estimate_connection_profile(p, [n], samples, seed, replica)
    return est


def estimate_connection_profile(p: float, n_list: list[int], samples: int,
                                seed: int, replica: int = 0) -> list[ConnectionEstimate]:
    """Coupled estimates of P_p(0 <-> d_in B_n) for several n from shared
    configurations on the largest ball (one labeling per sample)."""
    n_list = sorted(set(int(n) for n in n_list))
    nmax = n_list[-1]
    d = dense_region(Ball(nmax))
    rows = d.xy[:, 1] - d.ymin
    cols = d.xy[:, 0] - d.xmin
    region_mask = np.zeros(d.shape, bool)
    region_mask[rows, cols] = True
    boundary_flat = {}
    for n in n_list:
        b = d.ball_inner_boundary(n)
        boundary_flat[n] = (rows[b].astype(np.int64) * d.shape[1] + cols[b])
    o_r, o_c = -d.ymin, -d.xmin
    gen = rnglib.bulk_generator(seed, replica, rnglib.ESTIMATOR)
    hits = {n: 0 for n in n_list}
    for _ in range(samples):
        occ = (gen.random(d.shape) < p) & region_mask
        if not occ[o_r, o_c]:
            continue
        lab, _ = ndimage.label(occ, structure=LABEL_STRUCTURE)
        lab0 = lab[o_r, o_c]
        flat = lab.ravel()
        for n in n_list:
            if (flat[boundary_flat[n]] == lab0).any():
                hits[n] += 1
    return [ConnectionEstimate(n, p, samples, hits[n]) for n in n_list]


def estimate_arm(n1: int, n2: int, samples: int, seed: int, p: float = 0.5,
                 color: str = "occupied", replica: int = 0) -> ConnectionEstimate:
    """Monte Carlo estimate of the one-arm annulus probability
    pi_1(n1, n2) = P_p(d_out B_n1 <-> d_in B_n2 inside the annulus)."""
    d = dense_region(Ball(n2))
    nu = d.norm
    inside = (nu > n1) & (nu <= n2)
    inner_rim = inside & _touches_ball(d, (0, 0), n1)
    outer_rim = inside & _on_ball_inner_boundary(d, (0, 0), n2)
    rows = d.xy[:, 1] - d.ymin
    cols = d.xy[:, 0] - d.xmin
    gen = rnglib.bulk_generator(seed, replica, rnglib.ESTIMATOR)
    g = np.zeros(d.shape, bool)
    hits = 0
    for _ in range(samples):
        u = gen.random(d.size)
        m = (u < p) if color == "occupied" else (u >= p)
        m &= inside
        g[:] = False
        g[rows[m], cols[m]] = True
        lab, _ = ndimage.label(g, structure=LABEL_STRUCTURE)
        la = lab[rows[m & inner_rim], cols[m & inner_rim]]
        lb = lab[rows[m & outer_rim], cols[m & outer_rim]]
        if np.intersect1d(la, lb).size:
            hits += 1
    return ConnectionEstimate(n2, p, samples, hits)


def estimate_pivotal(n: int, samples: int, seed: int, p: float = 0.5,
                     replica: int = 0) -> ConnectionEstimate:
    """Monte Carlo estimate of P_p(center pivotal for Ch(B_n))."""
    d = dense_region(Ball(n))
    rows = d.xy[:, 1] - d.ymin
    cols = d.xy[:, 0] - d.xmin
    region_mask = np.zeros(d.shape, bool)
    region_mask[rows, cols] = True
    re2 = 2 * d.xy[:, 0] + d.xy[:, 1]
    left_flat = (rows[re2 <= -2 * n + 2].astype(np.int64) * d.shape[1] + cols[re2 <= -2 * n + 2])
    right_flat = (rows[re2 >= 2 * n - 2].astype(np.int64) * d.shape[1] + cols[re2 >= 2 * n - 2])
    center = d.index_of((0, 0))
    c_r, c_c = rows[center], cols[center]
    nbr_flat = []
    for w in d.neigh[center]:
        if w >= 0:
            nbr_flat.append(rows[w].astype(np.int64) * d.shape[1] + cols[w])
    nbr_flat = np.array(nbr_flat, np.int64)
    gen = rnglib.bulk_generator(seed, replica, rnglib.ESTIMATOR)
    hits = 0
    for _ in range(samples):
        occ = (gen.random(d.shape) < p) & region_mask
        occ[c_r, c_c] = False
        lab, _ = ndimage.label(occ, structure=LABEL_STRUCTURE)
        flat = lab.ravel()
        la = flat[left_flat]
        lb = flat[right_flat]
        la = la[la > 0]
        lb = lb[lb > 0]
        if np.intersect1d(la, lb).size:
            continue  # crossing even without the center
        adj = flat[nbr_flat]
        adj = np.unique(adj[adj > 0])
        if adj.size and np.intersect1d(adj, la).size and np.intersect1d(adj, lb).size:
            hits += 1
    return ConnectionEstimate(n, p, samples, hits)


# --- crossing-probability estimation on rectangles and lozenges -----------


class RectGrid:
    """Precomputed site grid of an embedded rectangle, with side strips."""

    def __init__(self, rect: Rect):
        self.rect = rect
        ys = []
        y = math.floor(2 * rect.y1 / math.sqrt(3)) - 2
        ytop = math.ceil(2 * rect.y2 / math.sqrt(3)) + 2
        from .lattice import im_ge, im_le
        for yy in range(y, ytop + 1):
            if im_ge(yy, rect.y1) and im_le(yy, rect.y2):
                ys.append(yy)
        if not ys:
            raise ValueError("rectangle contains no lattice rows")
        self.ys = ys
        x_ranges = []
        ix1, ix2 = round(2 * rect.x1), round(2 * rect.x2)
        exact_x = (ix1 == 2 * rect.x1) and (ix2 == 2 * rect.x2)
        for yy in ys:
            if exact_x:  # 2x + y in [2*x1, 2*x2], integer arithmetic
                lo = -((yy - ix1) // 2)
                hi = (ix2 - yy) // 2
            else:
                lo = math.ceil(rect.x1 - yy / 2.0 - 1e-12)
                hi = math.floor(rect.x2 - yy / 2.0 + 1e-12)
            x_ranges.append((lo, hi))
        self.x_ranges = x_ranges
        xmin = min(lo for lo, hi in x_ranges)
        xmax = max(hi for lo, hi in x_ranges)
        nrows, ncols = len(ys), xmax - xmin + 1
        self.shape = (nrows, ncols)
        self.xmin = xmin
        mask = np.zeros(self.shape, bool)
        for r, (lo, hi) in enumerate(x_ranges):
            mask[r, lo - xmin: hi - xmin + 1] = True
        self.mask = mask
        # side strips (within L-inf distance 1)
        yv = np.array(ys, np.int64)[:, None]
        xv = np.arange(xmin, xmax + 1, dtype=np.int64)[None, :]
        re = xv + 0.5 * yv
        im = yv * (math.sqrt(3) / 2.0) * np.ones_like(re)
        self.left = mask & (re <= rect.x1 + 1 + 1e-12)
        self.right = mask & (re >= rect.x2 - 1 - 1e-12)
        self.bottom = mask & (im <= rect.y1 + 1 + 1e-12)
        self.top = mask & (im >= rect.y2 - 1 - 1e-12)

    def crossing_sample(self, gen: np.random.Generator, p: float,
                        direction: str, color: str) -> bool:
        occ = gen.random(self.shape) < p
        m = (occ if color == "occupied" else ~occ) & self.mask
        a, b = (self.left, self.right) if direction == "horizontal" else (self.bottom, self.top)
        if not (m & a).any() or not (m & b).any():
            return False
        lab, _ = ndimage.label(m, structure=LABEL_STRUCTURE)
        la = np.unique(lab[m & a])
        lb = np.unique(lab[m & b])
        return bool(np.intersect1d(la, lb, assume_unique=True).size)


def estimate_crossing(rect: Rect, p: float, direction: str, color: str,
                      samples: int, seed: int, replica: int = 0) -> ConnectionEstimate:
    grid = RectGrid(rect)
    gen = rnglib.bulk_generator(seed, replica, rnglib.ESTIMATOR)
    hits = sum(grid.crossing_sample(gen, p, direction, color) for _ in range(samples))
    return ConnectionEstimate(0, p, samples, hits)


def lozenge_crossing_probability(k: int, p: float, samples: int, seed: int,
                                 color: str = "occupied",
                                 direction: str = "horizontal",
                                 replica: int = 0) -> ConnectionEstimate:
    """Estimated probability of a lattice-coordinate crossing of the k x k lozenge."""
    gen = rnglib.bulk_generator(seed, replica, rnglib.ESTIMATOR)
    hits = 0
    for _ in range(samples):
        occ = gen.random((k, k)) < p
        m = occ if color == "occupied" else ~occ
        lab, _ = ndimage.label(m, structure=LABEL_STRUCTURE)
        if direction == "horizontal":
            la, lb = lab[:, 0], lab[:, -1]
        else:
            la, lb = lab[0, :], lab[-1, :]
        la = np.unique(la[la > 0])
        lb = np.unique(lb[lb > 0])
        if np.intersect1d(la, lb, assume_unique=True).size:
            hits += 1
    return ConnectionEstimate(k, p, samples, hits)


def lozenge_duality_exhaustive(k: int) -> bool:
    """Check, over ALL 2^(k^2) configurations of the k x k lozenge, that the
    occupied left-right crossing holds iff the vacant top-bottom crossing
    fails.  Returns True when the XOR holds for every configuration."""
    ncfg = 1 << (k * k)
    cells = k * k
    bits = (np.arange(ncfg, dtype=np.uint32)[:, None] >> np.arange(cells, dtype=np.uint32)[None, :]) & 1
    configs = bits.astype(bool).reshape(ncfg, k, k)  # [cfg, y, x]
    # tile into one big image with vacant gutters; labels stay per-block
    per_row = int(math.ceil(math.sqrt(ncfg)))
    rows_n = int(math.ceil(ncfg / per_row))
    big_occ = np.zeros((rows_n * (k + 2), per_row * (k + 2)), bool)
    big_vac = np.zeros_like(big_occ)
    for i in range(ncfg):
        r, c = divmod(i, per_row)
        sl = (slice(r * (k + 2) + 1, r * (k + 2) + 1 + k), slice(c * (k + 2) + 1, c * (k + 2) + 1 + k))
        big_occ[sl] = configs[i]
        big_vac[sl] = ~configs[i]
    lab_o, _ = ndimage.label(big_occ, structure=LABEL_STRUCTURE)
    lab_v, _ = ndimage.label(big_vac, structure=LABEL_STRUCTURE)
    for i in range(ncfg):
        r, c = divmod(i, per_row)
        r0, c0 = r * (k + 2) + 1, c * (k + 2) + 1
        lo = lab_o[r0:r0 + k, c0:c0 + k]
        lv = lab_v[r0:r0 + k, c0:c0 + k]
        la = set(lo[:, 0][lo[:, 0] > 0].tolist())
        lb = set(lo[:, -1][lo[:, -1] > 0].tolist())
        occ_lr = bool(la & lb)
        va = set(lv[0, :][lv[0, :] > 0].tolist())
        vb = set(lv[-1, :][lv[-1, :] > 0].tolist())
        vac_tb = bool(va & vb)
        if occ_lr == vac_tb:
            return False
    return True
