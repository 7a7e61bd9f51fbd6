"""Exact integer geometry of the triangular lattice.

Sites are pairs (x, y) of integers, embedded in the plane as x + y*e^{i pi/3},
i.e. Re = x + y/2 and Im = y*sqrt(3)/2.  All region membership tests are done
in integer arithmetic (the irrational coordinate is compared after squaring),
so membership never depends on floating-point rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

# the 6 neighbors of the origin, fixed order
NEIGHBOR_OFFSETS = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1))

SQRT3 = math.sqrt(3.0)
# |B_n| / n^2 -> 8/sqrt(3): rows spaced sqrt(3)/2 apart, 2n+O(1) sites per row
BALL_DENSITY = 8.0 / SQRT3


def neighbors(v: tuple[int, int]) -> list[tuple[int, int]]:
    """The 6 lattice neighbors of v, in the fixed offset order."""
    x, y = v
    return [(x + dx, y + dy) for dx, dy in NEIGHBOR_OFFSETS]


def embed(v: tuple[int, int]) -> tuple[float, float]:
    x, y = v
    return (x + 0.5 * y, y * (SQRT3 / 2.0))


def _y_in_band(y: int, n: int) -> bool:
    # |y| * sqrt(3)/2 <= n  <=>  3 y^2 <= 4 n^2
    return 3 * y * y <= 4 * n * n


def _y_max(n: int) -> int:
    """Largest y with y*sqrt(3)/2 <= n, by exact integer test."""
    y = int(2 * n / SQRT3)
    while _y_in_band(y + 1, n):
        y += 1
    while y > 0 and not _y_in_band(y, n):
        y -= 1
    return y


def in_ball(x: int, y: int, n: int) -> bool:
    """v in B_n = [-n,n]^2 under the embedding, exact integer test."""
    if n < 0:
        return False
    return abs(2 * x + y) <= 2 * n and 3 * y * y <= 4 * n * n


def ball_norm(x: int, y: int) -> int:
    """Smallest n with (x, y) in B_n."""
    n1 = (abs(2 * x + y) + 1) // 2
    n2 = math.isqrt((3 * y * y + 3) // 4)
    while 4 * n2 * n2 < 3 * y * y:
        n2 += 1
    return max(n1, n2)


def ball_norm_arr(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Vectorized ball_norm; float seed then exact integer fix-up."""
    x = np.asarray(x, np.int64)
    y = np.asarray(y, np.int64)
    n1 = (np.abs(2 * x + y) + 1) // 2
    n2 = np.floor(np.abs(y) * (SQRT3 / 2.0)).astype(np.int64)
    n2 = np.maximum(n2 - 1, 0)
    for _ in range(3):
        bad = 4 * n2 * n2 < 3 * y * y
        if not bad.any():
            break
        n2[bad] += 1
    return np.maximum(n1, n2)


# ---------------------------------------------------------------------------
# regions


@dataclass(frozen=True)
class Ball:
    n: int
    center: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("Ball radius must be >= 0")


@dataclass(frozen=True)
class Annulus:
    n1: int
    n2: int
    center: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if not 0 <= self.n1 < self.n2:
            raise ValueError("Annulus requires 0 <= n1 < n2")


@dataclass(frozen=True)
class Lozenge:
    """The k x k parallelogram {0 <= x < k, 0 <= y < k} in lattice coordinates."""

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("Lozenge size must be >= 1")


@dataclass(frozen=True)
class Explicit:
    sites: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(sorted(set(self.sites), key=lambda v: (v[1], v[0]))))


Region = Ball | Annulus | Lozenge | Explicit


def contains(region: Region, v: tuple[int, int]) -> bool:
    """Exact membership test."""
    x, y = v
    if isinstance(region, Ball):
        cx, cy = region.center
        return in_ball(x - cx, y - cy, region.n)
    if isinstance(region, Annulus):
        cx, cy = region.center
        return in_ball(x - cx, y - cy, region.n2) and not in_ball(x - cx, y - cy, region.n1)
    if isinstance(region, Lozenge):
        return 0 <= x < region.k and 0 <= y < region.k
    if isinstance(region, Explicit):
        return (x, y) in set(region.sites)
    raise TypeError(f"not a region: {region!r}")


def region_sites(region: Region) -> np.ndarray:
    """All member sites as an (K, 2) int64 array in canonical (y, x) order."""
    if isinstance(region, Ball):
        cx, cy = region.center
        n = region.n
        rows = []
        for y in range(-_y_max(n), _y_max(n) + 1):
            lo = -((2 * n + y) // 2)
            hi = (2 * n - y) // 2
            xs = np.arange(lo, hi + 1, dtype=np.int64)
            rows.append(np.stack([xs + cx, np.full(xs.shape, y + cy, np.int64)], axis=1))
        return np.concatenate(rows) if rows else np.empty((0, 2), np.int64)
    if isinstance(region, Annulus):
        outer = region_sites(Ball(region.n2, region.center))
        cx, cy = region.center
        rel_x = outer[:, 0] - cx
        rel_y = outer[:, 1] - cy
        keep = ~in_ball_arr(rel_x, rel_y, region.n1)
        return outer[keep]
    if isinstance(region, Lozenge):
        k = region.k
        ys, xs = np.divmod(np.arange(k * k, dtype=np.int64), k)
        return np.stack([xs, ys], axis=1)
    if isinstance(region, Explicit):
        return np.array(region.sites, np.int64).reshape(-1, 2)
    raise TypeError(f"not a region: {region!r}")


def in_ball_arr(x: np.ndarray, y: np.ndarray, n: int) -> np.ndarray:
    return (np.abs(2 * x + y) <= 2 * n) & (3 * y * y <= 4 * n * n)


def region_volume(region: Region) -> int:
    return len(region_sites(region))


# ---------------------------------------------------------------------------
# dense index maps


class DenseRegion:
    """A region materialized to dense indices 0..K-1 plus a grid embedding.

    The grid uses array coordinates (row = y - ymin, col = x - xmin); index
    -1 in ``grid`` marks non-member cells.  ``neigh`` is a (K, 6) table of
    neighbor dense indices with -1 for neighbors outside the region.
    """

    def __init__(self, region: Region):
        self.region = region
        xy = region_sites(region)
        self.xy = xy
        self.size = len(xy)
        if self.size == 0:
            raise ValueError("empty region")
        self.xmin = int(xy[:, 0].min())
        self.ymin = int(xy[:, 1].min())
        ncols = int(xy[:, 0].max()) - self.xmin + 1
        nrows = int(xy[:, 1].max()) - self.ymin + 1
        self.shape = (nrows, ncols)
        grid = np.full((nrows, ncols), -1, np.int32)
        grid[xy[:, 1] - self.ymin, xy[:, 0] - self.xmin] = np.arange(self.size, dtype=np.int32)
        self.grid = grid
        neigh = np.full((self.size, 6), -1, np.int32)
        for j, (dx, dy) in enumerate(NEIGHBOR_OFFSETS):
            rr = xy[:, 1] - self.ymin + dy
            cc = xy[:, 0] - self.xmin + dx
            ok = (rr >= 0) & (rr < nrows) & (cc >= 0) & (cc < ncols)
            vals = np.full(self.size, -1, np.int32)
            vals[ok] = grid[rr[ok], cc[ok]]
            neigh[:, j] = vals
        self.neigh = neigh
        self._norm = None
        self._inner_boundary = None

    def index_of(self, v: tuple[int, int]) -> int:
        x, y = v
        r, c = y - self.ymin, x - self.xmin
        if not (0 <= r < self.shape[0] and 0 <= c < self.shape[1]):
            return -1
        return int(self.grid[r, c])

    def indices_of(self, xy: np.ndarray) -> np.ndarray:
        rr = xy[:, 1] - self.ymin
        cc = xy[:, 0] - self.xmin
        out = np.full(len(xy), -1, np.int32)
        ok = (rr >= 0) & (rr < self.shape[0]) & (cc >= 0) & (cc < self.shape[1])
        out[ok] = self.grid[rr[ok], cc[ok]]
        return out

    @property
    def norm(self) -> np.ndarray:
        """Ball norm of every site, relative to the origin (0, 0)."""
        if self._norm is None:
            self._norm = ball_norm_arr(self.xy[:, 0], self.xy[:, 1])
        return self._norm

    @property
    def inner_boundary(self) -> np.ndarray:
        """Dense indices of sites adjacent to the complement of the region."""
        if self._inner_boundary is None:
            self._inner_boundary = np.nonzero((self.neigh < 0).any(axis=1))[0].astype(np.int32)
        return self._inner_boundary

    def ball_inner_boundary(self, n: int, center=(0, 0)) -> np.ndarray:
        """Dense indices of sites in partial-ball boundary d_in B_n(center).

        Only meaningful when B_n(center) is a subset of this region.
        """
        cx, cy = center
        rel_x = self.xy[:, 0] - cx
        rel_y = self.xy[:, 1] - cy
        nu = ball_norm_arr(rel_x, rel_y)
        cand = np.nonzero(nu == n)[0]
        hit = np.zeros(len(cand), bool)
        for j, (dx, dy) in enumerate(NEIGHBOR_OFFSETS):
            hit |= ball_norm_arr(rel_x[cand] + dx, rel_y[cand] + dy) > n
        return cand[hit].astype(np.int32)


@lru_cache(maxsize=8)
def dense_region(region: Region) -> DenseRegion:
    return DenseRegion(region)


# ---------------------------------------------------------------------------
# boundary operators


def _site_set(xy: np.ndarray) -> set[tuple[int, int]]:
    return {(int(x), int(y)) for x, y in xy}


def boundary(a, which: str):
    """Boundary operators on a finite site set (or region).

    which: 'outer' (d_out), 'inner' (d_in), 'outer_external' (d_out^inf),
    'inner_external' (d_in^inf), 'edge_external' (d_e^inf, returns edges).
    External variants flood-fill the complement inside a bounding box padded
    by 2 layers; this is exact because the infinite component of the
    complement always meets the padding for any finite set.
    """
    xy = a if isinstance(a, np.ndarray) else region_sites(a)
    members = _site_set(xy)
    if which == "outer":
        out = set()
        for x, y in members:
            for w in neighbors((x, y)):
                if w not in members:
                    out.add(w)
        return _sorted_xy(out)
    if which == "inner":
        out = set()
        for v in members:
            if any(w not in members for w in neighbors(v)):
                out.add(v)
        return _sorted_xy(out)
    if which in ("outer_external", "inner_external", "edge_external"):
        inf_comp = _infinite_complement(members, xy)
        if which == "outer_external":
            out = {v for v in _outer_set(members) if v in inf_comp}
            return _sorted_xy(out)
        if which == "inner_external":
            out = set()
            for v in members:
                if any(w in inf_comp for w in neighbors(v)):
                    out.add(v)
            return _sorted_xy(out)
        edges = []
        for v in members:
            for w in neighbors(v):
                if w in inf_comp:
                    edges.append((v, w))
        edges.sort(key=lambda e: (e[0][1], e[0][0], e[1][1], e[1][0]))
        return edges
    raise ValueError(f"unknown boundary kind {which!r}")


def _outer_set(members: set[tuple[int, int]]) -> set[tuple[int, int]]:
    out = set()
    for v in members:
        for w in neighbors(v):
            if w not in members:
                out.add(w)
    return out


def _infinite_complement(members, xy) -> set[tuple[int, int]]:
    """Complement sites, within a padded bounding box, connected to infinity."""
    pad = 2
    xmin, xmax = int(xy[:, 0].min()) - pad, int(xy[:, 0].max()) + pad
    ymin, ymax = int(xy[:, 1].min()) - pad, int(xy[:, 1].max()) + pad

    def inside(v):
        return xmin <= v[0] <= xmax and ymin <= v[1] <= ymax

    seen: set[tuple[int, int]] = set()
    stack = []
    for x in range(xmin, xmax + 1):
        for y in (ymin, ymax):
            if (x, y) not in members:
                stack.append((x, y))
    for y in range(ymin, ymax + 1):
        for x in (xmin, xmax):
            if (x, y) not in members:
                stack.append((x, y))
    while stack:
        v = stack.pop()
        if v in seen or v in members or not inside(v):
            continue
        seen.add(v)
        stack.extend(neighbors(v))
    return seen


def _sorted_xy(s) -> np.ndarray:
    if not s:
        return np.empty((0, 2), np.int64)
    return np.array(sorted(s, key=lambda v: (v[1], v[0])), np.int64)


# ---------------------------------------------------------------------------
# exact comparisons for embedded rectangles


def im_le(y: int, c: float) -> bool:
    """Exact test y*sqrt(3)/2 <= c for integer y and integer/half-integer c."""
    c2 = round(2 * c)
    if c2 != 2 * c:
        return y * (SQRT3 / 2.0) <= c
    # y*sqrt(3) <= c2  with integer y, c2
    if y <= 0:
        if c2 >= 0:
            return True
        return 3 * y * y >= c2 * c2
    if c2 < 0:
        return False
    return 3 * y * y <= c2 * c2


def im_ge(y: int, c: float) -> bool:
    return im_le(-y, -c)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle [x1, x2] x [y1, y2] in embedded coordinates."""

    x1: float
    x2: float
    y1: float
    y2: float

    def __post_init__(self):
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError("degenerate rectangle")

    def contains_site(self, v: tuple[int, int]) -> bool:
        x, y = v
        re2 = 2 * x + y  # 2*Re, integer
        if not (2 * self.x1 <= re2 <= 2 * self.x2):
            return False
        return im_ge(y, self.y1) and im_le(y, self.y2)
