"""Percolation with heavy-tailed impurities: sampling configurations with
holes, the subcritical-cluster radius distribution, the product bound check
(hole probability times radius tail), crossing-hole detection, and the
monotone-functional comparison against truncated forest fires.

The forest-fire instantiation uses the hole probability
pi = t_c * zeta * exp(t_c * zeta) and the law of rad(C(0)) in Bernoulli
percolation with parameter p(tau), tau uniform in [0, t_c - eps_bar]
("parameter tau" is read as a time; see the package notes).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import rng as rnglib
from . import scales
from .lattice import (Ball, Annulus, Region, ball_norm, ball_norm_arr,
                      dense_region, region_sites, region_volume,
                      NEIGHBOR_OFFSETS)
from .percolation import Configuration, sample_bernoulli


@dataclass
class HoleSet:
    centers: np.ndarray   # (H, 2) int64
    radii: np.ndarray     # (H,) int64
    truncation_radius: int
    truncation_probability: float

    def __len__(self) -> int:
        return len(self.radii)


@dataclass
class ImpuritySpec:
    """Hole model: per-site hole probability and a radius distribution given
    by its tail function plus a sampler (inverse-CDF of an empirical sample
    or an analytic law).  ``max_radius`` bounds the support when finite."""

    m: float
    pi: float
    tail: "callable"                 # r -> rho([r, inf)); tail(0) = 1
    quantile: "callable"             # u in [0,1) -> radius (inverse CDF)
    max_radius: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.pi <= 1.0:
            raise ValueError("hole probability must be in [0, 1]")

    @classmethod
    def dirac0(cls, pi: float, m: float = 1.0) -> "ImpuritySpec":
        """Single-site holes: Bernoulli percolation with a lower parameter."""
        return cls(m=m, pi=pi, tail=lambda r: 1.0 if r <= 0 else 0.0,
                   quantile=lambda u: 0.0, max_radius=0.0)

    @classmethod
    def from_radii(cls, pi: float, m: float, radii: np.ndarray) -> "ImpuritySpec":
        """Empirical radius law from a sample (e.g. rad(C(0)) draws)."""
        srt = np.sort(np.asarray(radii, np.int64))
        n = len(srt)
        if n == 0:
            raise ValueError("empty radius sample")

        def tail(r: float) -> float:
            return float((srt >= r).sum()) / n

        def quantile(u: float) -> float:
            return float(srt[min(int(u * n), n - 1)])

        return cls(m=m, pi=pi, tail=tail, quantile=quantile,
                   max_radius=float(srt[-1]))


def forest_fire_hole_probability(zeta: float) -> float:
    """pi = t_c * zeta * exp(t_c * zeta), the per-site probability that a
    site is the center of an early fire scar."""
    x = scales.T_C * zeta
    return x * math.exp(x)


# ---------------------------------------------------------------------------
# radius distribution of subcritical clusters


@dataclass
class RadiusSample:
    radii: np.ndarray          # observed rad(C(0)) values (cap included)
    truncated: int             # samples that hit the cap
    cap: int

    def tail(self, r: float) -> float:
        return float((self.radii >= r).sum()) / len(self.radii)

    def tail_table(self, r_grid) -> list[tuple[float, float]]:
        return [(float(r), self.tail(r)) for r in r_grid]


def rho_from_subcritical_cluster(eps_bar: float, r_cut: int, samples: int,
                                 seed: int, replica: int = 0) -> RadiusSample:
    """Sample rad(C(0)) in Bernoulli percolation at p(tau), tau uniform in
    [0, t_c - eps_bar]; cluster growth is lazy (only touched sites are
    sampled), and samples escaping B_{r_cut} are capped and counted."""
    if not 0.0 < eps_bar < scales.T_C:
        raise ValueError("eps_bar must be in (0, t_c)")
    if r_cut < 1:
        raise ValueError("r_cut must be >= 1")
    tau_seed = rnglib.replica_seed(seed, replica, rnglib.TAU)
    occ_seed = rnglib.replica_seed(seed, replica, rnglib.BERNOULLI)
    radii = np.empty(samples, np.int64)
    truncated = 0
    for k in range(samples):
        u = (rnglib.mix64(tau_seed, k) >> 11) * 2.0 ** -53
        p = 1.0 - math.exp(-u * (scales.T_C - eps_bar))
        rad, hit_cap = _lazy_cluster_radius(occ_seed, k, p, r_cut)
        radii[k] = rad
        truncated += hit_cap
    return RadiusSample(radii, truncated, r_cut)


def _lazy_cluster_radius(occ_seed: int, sample_index: int, p: float,
                         r_cut: int) -> tuple[int, bool]:
    states: dict[tuple[int, int], bool] = {}
    threshold = int(p * 2.0 ** 53)

    def occupied(v) -> bool:
        if v not in states:
            h = rnglib.mix64(occ_seed, v[0], v[1], sample_index)
            states[v] = (h >> 11) < threshold
        return states[v]

    if not occupied((0, 0)):
        return 0, False
    seen = {(0, 0)}
    q = deque([(0, 0)])
    rad = 0
    while q:
        x, y = q.popleft()
        for dx, dy in NEIGHBOR_OFFSETS:
            w = (x + dx, y + dy)
            if w in seen or not occupied(w):
                continue
            nu = ball_norm(*w)
            if nu > r_cut:
                return r_cut, True
            seen.add(w)
            rad = max(rad, nu)
            q.append(w)
    return rad, False


def forest_fire_impurity_spec(zeta: float, eps_bar: float, m: float, samples: int = 4000,
               seed: int = 0, r_cut: int | None = None) -> ImpuritySpec:
    """The forest-fire impurity instantiation: pi from the ignition rate and
    the radius law of subcritical clusters truncated at r_cut (default 64 m)."""
    if r_cut is None:
        r_cut = max(8, int(64 * m))
    rs = rho_from_subcritical_cluster(eps_bar, r_cut, samples, seed)
    return ImpuritySpec.from_radii(forest_fire_hole_probability(zeta), m, rs.radii)


# ---------------------------------------------------------------------------
# sampling configurations with holes


def sample_holes(region: Region, spec: ImpuritySpec, seed: int,
                 replica: int = 0, tiny: float = 1e-12) -> HoleSet:
    """Sample the hole field alone: centers flagged with probability pi on a
    padded ball around the region, radii drawn i.i.d. from the radius law
    (independent streams).  The padding is the smallest radius at which the
    expected number of truncated influential holes is below ``tiny``."""
    d = dense_region(region)
    bounding = int(ball_norm_arr(d.xy[:, 0], d.xy[:, 1]).max())
    pad = _padding_radius(spec, bounding, tiny)
    trunc_prob = spec.pi * spec.tail(pad) * region_volume(Ball(bounding + pad))
    if spec.pi == 0.0:
        return HoleSet(np.empty((0, 2), np.int64), np.empty(0, np.int64), pad, trunc_prob)
    padded = dense_region(Ball(bounding + pad))
    flag_seed = rnglib.replica_seed(seed, replica, rnglib.HOLE_FLAG)
    rad_seed = rnglib.replica_seed(seed, replica, rnglib.HOLE_RADIUS)
    u = rnglib.site_uniform(flag_seed, padded.xy[:, 0], padded.xy[:, 1])
    flagged = np.nonzero(u < spec.pi)[0]
    centers = padded.xy[flagged]
    ur = rnglib.site_uniform(rad_seed, centers[:, 0], centers[:, 1])
    radii = np.array([int(spec.quantile(float(x))) for x in ur], np.int64)
    return HoleSet(centers, radii, pad, trunc_prob)


def sample_impurity_percolation(region: Region, p: float, spec: ImpuritySpec,
                                seed: int, replica: int = 0,
                                tiny: float = 1e-12):
    """Bernoulli(p) outside the union of holes, vacant inside.

    The base Bernoulli field uses the same stream as sample_bernoulli, so
    pi = 0 reproduces it bit for bit.
    """
    d = dense_region(region)
    config = sample_bernoulli(region, p, rnglib.replica_seed(seed, replica, rnglib.BERNOULLI))
    holes = sample_holes(region, spec, seed, replica, tiny)
    centers, radii = holes.centers, holes.radii
    if len(centers):
        vac = np.zeros(d.size, bool)
        for (cx, cy), r in zip(centers, radii):
            if r == 0:
                i = d.index_of((int(cx), int(cy)))
                if i >= 0:
                    vac[i] = True
                continue
            nu = ball_norm_arr(d.xy[:, 0] - cx, d.xy[:, 1] - cy)
            vac |= nu <= r
        config.states[vac] = 0
        config.invalidate()
    return config, holes


def _padding_radius(spec: ImpuritySpec, bounding: int, tiny: float) -> int:
    if spec.max_radius is not None:
        return int(spec.max_radius)
    pad = 1
    while pad < 10 ** 7:
        vol = region_volume(Ball(bounding + pad))
        if spec.pi * spec.tail(pad) * vol < tiny:
            return pad
        pad *= 2
    raise ValueError("radius tail is too heavy to normalize a padding")


# ---------------------------------------------------------------------------
# Assumption-1 product bound


@dataclass
class AssumptionReport:
    c: float
    gamma: float
    m: float
    upsilon_fit: float                  # smallest upsilon making the bound hold
    per_r: list[tuple[float, float]]    # (r, implied upsilon at r)
    violations: list[float] = field(default_factory=list)


def check_assumption(pi: float, tail, m: float, c: float, gamma: float,
                     r_grid, upsilon_assumed: float | None = None) -> AssumptionReport:
    """Fit the smallest upsilon with
    pi * tail(r) <= (upsilon/m^2) ((r v 1)/m)^(gamma-2) exp(-c r/m) on the
    grid; optionally report grid points violating an assumed upsilon."""
    r_grid = list(r_grid)
    if not r_grid:
        raise ValueError("empty grid")
    if not 1.0 < gamma < 2.0:
        raise ValueError("gamma must be in (1, 2)")
    per_r = []
    for r in r_grid:
        bound_shape = (max(r, 1.0) / m) ** (gamma - 2.0) * math.exp(-c * r / m) / (m * m)
        implied = pi * tail(r) / bound_shape
        per_r.append((float(r), float(implied)))
    ups = max(v for _, v in per_r)
    violations = []
    if upsilon_assumed is not None:
        violations = [r for r, v in per_r if v > upsilon_assumed]
    return AssumptionReport(c, gamma, m, ups, per_r, violations)


# ---------------------------------------------------------------------------
# crossing holes


def _ring_outer(center, n: int) -> np.ndarray:
    """d_out B_n(center): sites outside the ball adjacent to it."""
    ring = region_sites(Annulus(n, n + 1, center))
    keep = np.zeros(len(ring), bool)
    cx, cy = center
    for dx, dy in NEIGHBOR_OFFSETS:
        keep |= ball_norm_arr(ring[:, 0] + dx - cx, ring[:, 1] + dy - cy) <= n
    return ring[keep]


def _ring_inner(center, n: int) -> np.ndarray:
    """d_in B_n(center): ball sites adjacent to the complement."""
    if n == 0:
        return np.array([center], np.int64)
    ring = region_sites(Annulus(n - 1, n, center))
    keep = np.zeros(len(ring), bool)
    cx, cy = center
    for dx, dy in NEIGHBOR_OFFSETS:
        keep |= ball_norm_arr(ring[:, 0] + dx - cx, ring[:, 1] + dy - cy) > n
    return ring[keep]


def _min_norm_to(points: np.ndarray, v) -> int:
    return int(ball_norm_arr(points[:, 0] - v[0], points[:, 1] - v[1]).min())


def _max_norm_to(points: np.ndarray, v) -> int:
    return int(ball_norm_arr(points[:, 0] - v[0], points[:, 1] - v[1]).max())


def detect_crossing_hole(holes: HoleSet, annulus: Annulus,
                         variant: str = "H") -> bool:
    """Crossing-hole events for an annulus A_{n1,n2}(z).

    'H': some hole meets both d_out B_n1(z) and d_in B_n2(z).
    'Hbb': additionally the hole does not contain B_n1(z) and does not meet
    d_in B_{2 n2}(z).
    """
    if variant not in ("H", "Hbb"):
        raise ValueError("variant must be 'H' or 'Hbb'")
    n1, n2, z = annulus.n1, annulus.n2, annulus.center
    if len(holes) == 0:
        return False
    out1 = _ring_outer(z, n1)
    in2 = _ring_inner(z, n2)
    if variant == "Hbb":
        in1_full = region_sites(Ball(n1, z))
        in2b = _ring_inner(z, 2 * n2)
    dist_c = ball_norm_arr(holes.centers[:, 0] - z[0], holes.centers[:, 1] - z[1])
    for i in range(len(holes)):
        r = int(holes.radii[i])
        v = (int(holes.centers[i, 0]), int(holes.centers[i, 1]))
        # cheap triangle-inequality rejects
        if abs(int(dist_c[i]) - (n1 + 1)) > r or abs(int(dist_c[i]) - n2) > r:
            continue
        if _min_norm_to(out1, v) > r or _min_norm_to(in2, v) > r:
            continue
        if variant == "H":
            return True
        contains_inner = _max_norm_to(in1_full, v) <= r
        touches_2n2 = _min_norm_to(in2b, v) <= r
        if not contains_inner and not touches_2n2:
            return True
    return False


# ---------------------------------------------------------------------------
# monotone-functional comparison with truncated forest fires


@dataclass
class FunctionalComparison:
    name: str
    ff_mean: float
    imp_mean: float
    pooled_sigma: float

    @property
    def gap(self) -> float:
        """FF estimate minus impurity estimate (>= -3 sigma expected)."""
        return self.ff_mean - self.imp_mean


def domination_experiment(region: Region, t: float, eps_bar: float,
                          zeta: float, spec: ImpuritySpec, samples: int,
                          seed: int, arm_radius: int | None = None) -> list[FunctionalComparison]:
    """Estimate monotone functionals under the truncated forest fire
    sigma^[t_c - eps_bar] at time t and under the impurity process at p(t);
    the fire scars lower connectivity at most as much as independent holes
    do, so the FF estimates should dominate (up to noise)."""
    from .dynamics import run_ffwor
    from .percolation import label_clusters

    if t < scales.T_C - eps_bar:
        raise ValueError("need t >= t_c - eps_bar")
    d = dense_region(region)
    nmax = int(d.norm.max())
    if arm_radius is None:
        arm_radius = max(2, nmax // 2)
    rim = d.ball_inner_boundary(arm_radius)
    origin = d.index_of((0, 0))
    p = scales.p_of_t(t)
    # crossing of a centered sub-rectangle, third monotone functional
    w = max(2, arm_radius)
    re2 = 2 * d.xy[:, 0] + d.xy[:, 1]
    im_ok = 3 * d.xy[:, 1] ** 2 <= w * w  # |Im| <= w/2 roughly, exact enough
    rect_in = (np.abs(re2) <= 2 * w) & im_ok
    rect_l = rect_in & (re2 <= -2 * w + 2)
    rect_r = rect_in & (re2 >= 2 * w - 2)
    names = ["occupied_fraction", "subrect_crossing", f"origin_to_ball_{arm_radius}"]
    ff_vals = {k: [] for k in names}
    imp_vals = {k: [] for k in names}

    def functionals(states: np.ndarray, sink: dict):
        occ = states == 1
        sink["occupied_fraction"].append(occ.mean())
        cfg = Configuration(d, np.where(occ, 1, 0).astype(np.int8))
        lab = label_clusters(cfg)
        la = lab.root[rect_l & occ]
        lb = lab.root[rect_r & occ]
        sink["subrect_crossing"].append(
            float(bool(np.intersect1d(la, lb).size)))
        if not occ[origin]:
            sink[f"origin_to_ball_{arm_radius}"].append(0.0)
        else:
            hit = (lab.root[rim] == lab.root[origin]).any()
            sink[f"origin_to_ball_{arm_radius}"].append(float(hit))

    for k in range(samples):
        final, _ = run_ffwor(region, zeta, horizon=t, seed=seed, replica=k,
                             ignition_truncation=scales.T_C - eps_bar)
        functionals(final.states, ff_vals)
        cfg, _ = sample_impurity_percolation(region, p, spec, seed + 1, replica=k)
        functionals(cfg.states, imp_vals)

    out = []
    for name in names:
        a = np.array(ff_vals[name])
        b = np.array(imp_vals[name])
        sigma = math.sqrt((a.var(ddof=1) + b.var(ddof=1)) / samples + 1e-30)
        out.append(FunctionalComparison(name, float(a.mean()), float(b.mean()), sigma))
    return out
