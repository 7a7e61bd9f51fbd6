"""Avalanche statistics over event logs: counts of frozen/burnt clusters
surrounding the origin, disjoint frozen circuits, volume windows, and
order-independent aggregation of replica reports."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import scales
from .lattice import Region, dense_region
from .dynamics import EventLog, EV_FREEZE
from .percolation import _semi_axis_filter, max_disjoint_circuits


@dataclass
class SurroundingCluster:
    event_index: int
    time: float
    volume: int
    inner_radius: int
    outer_radius: int
    touches_boundary: bool
    has_circuit: bool      # contains a circuit around 0 within its own sites
    kind: str              # 'freeze' or 'burn'


@dataclass
class AvalancheReport:
    """Per-run avalanche summary: every Freeze/Burn cluster surrounding 0."""

    region: Region
    clusters: list[SurroundingCluster]
    circuit_count: int                      # C_F over the union of Dead sets
    box_counts: dict[int, int]              # |F^(B_n)| per requested radius
    ln_param: float | None = None           # ln N or ln(1/zeta), if provided

    @property
    def total(self) -> int:
        return len(self.clusters)

    @property
    def timeline(self) -> list[tuple[float, int]]:
        """|F_t| as (time, cumulative count), nondecreasing."""
        out = []
        for k, c in enumerate(sorted(self.clusters, key=lambda c: c.time)):
            out.append((c.time, k + 1))
        return out

    @property
    def normalized_count(self) -> float | None:
        """|F| / ln ln (model parameter)."""
        if self.ln_param is None or self.ln_param <= 1.0:
            return None
        return self.total / math.log(self.ln_param)

    def outside_box_count(self, n: int) -> int:
        """|F \\ F^(B_n)|: surrounding clusters not entirely inside B_n."""
        return self.total - self.box_counts[n]


def avalanche_stats(log: EventLog, region: Region, radii=(),
                    ln_param: float | None = None,
                    per_cluster_circuits: bool = True) -> AvalancheReport:
    """Scan Freeze/Burn records for clusters surrounding the origin.

    Adjacent same-time clusters are distinct records by construction.  C_F is
    the maximal number of disjoint circuits around 0 in the union of all dead
    member sets (the origin itself is excluded from the set: circuits around
    0 cannot use it).
    """
    d = dense_region(region)
    if log.dreg.region != region:
        raise ValueError("event log does not match region")
    origin = d.index_of((0, 0))
    boundary_mask = np.zeros(d.size, bool)
    boundary_mask[d.inner_boundary] = True
    clusters: list[SurroundingCluster] = []
    all_dead: list[np.ndarray] = []
    for i in log.cluster_events():
        members = log.members_of(i)
        all_dead.append(members)
        # surrounding <=> 0 in the cluster, or the member set cuts 0 off from
        # the region boundary, which by Menger duality is a positive
        # disjoint-circuit count (cross-validated against surrounds_origin)
        contains_origin = bool((members == origin).any())
        ring = members[members != origin]
        if contains_origin:
            has_circ = (len(ring) > 0
                        and max_disjoint_circuits(ring, region) >= 1) \
                if per_cluster_circuits else False
        else:
            if not _semi_axis_filter(d, members):
                continue
            cut = max_disjoint_circuits(members, region)
            if cut < 1:
                continue
            has_circ = True
        nu = d.norm[members]
        clusters.append(SurroundingCluster(
            event_index=int(i),
            time=float(log.time[i]),
            volume=int(log.volume[i]),
            inner_radius=int(nu.min()),
            outer_radius=int(nu.max()),
            touches_boundary=bool(boundary_mask[members].any()),
            has_circuit=has_circ,
            kind="freeze" if log.type[i] == EV_FREEZE else "burn",
        ))
    if all_dead:
        union = np.unique(np.concatenate(all_dead))
        union = union[union != origin]
        c_f = max_disjoint_circuits(union, region) if len(union) else 0
    else:
        c_f = 0
    box_counts = {}
    for n in radii:
        box_counts[int(n)] = sum(1 for c in clusters if c.outer_radius <= n)
    return AvalancheReport(region, clusters, c_f, box_counts, ln_param)


def volume_window_count(report: AvalancheReport, zeta: float, xi: float,
                        backend=scales.DEFAULT_BACKEND) -> int:
    """Number of surrounding burnt clusters with volume inside the window
    [V_inf / e^{(ln 1/zeta)^(1-xi)}, V_inf / e^{(ln 1/zeta)^xi}]."""
    if not 0.0 < xi < 0.5:
        raise ValueError("xi must be in (0, 1/2)")
    dc = scales.derived_constants("ff", zeta, backend)
    lam = math.log(1.0 / zeta)
    lo = dc.v_infinity / math.exp(lam ** (1.0 - xi))
    hi = dc.v_infinity / math.exp(lam ** xi)
    return sum(1 for c in report.clusters
               if c.kind == "burn" and lo <= c.volume <= hi)


# ---------------------------------------------------------------------------
# aggregation


@dataclass
class Aggregate:
    count: int
    mean: float
    variance: float
    ci: tuple[float, float]
    histogram: dict[int, int] = field(default_factory=dict)


def aggregate(values) -> Aggregate:
    """Order-independent summary of replica scalars (exact summation via
    math.fsum, so permuting the inputs cannot change a bit of the output)."""
    vals = [float(v) for v in values]
    if not vals:
        raise ValueError("aggregate needs at least one value")
    n = len(vals)
    mean = math.fsum(vals) / n
    var = math.fsum((v - mean) ** 2 for v in sorted(vals)) / n
    half = 1.96 * math.sqrt(var / n)
    hist: dict[int, int] = {}
    for v in sorted(vals):
        k = int(v)
        hist[k] = hist.get(k, 0) + 1
    return Aggregate(n, mean, var, (mean - half, mean + half), hist)