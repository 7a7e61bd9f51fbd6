"""On-disk formats: TRILAT configuration snapshots, event-log CSV, avalanche
report CSV, and empirical tail CSV.  Everything round-trips bit-exactly.

TRILAT v1: header ``TRILAT 1 <kind> <params>``, then one text row per y
(ascending) over the bounding box, with characters '.' vacant, 'o' occupied,
'x' dead, and '#' for cells outside the region (annuli and explicit regions
are not x-convex, so a raster needs an out-of-region mark).
"""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from .lattice import Annulus, Ball, Explicit, Lozenge, Region, dense_region
from .percolation import Configuration
from .dynamics import EventLog, EVENT_NAMES

_STATE_CHARS = {0: ".", 1: "o", -1: "x"}
_CHAR_STATES = {v: k for k, v in _STATE_CHARS.items()}


def _region_header(region: Region) -> str:
    if isinstance(region, Ball):
        return f"ball {region.n} {region.center[0]} {region.center[1]}"
    if isinstance(region, Annulus):
        return f"annulus {region.n1} {region.n2} {region.center[0]} {region.center[1]}"
    if isinstance(region, Lozenge):
        return f"lozenge {region.k}"
    if isinstance(region, Explicit):
        parts = " ".join(f"{x},{y}" for x, y in region.sites)
        return f"explicit {parts}"
    raise TypeError(f"not a region: {region!r}")


def parse_region(kind: str, params: list[str]) -> Region:
    if kind == "ball":
        n, cx, cy = map(int, params)
        return Ball(n, (cx, cy))
    if kind == "annulus":
        n1, n2, cx, cy = map(int, params)
        return Annulus(n1, n2, (cx, cy))
    if kind == "lozenge":
        return Lozenge(int(params[0]))
    if kind == "explicit":
        sites = tuple(tuple(map(int, p.split(","))) for p in params)
        return Explicit(sites)
    raise ValueError(f"unknown region kind {kind!r}")


def dump_trilat(config: Configuration) -> str:
    d = config.dreg
    out = [f"TRILAT 1 {_region_header(d.region)}"]
    nrows, ncols = d.shape
    grid = np.full((nrows, ncols), "#", dtype="U1")
    rows = d.xy[:, 1] - d.ymin
    cols = d.xy[:, 0] - d.xmin
    for state, ch in _STATE_CHARS.items():
        m = config.states == state
        grid[rows[m], cols[m]] = ch
    for r in range(nrows):
        out.append("".join(grid[r]))
    return "\n".join(out) + "\n"


def load_trilat(text: str) -> Configuration:
    lines = text.splitlines()
    head = lines[0].split()
    if head[:2] != ["TRILAT", "1"]:
        raise ValueError("not a TRILAT v1 snapshot")
    region = parse_region(head[2], head[3:])
    d = dense_region(region)
    states = np.zeros(d.size, np.int8)
    rows = d.xy[:, 1] - d.ymin
    cols = d.xy[:, 0] - d.xmin
    raster = lines[1:1 + d.shape[0]]
    for i in range(d.size):
        ch = raster[rows[i]][cols[i]]
        states[i] = _CHAR_STATES[ch]
    return Configuration(d, states)


# ---------------------------------------------------------------------------
# event log CSV: event,time,site_x,site_y,cluster_id,volume


def dump_event_csv(log: EventLog) -> str:
    d = log.dreg
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["event", "time", "site_x", "site_y", "cluster_id", "volume"])
    for i in range(len(log)):
        s = int(log.site[i])
        w.writerow([
            EVENT_NAMES[int(log.type[i])],
            repr(float(log.time[i])),
            int(d.xy[s, 0]),
            int(d.xy[s, 1]),
            int(log.cluster[i]),
            int(log.volume[i]),
        ])
    return buf.getvalue()


def dump_final_state(config: Configuration) -> str:
    return dump_trilat(config)


# ---------------------------------------------------------------------------
# avalanche report CSV and summary JSON


def dump_report_csv(reports: dict) -> str:
    """One row per surrounding cluster: run_id, time, volume, radii, flags.

    ``reports`` maps replica id -> AvalancheReport; rows come out sorted by
    replica id, so the file is independent of completion order.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run_id", "kind", "time", "volume", "inner_radius",
                "outer_radius", "touches_boundary", "has_circuit"])
    for run_id in sorted(reports):
        rep = reports[run_id]
        for c in rep.clusters:
            w.writerow([run_id, c.kind, repr(c.time), c.volume, c.inner_radius,
                        c.outer_radius, int(c.touches_boundary), int(c.has_circuit)])
    return buf.getvalue()


def dump_summary_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def dump_tail_csv(pairs) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["r", "tail"])
    for r, t in pairs:
        w.writerow([repr(float(r)), repr(float(t))])
    return buf.getvalue()
