"""Experiment harness: validated configs, parallel replica execution with
derived seeds, CSV/JSON outputs, and the selftest suites.

Replica results are a pure function of (root seed, replica index), gathered
in replica order before writing, so the data files are byte-identical for
any parallelism degree.  The manifest echoes the config and seeds; its
wall_time field is the only run-dependent entry.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field, asdict
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from . import __version__, formats, measure, rng as rnglib, scales
from .lattice import Annulus, Ball, Lozenge, Region
from . import dynamics
from . import percolation
from . import impurities as imp

KINDS = ("fp", "ffwor", "ffwr", "impurity", "birth")


def parse_region(spec: str) -> Region:
    kind, _, rest = spec.partition(":")
    parts = [p for p in rest.split(":") if p]
    if kind == "ball":
        return Ball(int(parts[0]))
    if kind == "lozenge":
        return Lozenge(int(parts[0]))
    if kind == "annulus":
        return Annulus(int(parts[0]), int(parts[1]))
    raise ValueError(f"unknown region spec {spec!r} (use ball:N, lozenge:K, annulus:N1:N2)")


@dataclass
class ExperimentConfig:
    kind: str
    region: str = "ball:16"
    n_threshold: int | None = None      # frozen percolation N
    rule: str = "original"
    zeta: float | None = None
    horizon: float | None = None
    truncation: float | None = None     # sigma^[T] ignition cutoff
    p: float | None = None
    eps_bar: float | None = None        # impurity: m = L(t_c - eps_bar)
    m_scale: float | None = None        # impurity: explicit m
    times: tuple = ()                   # birth snapshots
    replicas: int = 1
    seed: int = 0
    radii: tuple = ()                   # report radii for F^(B_n)
    out: str | None = None

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        parse_region(self.region)
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if self.kind == "fp":
            if self.n_threshold is None or self.n_threshold < 1:
                raise ValueError("fp needs N >= 1")
            if self.rule not in ("original", "modified"):
                raise ValueError("rule must be original|modified")
        if self.kind in ("ffwor", "ffwr"):
            if not self.zeta or self.zeta <= 0:
                raise ValueError("forest fires need zeta > 0")
            if not self.horizon or self.horizon <= 0:
                raise ValueError("forest fires need horizon > 0")
        if self.kind == "impurity":
            if self.p is None or not 0 <= self.p <= 1:
                raise ValueError("impurity needs p in [0, 1]")
            if not self.zeta or self.zeta <= 0 or self.eps_bar is None:
                raise ValueError("impurity needs zeta > 0 and eps_bar")
        if self.kind == "birth" and (not self.times or list(self.times) != sorted(self.times)):
            raise ValueError("birth needs sorted snapshot times")

    def to_dict(self) -> dict:
        return asdict(self)


def thread_cap(requested: int | None = None) -> int:
    cap = os.environ.get("AVALANCHE_THREADS")
    n = requested or os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


# one replica of each experiment kind; module-level for multiprocessing


def _replica_fp(cfg: ExperimentConfig, k: int):
    region = parse_region(cfg.region)
    final, log = dynamics.run_frozen(region, cfg.n_threshold, cfg.rule,
                                     seed=cfg.seed, replica=k)
    ln_param = math.log(cfg.n_threshold) if cfg.n_threshold > 1 else None
    rep = measure.avalanche_stats(log, region, radii=cfg.radii, ln_param=ln_param)
    flags = {"freeze_window_ok": dynamics.freeze_volumes_in_window(log, cfg.n_threshold)}
    return k, rep, flags


def _replica_ffwor(cfg: ExperimentConfig, k: int):
    region = parse_region(cfg.region)
    final, log = dynamics.run_ffwor(region, cfg.zeta, cfg.horizon, seed=cfg.seed,
                                    replica=k, ignition_truncation=cfg.truncation)
    rep = measure.avalanche_stats(log, region, radii=cfg.radii,
                                  ln_param=math.log(1.0 / cfg.zeta))
    flags = {"dead_partition_ok": dynamics.dead_set_nondecreasing(log)}
    return k, rep, flags


def _replica_ffwr(cfg: ExperimentConfig, k: int):
    region = parse_region(cfg.region)
    final, log = dynamics.run_ffwr(region, cfg.zeta, cfg.horizon, seed=cfg.seed, replica=k)
    burns = int((log.type == dynamics.EV_BURN).sum())
    births = int((log.type == dynamics.EV_BIRTH).sum())
    recovers = int((log.type == dynamics.EV_RECOVER).sum())
    occupied = float((final.states == 1).mean())
    return k, {"burns": burns, "births": births, "recovers": recovers,
               "occupied_fraction": occupied}, {}


def _replica_birth(cfg: ExperimentConfig, k: int):
    region = parse_region(cfg.region)
    snaps = dynamics.snapshot_birth(region, list(cfg.times), cfg.seed, replica=k)
    fractions = [float((c.states == 1).mean()) for c in snaps]
    return k, dict(zip(map(str, cfg.times), fractions)), {}


def _replica_impurity(cfg: ExperimentConfig, k: int):
    region = parse_region(cfg.region)
    m = cfg.m_scale
    if m is None:
        m = scales.length(scales.T_C - cfg.eps_bar)
    spec = imp.forest_fire_impurity_spec(cfg.zeta, cfg.eps_bar, m, seed=cfg.seed)
    config, holes = imp.sample_impurity_percolation(region, cfg.p, spec, cfg.seed, replica=k)
    return k, {"occupied_fraction": float((config.states == 1).mean()),
               "holes": len(holes)}, {"hole_truncation_probability": holes.truncation_probability}


_RUNNERS = {"fp": _replica_fp, "ffwor": _replica_ffwor, "ffwr": _replica_ffwr,
            "birth": _replica_birth, "impurity": _replica_impurity}


def _call_runner(args):
    kind, cfg, k = args
    return _RUNNERS[kind](cfg, k)


@dataclass
class RunResult:
    config: ExperimentConfig
    data_csv: str
    manifest: dict
    reports: dict = field(default_factory=dict)

    def write(self, out_dir: str | Path) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        data_path = out / f"{self.config.kind}_data.csv"
        man_path = out / f"{self.config.kind}_manifest.json"
        data_path.write_text(self.data_csv)
        man_path.write_text(formats.dump_summary_json(self.manifest))
        return data_path, man_path


def run_experiment(config: ExperimentConfig, threads: int | None = None) -> RunResult:
    """Execute all replicas (parallelism capped by AVALANCHE_THREADS) and
    assemble the data CSV plus manifest; results do not depend on the
    parallelism degree."""
    config.validate()
    t0 = time.time()
    nproc = thread_cap(threads)
    tasks = [(config.kind, config, k) for k in range(config.replicas)]
    if nproc > 1 and config.replicas > 1:
        with get_context("fork").Pool(min(nproc, config.replicas)) as pool:
            results = pool.map(_call_runner, tasks)
    else:
        results = [_call_runner(t) for t in tasks]
    results.sort(key=lambda r: r[0])
    flags: dict = {}
    for k, _, fl in results:
        for name, val in fl.items():
            flags.setdefault(name, []).append(val)

    if config.kind in ("fp", "ffwor"):
        reports = {k: rep for k, rep, _ in results}
        data_csv = formats.dump_report_csv(reports)
        counts = [rep.total for rep in reports.values()]
        agg = measure.aggregate(counts)
        summary = {"mean_surrounding": agg.mean, "variance": agg.variance,
                   "histogram": {str(kk): v for kk, v in agg.histogram.items()},
                   "circuit_counts": [reports[k].circuit_count for k in sorted(reports)]}
    else:
        reports = {k: rep for k, rep, _ in results}
        rows = ["replica," + ",".join(sorted(next(iter(reports.values())).keys()))]
        for k in sorted(reports):
            rep = reports[k]
            rows.append(str(k) + "," + ",".join(repr(rep[key]) for key in sorted(rep)))
        data_csv = "\n".join(rows) + "\n"
        summary = {}

    manifest = {
        "tool": "avalanche-lab",
        "version": __version__,
        "config": config.to_dict(),
        "root_seed": config.seed,
        "replica_seeds": [rnglib.replica_seed(config.seed, k, rnglib.BIRTH)
                          for k in range(config.replicas)],
        "truncation_flags": flags,
        "summary": summary,
        "wall_time": round(time.time() - t0, 3),
    }
    out = RunResult(config, data_csv, manifest, reports)
    if config.out:
        out.write(config.out)
    return out


# ---------------------------------------------------------------------------
# selftest suites


@dataclass
class SelftestReport:
    suite: str
    passed: bool
    lines: list[str]


def selftest(suite: str, frozen_engine=dynamics.run_frozen) -> SelftestReport:
    """Fast fixed-seed verification suites; ``frozen_engine`` is injectable
    so tests can verify that a corrupted engine is detected."""
    lines = []
    ok = True

    def check(name: str, cond: bool):
        nonlocal ok
        lines.append(f"{'PASS' if cond else 'FAIL'}  {name}")
        ok = ok and cond

    if suite == "oracle":
        for seed in range(5):
            region = Lozenge(8)
            f1, l1 = frozen_engine(region, 4, "original", seed=seed)
            f2, l2 = dynamics.run_reference("frozen", region, seed=seed, N=4)
            check(f"fp engine equivalence seed={seed}",
                  l1.equals(l2) and np.array_equal(f1.states, f2.states))
        for seed in range(3):
            region = Lozenge(8)
            f1, l1 = dynamics.run_ffwor(region, 0.1, 2.0, seed=seed)
            f2, l2 = dynamics.run_reference("ffwor", region, seed=seed, zeta=0.1, horizon=2.0)
            check(f"ffwor engine equivalence seed={seed}", l1.equals(l2))
    elif suite == "duality":
        for k in (2, 3, 4):
            check(f"lozenge duality exhaustive k={k}",
                  percolation.lozenge_duality_exhaustive(k))
    elif suite == "invariants":
        for seed in range(5):
            final, log = frozen_engine(Ball(10), 20, "original", seed=seed)
            check(f"freeze volumes in [N, 3N-2] seed={seed}",
                  dynamics.freeze_volumes_in_window(log, 20))
            check(f"at least one freeze seed={seed}",
                  int((log.type == dynamics.EV_FREEZE).sum()) >= 1)
        final, log = dynamics.run_ffwor(Ball(10), 0.05, 2.0, seed=1)
        check("ffwor dead set partition", dynamics.dead_set_nondecreasing(log))
        check("ffwor burn audit", dynamics.audit_burn_clusters(log))
    elif suite == "scales":
        fp = scales.t_infinity("fp", 1e6)
        closed = (1e6 / scales.C_T) ** (48.0 / 91.0)
        check("m_inf(1e6) matches closed form to 1e-9",
              abs(fp.m_infinity / closed - 1) < 1e-9)
        ratio, expo = scales.iteration_exponent_check("fp", 5e4, 1e5, 1e6)
        check("FP iteration exponent 96/5", abs(expo - scales.A_FP) < 1e-9)
        _, expo = scales.iteration_exponent_check("ff", 5e5, 1e6, 1e-6)
        check("FF iteration exponent 96/41", abs(expo - scales.A_FF) < 1e-9)
        s = scales.schedule_fp(ln_N=1e9)
        check("FP schedule j in {J-1, J}", s.j in (s.J - 1, s.J))
        check("FP schedule separation", all(s.separation))
    else:
        raise ValueError("suite must be oracle|duality|invariants|scales")
    return SelftestReport(suite, ok, lines)
