import json
import math

import numpy as np
import pytest

from avalanche_lab import dynamics as D
from avalanche_lab import formats as F
from avalanche_lab import lattice as L
from avalanche_lab import measure as M
from avalanche_lab.lattice import Ball


def hand_log(region, events):
    """Build an EventLog from (type, time, site, members|None) tuples."""
    d = L.dense_region(region)
    b = D._LogBuilder(d)
    for ev, t, v, members in events:
        b.add(ev, t, d.index_of(v),
              None if members is None else [d.index_of(m) for m in members])
    return b.build()


def test_empty_log():
    log = hand_log(Ball(6), [])
    rep = M.avalanche_stats(log, Ball(6))
    assert rep.total == 0 and rep.circuit_count == 0
    assert rep.timeline == []


def test_single_ring_counts_once():
    ring = L.neighbors((0, 0))
    log = hand_log(Ball(6), [(D.EV_BURN, 0.5, (1, 0), ring)])
    rep = M.avalanche_stats(log, Ball(6), radii=[1, 3], ln_param=math.e ** 2)
    assert rep.total == 1
    assert rep.circuit_count == 1
    c = rep.clusters[0]
    assert c.has_circuit and c.inner_radius == 1 and c.outer_radius == 1
    assert rep.box_counts == {1: 1, 3: 1}
    assert rep.normalized_count == 0.5  # 1 / ln(e^2)


def test_origin_cluster_counts_without_circuit():
    blob = [(0, 0), (1, 0)]
    log = hand_log(Ball(6), [(D.EV_FREEZE, 0.2, (0, 0), blob)])
    rep = M.avalanche_stats(log, Ball(6))
    assert rep.total == 1
    assert not rep.clusters[0].has_circuit
    assert rep.circuit_count == 0


def test_far_cluster_does_not_surround():
    blob = [(4, 0), (5, 0), (4, 1)]
    log = hand_log(Ball(6), [(D.EV_BURN, 0.1, (4, 0), blob)])
    rep = M.avalanche_stats(log, Ball(6))
    assert rep.total == 0


def test_nested_rings_counted_and_boxes_monotone():
    r1 = L.neighbors((0, 0))
    r2 = [tuple(v) for v in L.boundary(Ball(3), "inner")]
    log = hand_log(Ball(8), [
        (D.EV_BURN, 0.3, (1, 0), r1),
        (D.EV_BURN, 0.7, (3, 0), r2),
    ])
    rep = M.avalanche_stats(log, Ball(8), radii=[1, 3, 8])
    assert rep.total == 2
    assert rep.circuit_count == 2
    assert rep.box_counts[1] <= rep.box_counts[3] <= rep.box_counts[8]
    assert [c for _, c in rep.timeline] == [1, 2]
    assert rep.outside_box_count(1) == 1


def test_region_mismatch_raises():
    log = hand_log(Ball(6), [])
    with pytest.raises(ValueError):
        M.avalanche_stats(log, Ball(7))


def test_volume_window_count():
    ring = L.neighbors((0, 0))
    log = hand_log(Ball(6), [(D.EV_BURN, 0.5, (1, 0), ring)])
    rep = M.avalanche_stats(log, Ball(6))
    # all-clusters-volume-6 with V_inf >> 1: the window sits far above 6
    assert M.volume_window_count(rep, zeta=1e-4, xi=0.25) == 0
    with pytest.raises(ValueError):
        M.volume_window_count(rep, 1e-4, 0.5)
    with pytest.raises(ValueError):
        M.volume_window_count(rep, 1e-4, 0.0)
    # empty report
    rep0 = M.avalanche_stats(hand_log(Ball(6), []), Ball(6))
    assert M.volume_window_count(rep0, 1e-3, 0.3) == 0


def test_aggregate_basic_and_order_independence():
    a = M.aggregate([1.0, 2.0, 3.0])
    assert a.mean == 2.0 and a.count == 3
    single = M.aggregate([5.5])
    assert single.mean == 5.5 and single.variance == 0.0
    vals = list(np.random.default_rng(4).random(500) * 7)
    x = M.aggregate(vals)
    y = M.aggregate(list(reversed(vals)))
    z = M.aggregate(sorted(vals))
    assert (x.mean, x.variance, x.ci, x.histogram) == (y.mean, y.variance, y.ci, y.histogram)
    assert (x.mean, x.variance) == (z.mean, z.variance)
    # serialized summaries identical byte for byte
    assert (F.dump_summary_json({"m": x.mean, "v": x.variance})
            == F.dump_summary_json({"m": y.mean, "v": y.variance}))
    with pytest.raises(ValueError):
        M.aggregate([])


def test_report_csv_format():
    ring = L.neighbors((0, 0))
    log = hand_log(Ball(6), [(D.EV_BURN, 0.5, (1, 0), ring)])
    rep = M.avalanche_stats(log, Ball(6))
    csv_text = F.dump_report_csv({0: rep})
    lines = csv_text.splitlines()
    assert lines[0].startswith("run_id,kind,time,volume")
    assert lines[1].startswith("0,burn,0.5,6,1,1,")


def test_freeze_volumes_propagate_to_reports():
    for seed in range(5):
        final, log = D.run_frozen(Ball(10), 30, "original", seed=seed)
        rep = M.avalanche_stats(log, Ball(10), ln_param=math.log(30))
        for c in rep.clusters:
            if c.kind == "freeze":
                assert 30 <= c.volume <= 3 * 30 - 2
        # C_F dominates the number of circuit-bearing surrounding clusters
        assert rep.circuit_count >= sum(c.has_circuit for c in rep.clusters)


def test_outside_box_counts_grow_like_log_scale_ratio():
    # Lemma 4.1 surrogate: mean |F \ F^(B_n)| across an n-grid is fitted by
    # a * ln(box/n) + b with slope a >= 0 and bounded
    import numpy as _np
    from avalanche_lab import scales as S

    N = 200
    box = int(3 * S.t_infinity("fp", N).m_infinity)
    grid = [5, 11, 22, 45]
    outside = {n: [] for n in grid}
    for k in range(300):
        _, log = D.run_frozen(Ball(box), N, "original", seed=1234, replica=k)
        rep = M.avalanche_stats(log, Ball(box), radii=grid,
                                per_cluster_circuits=False)
        for n in grid:
            outside[n].append(rep.outside_box_count(n))
    means = [float(_np.mean(outside[n])) for n in grid]
    x = [math.log(box / n) for n in grid]
    slope = float(_np.polyfit(x, means, 1)[0])
    assert means == sorted(means, reverse=True)  # decreasing in n
    assert 0.0 <= slope < 5.0
