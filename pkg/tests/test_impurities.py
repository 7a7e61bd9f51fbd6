import math

import numpy as np
import pytest

from avalanche_lab import impurities as I
from avalanche_lab import percolation as P
from avalanche_lab import rng as rnglib
from avalanche_lab import scales as S
from avalanche_lab.lattice import Annulus, Ball


def test_pi_zero_is_bitwise_bernoulli():
    spec = I.ImpuritySpec.dirac0(0.0)
    cfg, holes = I.sample_impurity_percolation(Ball(12), 0.5, spec, seed=7, replica=3)
    base = P.sample_bernoulli(Ball(12), 0.5,
                              rnglib.replica_seed(7, 3, rnglib.BERNOULLI))
    assert np.array_equal(cfg.states, base.states)
    assert len(holes) == 0


def test_dirac0_lowers_effective_parameter():
    pi = 0.2
    spec = I.ImpuritySpec.dirac0(pi)
    cfg, holes = I.sample_impurity_percolation(Ball(40), 0.5, spec, seed=11)
    frac = (cfg.states == 1).mean()
    expect = 0.5 * (1 - pi)
    assert abs(frac - expect) < 4 * math.sqrt(0.25 / cfg.dreg.size) + 0.01
    assert len(holes) > 0


def test_indicator_radius_independence():
    # correlation between hole presence and drawn radius across sites
    spec = I.ImpuritySpec.from_radii(0.5, 4.0, np.array([0, 1, 1, 2, 3, 5, 8]))
    flag_seed = rnglib.replica_seed(3, 0, rnglib.HOLE_FLAG)
    rad_seed = rnglib.replica_seed(3, 0, rnglib.HOLE_RADIUS)
    xs = np.arange(10_000, dtype=np.int64)
    ys = np.zeros(10_000, np.int64)
    flags = rnglib.site_uniform(flag_seed, xs, ys) < spec.pi
    radii = np.array([spec.quantile(float(u)) for u in
                      rnglib.site_uniform(rad_seed, xs, ys)])
    rho = np.corrcoef(flags.astype(float), radii)[0, 1]
    assert abs(rho) < 3.0 / math.sqrt(10_000)


def test_rho_sampler_basics():
    rs = I.rho_from_subcritical_cluster(0.3, r_cut=32, samples=400, seed=5)
    assert len(rs.radii) == 400
    assert (rs.radii >= 0).all() and (rs.radii <= 32).all()
    # tail is nonincreasing with tail(0) = 1
    grid = [0, 1, 2, 4, 8, 16, 32]
    tails = [rs.tail(r) for r in grid]
    assert tails[0] == 1.0
    assert all(b <= a for a, b in zip(tails, tails[1:]))
    # vacant origin gives radius 0; subcritical parameters keep most radii tiny
    assert rs.tail(1) < 0.55
    with pytest.raises(ValueError):
        I.rho_from_subcritical_cluster(0.0, 8, 10, 1)
    with pytest.raises(ValueError):
        I.rho_from_subcritical_cluster(0.3, 0, 10, 1)


def test_rho_sampler_deterministic():
    a = I.rho_from_subcritical_cluster(0.25, 16, 100, seed=9)
    b = I.rho_from_subcritical_cluster(0.25, 16, 100, seed=9)
    assert np.array_equal(a.radii, b.radii)


def test_check_assumption_examples():
    # rho = delta_0, pi = m^-2, m = 1: direct substitution at r = 0 gives 1
    rep = I.check_assumption(pi=1.0, tail=lambda r: 1.0 if r <= 0 else 0.0,
                             m=1.0, c=1.0, gamma=9 / 8, r_grid=[0.0])
    assert math.isclose(rep.upsilon_fit, 1.0)
    rep0 = I.check_assumption(pi=0.0, tail=lambda r: 1.0, m=4.0, c=1.0,
                              gamma=9 / 8, r_grid=[0, 1, 2])
    assert rep0.upsilon_fit == 0.0
    with pytest.raises(ValueError):
        I.check_assumption(1.0, lambda r: 1.0, 1.0, 1.0, 2.5, [0])
    with pytest.raises(ValueError):
        I.check_assumption(1.0, lambda r: 1.0, 1.0, 1.0, 1.5, [])
    rep2 = I.check_assumption(pi=0.5, tail=lambda r: math.exp(-r), m=2.0,
                              c=0.5, gamma=9 / 8,
                              r_grid=[0, 1, 2, 4], upsilon_assumed=1e-9)
    assert rep2.violations  # absurdly small upsilon is violated


def test_detect_crossing_hole():
    ann = Annulus(4, 10)
    empty = I.HoleSet(np.empty((0, 2), np.int64), np.empty(0, np.int64), 0, 0.0)
    assert not I.detect_crossing_hole(empty, ann)
    big = I.HoleSet(np.array([[0, 0]]), np.array([10]), 0, 0.0)
    assert I.detect_crossing_hole(big, ann, "H")
    # the big hole contains B_4, so the restricted variant rejects it
    assert not I.detect_crossing_hole(big, ann, "Hbb")
    # a medium off-center hole crossing the annulus but not containing B_4
    med = I.HoleSet(np.array([[7, 0]]), np.array([4]), 0, 0.0)
    assert I.detect_crossing_hole(med, ann, "H")
    assert I.detect_crossing_hole(med, ann, "Hbb")
    # small far hole does not cross
    small = I.HoleSet(np.array([[20, 0]]), np.array([2]), 0, 0.0)
    assert not I.detect_crossing_hole(small, ann, "H")
    with pytest.raises(ValueError):
        I.detect_crossing_hole(big, ann, "X")


def test_hbb_implies_h_on_random_instances():
    rng = np.random.default_rng(8)
    ann = Annulus(3, 8)
    for _ in range(100):
        k = int(rng.integers(1, 12))
        centers = rng.integers(-12, 13, (k, 2)).astype(np.int64)
        radii = rng.integers(0, 9, k).astype(np.int64)
        holes = I.HoleSet(centers, radii, 0, 0.0)
        if I.detect_crossing_hole(holes, ann, "Hbb"):
            assert I.detect_crossing_hole(holes, ann, "H")


def test_forest_fire_hole_probability():
    # t_c zeta e^(t_c zeta) at zeta = 0.01: ~0.0069796
    val = I.forest_fire_hole_probability(0.01)
    assert math.isclose(val, math.log(2) * 0.01 * math.exp(math.log(2) * 0.01),
                        rel_tol=1e-12)
    assert math.isclose(val, 0.006980, abs_tol=2e-6)


def test_sampled_holes_respect_probability():
    spec = I.ImpuritySpec.dirac0(0.05)
    cfg, holes = I.sample_impurity_percolation(Ball(40), 0.5, spec, seed=21)
    padded = cfg.dreg.size  # dirac0: padding 0, centers within the bounding ball
    # hole count ~ Binomial(|padded ball|, 0.05); loose 5-sigma band
    n_pad = len(holes)
    import avalanche_lab.lattice as L
    total = L.region_volume(Ball(40))
    mean = 0.05 * total
    assert abs(n_pad - mean) < 5 * math.sqrt(mean)


def test_domination_experiment_smoke():
    spec = I.forest_fire_impurity_spec(zeta=0.05, eps_bar=0.3, m=4.0, samples=300, seed=2)
    comps = I.domination_experiment(Ball(12), t=S.T_C, eps_bar=0.3, zeta=0.05,
                                    spec=spec, samples=60, seed=13)
    names = {c.name for c in comps}
    assert "occupied_fraction" in names and "subrect_crossing" in names
    for c in comps:
        assert 0.0 <= c.ff_mean <= 1.0 and 0.0 <= c.imp_mean <= 1.0
        assert c.gap >= -4 * c.pooled_sigma  # loose smoke bound
    with pytest.raises(ValueError):
        I.domination_experiment(Ball(6), t=0.1, eps_bar=0.3, zeta=0.05,
                                spec=spec, samples=5, seed=1)


def test_tail_shape_against_pi_ratio():
    # tail(r) <= C pi1(r) / (r^2 pi4(r)) for r <= m, with a constant fitted
    # on half the grid and checked with slack on the other half
    rs = I.rho_from_subcritical_cluster(0.2, r_cut=64, samples=6000, seed=41)
    pi1 = {n: P.estimate_connection(0.5, n, 1200, seed=42 + n).estimate
           for n in (2, 4, 8, 16)}
    pi4 = {n: P.estimate_pivotal(n, 8000, seed=52 + n).estimate
           for n in (2, 4, 8, 16)}

    def implied_c(r):
        return rs.tail(r) * r * r * pi4[r] / pi1[r]

    c_fit = max(implied_c(r) for r in (2, 8))
    for r in (4, 16):
        assert rs.tail(r) <= 3.0 * c_fit * pi1[r] / (r * r * pi4[r])


def test_upsilon_fit_grows_with_m():
    # the fitted bound constant grows like (m/m_inf)^{9/8}: bigger m (smaller eps_bar)
    # must fit a larger upsilon; both finite
    zeta = 1e-3
    pi = I.forest_fire_hole_probability(zeta)
    fits = []
    for eps_bar in (0.35, 0.15):
        m = S.length(S.T_C - eps_bar)  # ansatz scale for the bound formula
        rs = I.rho_from_subcritical_cluster(eps_bar, r_cut=256, samples=3000,
                                            seed=61)
        rep = I.check_assumption(pi, rs.tail, m, c=0.25, gamma=9 / 8,
                                 r_grid=[0, 1, 2, 4, 8, 16, 32])
        assert np.isfinite(rep.upsilon_fit) and rep.upsilon_fit > 0
        fits.append((m, rep.upsilon_fit))
    (m1, u1), (m2, u2) = fits
    assert m1 < m2
    assert u1 < u2


def test_crossing_hole_probability_decays():
    # P(H(A_{n1, 2 n1})) decays in n1/m: log-linear fit slope < 0
    spec = I.forest_fire_impurity_spec(zeta=0.2, eps_bar=0.25, m=6.0, samples=3000, seed=71)
    import math as _m
    probs = []
    grid = [4, 8, 16]
    for n1 in grid:
        hits = 0
        trials = 500
        for k in range(trials):
            holes = I.sample_holes(Ball(2 * n1 + 2), spec, seed=72,
                                   replica=1000 * n1 + k)
            if I.detect_crossing_hole(holes, Annulus(n1, 2 * n1)):
                hits += 1
        probs.append(max(hits, 1) / trials)
    slope = np.polyfit(grid, np.log(probs), 1)[0]
    assert probs[0] > probs[-1]
    assert slope < 0.0
