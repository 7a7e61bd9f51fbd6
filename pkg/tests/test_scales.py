import math

import numpy as np
import pytest

from avalanche_lab import scales as S


def test_constants():
    assert math.isclose(S.T_C, math.log(2))
    assert math.isclose(S.C_T, 2 / math.sqrt(3))
    assert math.isclose(S.N_FP, 0.3384, abs_tol=5e-5)
    assert math.isclose(S.N_FF, 1.1754, abs_tol=5e-5)


def test_theta_examples():
    assert S.theta(S.T_C) == 0.0
    assert S.theta(S.T_C - 0.1) == 0.0
    assert math.isclose(S.theta(S.T_C + 1e-3), (1e-3) ** (5 / 36), rel_tol=1e-12)
    # L(t_c + eps) = L(t_c - eps) under the ansatz (L(p) = L(1-p))
    assert S.length(S.T_C + 0.01) == S.length(S.T_C - 0.01)


def test_psi_fp_examples():
    eps = S.psi_fp_eps(100, 1000)
    assert math.isclose(eps, (1000 / (S.C_T * 1e4)) ** (36 / 5), rel_tol=1e-12)
    t = S.psi_fp(100, 1000)
    assert math.isclose(t, S.T_C + eps, rel_tol=1e-15)
    assert S.psi_fp(math.sqrt(1000 / S.C_T), 1000) == math.inf
    assert S.psi_fp(0.5 * math.sqrt(1000 / S.C_T), 1000) == math.inf
    # monotone nonincreasing in R
    assert S.psi_fp(200, 1000) < S.psi_fp(100, 1000)
    with pytest.raises(ValueError):
        S.psi_fp(10, 0)


def test_psi_ff_monotone_and_solver_consistency():
    t1 = S.psi_ff(100, 1e-3)
    t2 = S.psi_ff(200, 1e-3)
    assert t2 < t1
    # closed form satisfies the defining equation
    eps = t1 - S.T_C
    assert math.isclose(S.C_T * 100**2 * S.theta(t1) * eps, 1e3, rel_tol=1e-9)
    with pytest.raises(ValueError):
        S.psi_ff(0, 1e-3)


def test_t_hat_increasing_and_fixed_point():
    fp = S.t_infinity("fp", 1e6)
    t_vals = [fp.t_infinity + d for d in (1e-5, 2e-5, 4e-5)]
    hats = [S.t_hat(t, "fp", 1e6) for t in t_vals]
    assert hats[0] < hats[1] < hats[2]
    assert all(h > t for h, t in zip(hats, t_vals))  # above t_inf, t-hat > t
    rel = abs(S.t_hat(fp.t_infinity, "fp", 1e6) - fp.t_infinity) / fp.eps_infinity
    assert rel < 1e-10


def test_t_infinity_closed_forms():
    fp = S.t_infinity("fp", 1e6)
    assert abs(fp.m_infinity / (1e6 / S.C_T) ** (48 / 91) - 1) < 1e-9
    ff = S.t_infinity("ff", 1e-4)
    assert abs(ff.m_infinity / (1 / (S.C_T * 1e-4)) ** (48 / 55) - 1) < 1e-9
    # exponent check: ln m_inf / ln N -> 48/91 under the ansatz
    big = S.t_infinity("fp", 1e12)
    expo = math.log(big.m_infinity) / math.log(1e12 / S.C_T)
    assert abs(expo - 48 / 91) < 1e-6


def test_exceptional_scales():
    ms = S.exceptional_scales("fp", 1e6, 30)
    assert math.isclose(ms[0], 1000.0)
    assert math.isclose(ms[1], math.sqrt(1e6 * 1000 ** (5 / 48)), rel_tol=1e-12)
    # strictly increasing until it saturates at the fixed point
    assert all(b > a for a, b in zip(ms[:10], ms[1:11]))
    assert all(b >= a for a, b in zip(ms, ms[1:]))
    fixed = 1e6 ** (48 / 91)
    assert abs(ms[29] - fixed) / fixed < 1e-6
    ff = S.exceptional_scales("ff", 1e-4, 30)
    assert math.isclose(ff[0], 100.0)
    fixed_ff = (1e4) ** (48 / 55)
    assert abs(ff[29] - fixed_ff) / fixed_ff < 1e-6
    with pytest.raises(ValueError):
        S.exceptional_scales("fp", 1e6, 0)


def test_derived_constants():
    dc = S.derived_constants("ff", 1e-4)
    assert math.isclose(dc.t_lambda(0.0), S.T_C)
    assert dc.t_lambda(2.0) > dc.t_lambda(1.0) > S.T_C
    m = dc.m_infinity
    assert math.isclose(dc.v_infinity, m * m * m ** (-5 / 48), rel_tol=1e-9)
    # zeta ~ pi4(m_inf)/pi1(m_inf) up to the volume constant
    assert 0.1 < dc.zeta_ratio / 1e-4 < 10
    assert dc.n_constant == S.N_FF


def test_iteration_exponent_exact():
    ratio, expo = S.iteration_exponent_check("fp", 5e4, 1e5, 1e6)
    assert abs(expo - 96 / 5) < 1e-9
    assert math.isclose(ratio, 2.0 ** (-96 / 5), rel_tol=1e-9)
    _, expo_ff = S.iteration_exponent_check("ff", 5e5, 1e6, 1e-6)
    assert abs(expo_ff - 96 / 41) < 1e-9
    r, none = S.iteration_exponent_check("fp", 2000.0, 2000.0, 1e6)
    assert r == 1.0 and none is None
    with pytest.raises(ValueError):
        S.iteration_exponent_check("fp", 10.0, 1e5, 1e6)  # below Psi threshold


def test_schedule_fp_structure():
    s = S.schedule_fp(ln_N=1e9)
    assert s.j in (s.J - 1, s.J)
    assert all(s.separation)
    assert all(r <= R for r, R in zip(s.ln_r, s.ln_R))
    # J nondecreasing over a doubling grid of ln N
    js = [S.schedule_fp(ln_N=x).J for x in (1e3, 2e3, 4e3, 8e3, 1.6e4, 1e6, 1e9, 1e12)]
    assert js == sorted(js)
    with pytest.raises(ValueError):
        S.schedule_fp(ln_N=1e9, alpha=0)
    with pytest.raises(ValueError):
        S.schedule_fp(ln_N=2.0)  # ln ln N <= 1


def test_schedule_log_vs_direct_agreement():
    for lnp in (250.0, 400.0):
        a = S.schedule_fp(ln_N=lnp)
        b = S.schedule_fp_direct(N=math.exp(lnp))
        assert (a.J, a.j) == (b.J, b.j)
        for i in range(a.j + 2):
            assert abs(a.ln_r[i] - b.ln_r[i]) < 1e-6
        for i in range(a.J + 2):
            assert abs(a.ln_R[i] - b.ln_R[i]) < 1e-6
        c = S.schedule_ff(ln_inv_zeta=lnp)
        d = S.schedule_ff_direct(zeta=math.exp(-lnp))
        assert (c.J, c.j) == (d.J, d.j)
        for i in range(c.j + 2):
            assert abs(c.ln_r[i] - d.ln_r[i]) < 1e-6
        for i in range(c.J + 2):
            assert abs(c.ln_R[i] - d.ln_R[i]) < 1e-6


def test_log_scale_number():
    n = S.LogScaleNumber.from_value(8.0)
    assert math.isclose((n * 2).ln, math.log(16))
    assert math.isclose((n / 4).ln, math.log(2))
    assert math.isclose((n ** 2).ln, math.log(64))
    assert math.isclose((n + 8.0).ln, math.log(16))
    assert S.LogScaleNumber(1e12.__float__()).value == math.inf  # beyond float range
    assert n > 4.0 and n < 16.0 and n >= 8.0 and n <= 8.0
    big = S.LogScaleNumber(1e12)
    s = S.schedule_fp(N=big)
    assert s.ln_param == 1e12
    with pytest.raises(ValueError):
        S.LogScaleNumber.from_value(-1.0)


def test_empirical_backend_validation_and_interp():
    eps = np.array([1e-4, 1e-3, 1e-2, 1e-1])
    be = S.EmpiricalBackend(
        theta_table=(eps, eps ** (5 / 36)),
        length_table=(eps, eps ** (-4 / 3)),
        pi1_table=([2, 8, 32, 128], [0.9, 0.72, 0.58, 0.5]),
        pi4_table=([2, 8, 32, 128], [0.2, 0.04, 0.007, 0.001]),
    )
    # hits grid points exactly, log-log linear in between
    assert math.isclose(be.theta_eps(1e-3), (1e-3) ** (5 / 36), rel_tol=1e-12)
    assert math.isclose(be.pi1(16), math.exp(
        (math.log(0.72) + math.log(0.58)) / 2), rel_tol=1e-12)
    with pytest.raises(ValueError):
        be.pi1(1000)  # extrapolation refused
    with pytest.raises(ValueError):
        S.EmpiricalBackend(theta_table=([1e-3, 1e-2], [0.5, 0.4]))  # not increasing
    # generic solvers work on tables (target theta = 0.433, inside the range)
    t = S.psi_fp(100.0, 5000.0, be)
    assert S.T_C + 1e-4 <= t <= S.T_C + 1e-1
    assert math.isclose(be.theta_eps(t - S.T_C), 5000.0 / (S.C_T * 1e4), rel_tol=1e-9)
    with pytest.raises(ValueError):
        S.psi_fp(200.0, 5000.0, be)  # target below the table: refused
    fp = S.t_infinity("fp", 5e4, be)
    assert fp.eps_infinity > 0 and fp.crossings


def test_p_t_conversions():
    assert math.isclose(S.p_of_t(S.T_C), 0.5)
    assert math.isclose(S.t_of_p(0.5), S.T_C)
    assert math.isclose(S.t_of_p(S.p_of_t(0.3)), 0.3)


def test_characteristic_length_mc_edges():
    est0 = S.characteristic_length_mc(0.0, seed=1, max_samples=4000)
    assert est0.length == 1 and est0.regularized == 0.0
    est1 = S.characteristic_length_mc(1.0, seed=1, max_samples=4000)
    assert est1.length == 1 and est1.regularized == 0.0
    with pytest.raises(ValueError):
        S.characteristic_length_mc(0.5, seed=1)


def test_characteristic_length_symmetry():
    # L(p) = L(1-p): estimates at mirrored p agree within one grid step
    a = S.characteristic_length_mc(0.25, seed=6, max_samples=20000).length
    b = S.characteristic_length_mc(0.75, seed=6, max_samples=20000).length
    assert abs(a - b) <= max(1, a // 2)
