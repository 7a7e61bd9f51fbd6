"""Deterministic near-critical scale machinery.

Backends supply theta, L, pi1, pi4; on top of them sit the freeze/burn-time
maps (R -> first macroscopic event time), their fixed point (t_inf, m_inf),
exceptional scales, derived constants, and the avalanche schedules with a
log-domain mode that evaluates them at astronomically large parameters.

Conventions: all "up to constants" relations are implemented with unit
multiplicative constants; amplitudes are configuration knobs.  c_T = 2/sqrt(3)
is the volume constant used inside the scale equations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

T_C = math.log(2.0)
P_C = 0.5
C_T = 2.0 / math.sqrt(3.0)

A_FP = 96.0 / 5.0
A_FF = 96.0 / 41.0
N_FP = 1.0 / math.log(A_FP)
N_FF = 1.0 / math.log(A_FF)
DELTA = 0.001

ONE_ARM = 5.0 / 48.0
FOUR_ARM = 5.0 / 4.0
THETA_EXP = 5.0 / 36.0
LENGTH_EXP = 4.0 / 3.0


def p_of_t(t: float) -> float:
    return 1.0 - math.exp(-t)


def t_of_p(p: float) -> float:
    return -math.log(1.0 - p)


# ---------------------------------------------------------------------------
# backends


@dataclass(frozen=True)
class AnsatzBackend:
    """Closed forms with the exactly-known exponents and unit amplitudes:
    theta(t_c+e) = c_theta e^{5/36}, L(t_c +- e) = c_L e^{-4/3},
    pi1(n) = c_1 n^{-5/48}, pi4(n) = c_4 n^{-5/4}."""

    c_theta: float = 1.0
    c_length: float = 1.0
    c_pi1: float = 1.0
    c_pi4: float = 1.0

    def theta_eps(self, eps: float) -> float:
        if eps <= 0:
            return 0.0
        return min(self.c_theta * eps ** THETA_EXP, 1.0)

    def length_eps(self, eps: float) -> float:
        if eps == 0:
            return math.inf
        return self.c_length * abs(eps) ** -LENGTH_EXP

    def pi1(self, n: float) -> float:
        return self.c_pi1 * n ** -ONE_ARM

    def pi4(self, n: float) -> float:
        return self.c_pi4 * n ** -FOUR_ARM

    # exact inverses used by the solvers
    def eps_of_theta(self, th: float) -> float:
        return (th / self.c_theta) ** (1.0 / THETA_EXP)

    def eps_of_length(self, ell: float) -> float:
        return (ell / self.c_length) ** (-1.0 / LENGTH_EXP)


@dataclass(frozen=True)
class EmpiricalBackend:
    """Monte Carlo tables with log-log linear interpolation.

    Tables are (grid, values) pairs; grids strictly increasing, values
    strictly monotone in the direction the theory requires.  Queries outside
    a table's range raise (no extrapolation).
    """

    theta_table: tuple = ()   # (eps_grid, theta_values), increasing
    length_table: tuple = ()  # (eps_grid, L_values), decreasing
    pi1_table: tuple = ()     # (n_grid, pi1_values), decreasing
    pi4_table: tuple = ()     # (n_grid, pi4_values), decreasing

    def __post_init__(self):
        for name, tab, increasing in (("theta", self.theta_table, True),
                                      ("length", self.length_table, False),
                                      ("pi1", self.pi1_table, False),
                                      ("pi4", self.pi4_table, False)):
            if not tab:
                continue
            g, v = np.asarray(tab[0], float), np.asarray(tab[1], float)
            if (np.diff(g) <= 0).any():
                raise ValueError(f"{name} grid must be strictly increasing")
            d = np.diff(v)
            if increasing and (d <= 0).any():
                raise ValueError(f"{name} values must be strictly increasing")
            if not increasing and (d >= 0).any():
                raise ValueError(f"{name} values must be strictly decreasing")
            if (v <= 0).any() or (g <= 0).any():
                raise ValueError(f"{name} table must be positive")

    @staticmethod
    def _interp(tab, x: float, what: str) -> float:
        g, v = np.asarray(tab[0], float), np.asarray(tab[1], float)
        if not (g[0] <= x <= g[-1]):
            raise ValueError(f"{what} query {x} outside table range [{g[0]}, {g[-1]}]")
        return float(np.exp(np.interp(math.log(x), np.log(g), np.log(v))))

    def theta_eps(self, eps: float) -> float:
        if eps <= 0:
            return 0.0
        return self._interp(self.theta_table, eps, "theta")

    def length_eps(self, eps: float) -> float:
        return self._interp(self.length_table, abs(eps), "length")

    def pi1(self, n: float) -> float:
        return self._interp(self.pi1_table, n, "pi1")

    def pi4(self, n: float) -> float:
        return self._interp(self.pi4_table, n, "pi4")


DEFAULT_BACKEND = AnsatzBackend()


def theta(t: float, backend=DEFAULT_BACKEND) -> float:
    """theta(t) = theta(p(t)); zero at and below t_c."""
    return backend.theta_eps(t - T_C)


def length(t: float, backend=DEFAULT_BACKEND) -> float:
    """L(t) = L(p(t)), using L(p) = L(1-p) via |t - t_c| in eps-domain."""
    return backend.length_eps(t - T_C)


# ---------------------------------------------------------------------------
# Psi maps, t-hat, fixed point


def psi_fp_eps(R: float, N: float, backend=DEFAULT_BACKEND) -> float:
    """eps = Psi_N(R) - t_c; infinity for R <= sqrt(N / c_T) (a 1e-12
    relative tolerance absorbs rounding at the exact threshold)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if R <= 0:
        return math.inf
    target = N / (C_T * R * R)
    if target >= 1.0 - 1e-12:
        return math.inf
    if isinstance(backend, AnsatzBackend):
        return backend.eps_of_theta(target)
    lo, hi = _eps_bracket(backend)
    return _invert_increasing(backend.theta_eps, target, lo, hi)


def psi_fp(R: float, N: float, backend=DEFAULT_BACKEND) -> float:
    """First expected freeze time in a radius-R domain: the unique t > t_c
    with c_T R^2 theta(t) = N; infinity for R <= sqrt(N / c_T)."""
    return T_C + psi_fp_eps(R, N, backend)


def psi_ff_eps(R: float, zeta: float, backend=DEFAULT_BACKEND) -> float:
    """eps = Psi_zeta(R) - t_c."""
    if R <= 0:
        raise ValueError("R must be > 0 for the forest-fire map")
    if zeta <= 0:
        raise ValueError("zeta must be > 0")
    denom = zeta * C_T * R * R
    if denom == 0.0:  # underflow: R far below every relevant scale
        return math.inf
    target = 1.0 / denom
    if isinstance(backend, AnsatzBackend):
        eps = (target / backend.c_theta) ** (36.0 / 41.0)
        if backend.c_theta * eps ** THETA_EXP < 1.0:
            return eps
        return target  # above the theta cap: theta = 1, so eps = target
    lo, hi = _eps_bracket(backend)
    return _invert_increasing(lambda e: backend.theta_eps(e) * e, target, lo, hi)


def psi_ff(R: float, zeta: float, backend=DEFAULT_BACKEND) -> float:
    """First expected macroscopic burn time: the unique t > t_c with
    c_T R^2 theta(t) (t - t_c) = 1/zeta."""
    return T_C + psi_ff_eps(R, zeta, backend)


def _eps_bracket(backend) -> tuple[float, float]:
    """Valid eps range of a backend (table bounds for empirical tables)."""
    if isinstance(backend, EmpiricalBackend):
        g = np.asarray(backend.theta_table[0], float)
        return float(g[0]), float(g[-1])
    return 1e-300, 1.0


def _invert_increasing(f, target: float, lo: float | None = None,
                       hi: float | None = None) -> float:
    """Solve f(eps) = target for an increasing f by bisection in log-eps.

    With explicit (lo, hi) the bracket is fixed (empirical tables refuse
    extrapolation); otherwise the bracket grows as needed.
    """
    fixed = lo is not None
    if lo is None:
        lo = 1e-300
    if hi is None:
        hi = 1.0
        while f(hi) < target:
            hi *= 2.0
            if hi > 1e300:
                raise ValueError("target not reachable by backend")
        while f(lo) > target:
            lo /= 2.0
            if lo < 1e-300:
                raise ValueError("target below backend range")
    if fixed and (f(hi) < target or f(lo) > target):
        raise ValueError("target outside backend table range (widen tables)")
    llo, lhi = math.log(lo), math.log(hi)
    for _ in range(200):
        mid = 0.5 * (llo + lhi)
        if f(math.exp(mid)) < target:
            llo = mid
        else:
            lhi = mid
    return math.exp(0.5 * (llo + lhi))


def t_hat(t: float, model: str, param: float, backend=DEFAULT_BACKEND) -> float:
    """One step of the scale iteration: t-hat = Psi(L(t))."""
    ell = length(t, backend)
    if model == "fp":
        return psi_fp(ell, param, backend)
    if model == "ff":
        return psi_ff(ell, param, backend)
    raise ValueError("model must be 'fp' or 'ff'")


@dataclass
class FixedPoint:
    t_infinity: float
    m_infinity: float
    eps_infinity: float
    crossings: list[float] = field(default_factory=list)  # all eps with g = target


def t_infinity(model: str, param: float, backend=DEFAULT_BACKEND,
               grid_resolution: float = 1e-3) -> FixedPoint:
    """Largest fixed point of the scale iteration.

    Scans g(eps) = c_T L^2 theta (FP) or c_T L^2 theta eps (FF) on a
    descending log grid for sign changes against the target (N or 1/zeta),
    then refines each by bisection; g is not assumed monotone.
    """
    # work with ln g - ln target so huge L^2 values cannot overflow
    if model == "fp":
        ln_target = math.log(float(param))
        extra = 0.0
    elif model == "ff":
        ln_target = -math.log(float(param))
        extra = 1.0
    else:
        raise ValueError("model must be 'fp' or 'ff'")

    def ln_g(ln_e: float) -> float:
        e = math.exp(ln_e)
        th = backend.theta_eps(e)
        if th <= 0:
            return -math.inf
        return (math.log(C_T) + 2 * math.log(backend.length_eps(e))
                + math.log(th) + extra * ln_e)

    lo_ln, hi_ln = _scan_range(backend, model, param)
    grid = np.arange(hi_ln, lo_ln, -grid_resolution)
    crossings: list[float] = []
    prev_sign = None
    prev_ln = None
    for ln_e in grid:
        sign = ln_g(ln_e) >= ln_target
        if prev_sign is not None and sign != prev_sign:
            lo, hi = sorted((prev_ln, ln_e))
            crossings.append(_refine_crossing(ln_g, ln_target, lo, hi))
        prev_sign, prev_ln = sign, ln_e
    if not crossings:
        raise ValueError("no fixed point found in backend range; widen tables")
    eps = max(crossings)
    return FixedPoint(T_C + eps, backend.length_eps(eps), eps, sorted(crossings))


def _scan_range(backend, model: str, param: float) -> tuple[float, float]:
    if isinstance(backend, AnsatzBackend):
        # center a wide scan window on the closed-form fixed point
        amp = math.log(C_T) + 2 * math.log(backend.c_length) + math.log(backend.c_theta)
        if model == "fp":
            ln_eps = (amp - math.log(param)) * (36.0 / 91.0)
        else:
            ln_eps = (amp + math.log(param)) * (36.0 / 55.0)
        return ln_eps - 10.0, min(ln_eps + 10.0, math.log(0.9))
    g = np.asarray(backend.theta_table[0], float)
    g2 = np.asarray(backend.length_table[0], float)
    lo = max(g[0], g2[0])
    hi = min(g[-1], g2[-1])
    return math.log(lo) + 1e-12, math.log(hi) - 1e-12


def _refine_crossing(ln_g, ln_target, lo_ln, hi_ln) -> float:
    flo = ln_g(lo_ln) - ln_target
    for _ in range(200):
        mid = 0.5 * (lo_ln + hi_ln)
        fm = ln_g(mid) - ln_target
        if (fm >= 0) == (flo >= 0):
            lo_ln, flo = mid, fm
        else:
            hi_ln = mid
    return math.exp(0.5 * (lo_ln + hi_ln))


def exceptional_scales(model: str, param: float, k_max: int,
                       backend=DEFAULT_BACKEND) -> list[float]:
    """Exceptional scales m_1..m_k_max (unit-constant convention):
    FP: m_1 = sqrt(N),      m_{k+1} = sqrt(N / pi1(m_k));
    FF: m_1 = 1/sqrt(zeta), m_{k+1} = (m_k/sqrt(zeta)) sqrt(pi4(m_k)/pi1(m_k)).
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    out = []
    if model == "fp":
        m = math.sqrt(param)
        out.append(m)
        for _ in range(k_max - 1):
            m = math.sqrt(param / backend.pi1(m))
            out.append(m)
    elif model == "ff":
        m = 1.0 / math.sqrt(param)
        out.append(m)
        for _ in range(k_max - 1):
            m = m / math.sqrt(param) * math.sqrt(backend.pi4(m) / backend.pi1(m))
            out.append(m)
    else:
        raise ValueError("model must be 'fp' or 'ff'")
    return out


@dataclass
class DerivedConstants:
    model: str
    param: float
    t_infinity: float
    m_infinity: float
    eps_infinity: float
    v_infinity: float          # m_inf^2 pi1(m_inf), typical burnt volume scale
    zeta_ratio: float          # pi4(m_inf) / pi1(m_inf), the zeta equivalent
    a_exponent: float          # 96/5 or 96/41
    n_constant: float          # 1/log(a)

    def t_lambda(self, lam: float) -> float:
        """Near-critical parameter scale t_c + lambda * eps_infinity."""
        return T_C + lam * self.eps_infinity


def derived_constants(model: str, param: float, backend=DEFAULT_BACKEND) -> DerivedConstants:
    fp = t_infinity(model, param, backend)
    m = fp.m_infinity
    return DerivedConstants(
        model=model,
        param=param,
        t_infinity=fp.t_infinity,
        m_infinity=m,
        eps_infinity=fp.eps_infinity,
        v_infinity=m * m * backend.pi1(m),
        zeta_ratio=backend.pi4(m) / backend.pi1(m),
        a_exponent=A_FP if model == "fp" else A_FF,
        n_constant=N_FP if model == "fp" else N_FF,
    )


def iteration_exponent_check(model: str, r: float, R: float, param: float,
                             backend: AnsatzBackend = DEFAULT_BACKEND):
    """L(Psi(r))/L(Psi(R)) and the implied exponent; exactly 96/5 (FP) or
    96/41 (FF) under the unit-amplitude ansatz.  Uses eps-domain logs so the
    exponent is exact even when the eps values underflow the time scale."""
    if not isinstance(backend, AnsatzBackend):
        raise ValueError("exponent check requires the ansatz backend")
    if r > R:
        raise ValueError("need r <= R")
    if model == "fp":
        er, eR = psi_fp_eps(r, param, backend), psi_fp_eps(R, param, backend)
        if math.isinf(er) or math.isinf(eR):
            raise ValueError("r below the Psi = infinity threshold")
    elif model == "ff":
        er, eR = psi_ff_eps(r, param, backend), psi_ff_eps(R, param, backend)
    else:
        raise ValueError("model must be 'fp' or 'ff'")
    ln_ratio = -LENGTH_EXP * (math.log(er) - math.log(eR))
    ratio = math.exp(ln_ratio)
    if r == R:
        return ratio, None
    exponent = ln_ratio / math.log(r / R)
    return ratio, exponent


# ---------------------------------------------------------------------------
# log-domain numbers


@dataclass(frozen=True)
class LogScaleNumber:
    """A positive quantity stored as its natural logarithm, so parameters
    like N with ln N up to 1e12 stay representable."""

    ln: float

    @classmethod
    def from_value(cls, x: float) -> "LogScaleNumber":
        if x <= 0:
            raise ValueError("LogScaleNumber must be positive")
        return cls(math.log(x))

    @property
    def value(self) -> float:
        return math.exp(self.ln) if self.ln < 709 else math.inf

    def __mul__(self, other):
        return LogScaleNumber(self.ln + _as_ln(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return LogScaleNumber(self.ln - _as_ln(other))

    def __pow__(self, k: float):
        return LogScaleNumber(self.ln * k)

    def __add__(self, other):
        return LogScaleNumber(float(np.logaddexp(self.ln, _as_ln(other))))

    def __lt__(self, other):
        return self.ln < _as_ln(other)

    def __le__(self, other):
        return self.ln <= _as_ln(other)

    def __gt__(self, other):
        return self.ln > _as_ln(other)

    def __ge__(self, other):
        return self.ln >= _as_ln(other)


def _as_ln(x) -> float:
    if isinstance(x, LogScaleNumber):
        return x.ln
    if x <= 0:
        raise ValueError("needs a positive number")
    return math.log(x)


# ---------------------------------------------------------------------------
# avalanche schedules


@dataclass
class Schedule:
    """Deterministic freeze/burn schedule: per-step inner/outer radii and
    times (as eps = t - t_c), counts j and J, and the separation record.

    All per-step quantities are natural logs (exact in the log-domain mode,
    exp-able in the direct mode).
    """

    model: str
    ln_param: float            # ln N or ln(1/zeta)
    alpha: float
    ln_m_infinity: float
    ln_r: list[float]
    ln_R: list[float]
    ln_eps_lower: list[float]  # eps of t-underline per step
    ln_eps_upper: list[float]  # eps of t-overline per step
    j: int
    J: int
    separation: list[bool]     # R^(i+1) < r^(i)/10, for i = 0..J
    a_exponent: float
    n_constant: float

    @property
    def loglog_param(self) -> float:
        return math.log(self.ln_param)

    @property
    def count_ratio(self) -> float:
        """J normalized by ln ln of the model parameter."""
        return self.J / self.loglog_param


def _ansatz_ln(backend: AnsatzBackend):
    return (math.log(backend.c_theta), math.log(backend.c_length),
            math.log(C_T))


def _ln_eps_psi_fp(ln_arg: float, ln_N: float, backend: AnsatzBackend) -> float:
    ln_ct, ln_cl, ln_cT = _ansatz_ln(backend)
    return (36.0 / 5.0) * (ln_N - ln_cT - 2.0 * ln_arg - ln_ct)


def _ln_eps_psi_ff(ln_arg: float, ln_inv_zeta: float, backend: AnsatzBackend) -> float:
    ln_ct, ln_cl, ln_cT = _ansatz_ln(backend)
    return (36.0 / 41.0) * (ln_inv_zeta - ln_cT - 2.0 * ln_arg - ln_ct)


def _ln_length(ln_eps: float, backend: AnsatzBackend) -> float:
    ln_ct, ln_cl, ln_cT = _ansatz_ln(backend)
    return ln_cl - LENGTH_EXP * ln_eps


def schedule_fp(N=None, ln_N: float | None = None, alpha: float = 1.0,
                c0: float = 1.0, kappa4: float = 1.0, r0_ratio: float = 0.5,
                backend: AnsatzBackend = DEFAULT_BACKEND,
                max_steps: int = 400) -> Schedule:
    """Frozen-percolation avalanche schedule.

    Times per step: eps-lower from Psi_N((1/(1+delta)) (9/10) r),
    eps-upper from Psi_N(R/(1-delta)); next radii
    r' = L(t-lower)/(ln ln N)^24 and R' = (4/kappa4)(ln ln ln N) L(t-upper);
    stop when the radius drops below 3 sqrt(N/c_T).  Start scale is
    R0 = c0 * m_inf / (ln N)^alpha, r0 = r0_ratio * R0.
    """
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    ln_N = _resolve_ln(N, ln_N)
    LL = math.log(ln_N)           # the VALUE ln ln N
    if LL <= 1.0:
        raise ValueError("need ln ln N > 1 (N >= e^e)")
    LLL = math.log(LL)            # the VALUE ln ln ln N
    if LLL <= 0:
        raise ValueError("need ln ln ln N > 0")
    ln_LL = math.log(LL)          # log of the factor (ln ln N)
    ln_LLL = math.log(LLL)        # log of the factor (ln ln ln N)
    ln_ct, ln_cl, ln_cT = _ansatz_ln(backend)
    # m_inf: c_T c_L^2 eps^{-8/3} c_theta eps^{5/36} = N
    ln_eps_inf = (ln_cT + 2 * ln_cl + ln_ct - ln_N) * (36.0 / 91.0)
    ln_m_inf = _ln_length(ln_eps_inf, backend)
    ln_stop = math.log(3.0) + 0.5 * (ln_N - ln_cT)

    # R0 = c0 * m_inf / (ln N)^alpha
    ln_R = [math.log(c0) + ln_m_inf - alpha * LL]
    ln_r = [math.log(r0_ratio) + ln_R[0]]
    ln_el, ln_eu = [], []
    j = J = None
    i = 0
    while i < max_steps and (j is None or J is None or i <= J):
        le = _ln_eps_psi_fp(ln_r[i] + math.log(0.9 / (1 + DELTA)), ln_N, backend)
        ue = _ln_eps_psi_fp(ln_R[i] - math.log(1 - DELTA), ln_N, backend)
        ln_el.append(le)
        ln_eu.append(ue)
        ln_r.append(_ln_length(le, backend) - 24.0 * ln_LL)
        ln_R.append(math.log(4.0 / kappa4) + ln_LLL + _ln_length(ue, backend))
        i += 1
        if j is None and ln_r[i] < ln_stop:
            j = i - 1
        if J is None and ln_R[i] < ln_stop:
            J = i - 1
    if j is None or J is None:
        raise RuntimeError("schedule did not terminate; raise max_steps")
    separation = [ln_R[i + 1] < ln_r[i] - math.log(10.0) for i in range(J + 1)]
    return Schedule("fp", ln_N, alpha, ln_m_inf, ln_r, ln_R, ln_el, ln_eu,
                    j, J, separation, A_FP, N_FP)


def schedule_ff(zeta=None, ln_inv_zeta: float | None = None, alpha: float = 1.0,
                c0: float = 1.0, backend: AnsatzBackend = DEFAULT_BACKEND,
                max_steps: int = 400) -> Schedule:
    """FFWoR avalanche schedule.

    Per step: eps-lower from Psi_zeta(r), eps-upper from Psi_zeta(R);
    double-bar times eps * (ln ln 1/zeta) and eps / (ln ln 1/zeta)^2; next
    radii r' = L(eps-lower * lnln)/(ln ln)^24 and
    R' = (ln ln ln)^4 L(eps-upper / (ln ln)^2); stop below 1/sqrt(zeta).
    """
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    if zeta is not None:
        if isinstance(zeta, LogScaleNumber):
            ln_inv_zeta = -zeta.ln
        else:
            ln_inv_zeta = -math.log(zeta)
    if ln_inv_zeta is None:
        raise ValueError("need zeta or ln(1/zeta)")
    LL = math.log(ln_inv_zeta)    # the VALUE ln ln (1/zeta)
    if LL <= 1.0:
        raise ValueError("need ln ln (1/zeta) > 1")
    LLL = math.log(LL)            # the VALUE ln ln ln (1/zeta)
    if LLL <= 0:
        raise ValueError("need ln ln ln (1/zeta) > 0")
    ln_LL = math.log(LL)
    ln_LLL = math.log(LLL)
    ln_ct, ln_cl, ln_cT = _ansatz_ln(backend)
    # m_inf: c_T c_L^2 c_theta eps^{-8/3 + 5/36 + 1} = 1/zeta
    ln_eps_inf = (ln_cT + 2 * ln_cl + ln_ct - ln_inv_zeta) * (36.0 / 55.0)
    ln_m_inf = _ln_length(ln_eps_inf, backend)
    ln_stop = 0.5 * ln_inv_zeta

    # R0 = c0 * m_inf / (ln 1/zeta)^alpha
    ln_R = [math.log(c0) + ln_m_inf - alpha * LL]
    ln_r = [math.log(0.5) + ln_R[0]]
    ln_el, ln_eu = [], []
    j = J = None
    i = 0
    while i < max_steps and (j is None or J is None or i <= J):
        le = _ln_eps_psi_ff(ln_r[i], ln_inv_zeta, backend)
        ue = _ln_eps_psi_ff(ln_R[i], ln_inv_zeta, backend)
        ln_el.append(le)
        ln_eu.append(ue)
        # t-double-underline: eps-lower * lnln; t-double-overline: eps-upper / lnln^2
        ln_r.append(_ln_length(le + ln_LL, backend) - 24.0 * ln_LL)
        ln_R.append(4.0 * ln_LLL + _ln_length(ue - 2.0 * ln_LL, backend))
        i += 1
        if j is None and ln_r[i] < ln_stop:
            j = i - 1
        if J is None and ln_R[i] < ln_stop:
            J = i - 1
    if j is None or J is None:
        raise RuntimeError("schedule did not terminate; raise max_steps")
    separation = [ln_R[i + 1] < ln_r[i] - math.log(10.0) for i in range(J + 1)]
    return Schedule("ff", ln_inv_zeta, alpha, ln_m_inf, ln_r, ln_R, ln_el, ln_eu,
                    j, J, separation, A_FF, N_FF)


def _resolve_ln(N, ln_N):
    if N is not None:
        if isinstance(N, LogScaleNumber):
            return N.ln
        return math.log(N)
    if ln_N is None:
        raise ValueError("need N or ln_N")
    return float(ln_N)


def schedule_fp_direct(N: float, alpha: float = 1.0, c0: float = 1.0,
                       kappa4: float = 1.0, r0_ratio: float = 0.5,
                       backend=DEFAULT_BACKEND, max_steps: int = 400) -> Schedule:
    """Floating-point schedule through the generic backend calls (usable for
    ln N up to ~700); cross-checks the log-domain path."""
    LL = math.log(math.log(N))
    if LL <= 1.0:
        raise ValueError("need ln ln N > 1")
    LLL = math.log(LL)
    fp = t_infinity("fp", N, backend)
    stop = 3.0 * math.sqrt(N / C_T)
    R = [c0 * fp.m_infinity / math.log(N) ** alpha]
    r = [r0_ratio * R[0]]
    el, eu = [], []
    j = J = None
    i = 0
    while i < max_steps and (j is None or J is None or i <= J):
        le = psi_fp_eps(r[i] * 0.9 / (1 + DELTA), N, backend) if r[i] > 0 else math.inf
        ue = psi_fp_eps(R[i] / (1 - DELTA), N, backend) if R[i] > 0 else math.inf
        el.append(le)
        eu.append(ue)
        r.append(backend.length_eps(le) / LL ** 24 if math.isfinite(le) else 0.0)
        R.append((4.0 / kappa4) * LLL * backend.length_eps(ue) if math.isfinite(ue) else 0.0)
        i += 1
        if j is None and r[i] < stop:
            j = i - 1
        if J is None and R[i] < stop:
            J = i - 1
    if j is None or J is None:
        raise RuntimeError("schedule did not terminate")
    separation = [R[i + 1] < r[i] / 10.0 for i in range(J + 1)]
    return Schedule("fp", math.log(N), alpha, math.log(fp.m_infinity),
                    [_safe_ln(x) for x in r], [_safe_ln(x) for x in R],
                    [_safe_ln(x) for x in el], [_safe_ln(x) for x in eu],
                    j, J, separation, A_FP, N_FP)


def schedule_ff_direct(zeta: float, alpha: float = 1.0, c0: float = 1.0,
                       backend=DEFAULT_BACKEND, max_steps: int = 400) -> Schedule:
    """Floating-point FFWoR schedule through generic backend calls."""
    ln_inv_zeta = -math.log(zeta)
    LL = math.log(ln_inv_zeta)
    if LL <= 1.0:
        raise ValueError("need ln ln (1/zeta) > 1")
    LLL = math.log(LL)
    fp = t_infinity("ff", zeta, backend)
    stop = 1.0 / math.sqrt(zeta)
    R = [c0 * fp.m_infinity / ln_inv_zeta ** alpha]
    r = [0.5 * R[0]]
    el, eu = [], []
    j = J = None
    i = 0
    while i < max_steps and (j is None or J is None or i <= J):
        le = psi_ff_eps(r[i], zeta, backend) if r[i] > 0 else math.inf
        ue = psi_ff_eps(R[i], zeta, backend)
        el.append(le)
        eu.append(ue)
        r.append(backend.length_eps(le * LL) / LL ** 24 if math.isfinite(le) else 0.0)
        R.append(LLL ** 4 * backend.length_eps(ue / LL ** 2))
        i += 1
        if j is None and r[i] < stop:
            j = i - 1
        if J is None and R[i] < stop:
            J = i - 1
    if j is None or J is None:
        raise RuntimeError("schedule did not terminate")
    separation = [R[i + 1] < r[i] / 10.0 for i in range(J + 1)]
    return Schedule("ff", ln_inv_zeta, alpha, math.log(fp.m_infinity),
                    [_safe_ln(x) for x in r], [_safe_ln(x) for x in R],
                    [_safe_ln(x) for x in el], [_safe_ln(x) for x in eu],
                    j, J, separation, A_FF, N_FF)


def _safe_ln(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


# ---------------------------------------------------------------------------
# Monte Carlo characteristic length


@dataclass
class LengthEstimate:
    p: float
    length: int
    capped: bool
    probes: list[tuple[int, int, int]]  # (n, successes, samples)

    @property
    def regularized(self) -> float:
        """L-tilde: 0 at p in {0, 1} where the raw minimum is 1."""
        if self.p in (0.0, 1.0):
            return 0.0
        return float(self.length)


def characteristic_length_mc(p: float, seed: int, eps_l: float = 0.001,
                             max_samples: int = 200_000,
                             batch: int = 2000, cap: int = 4096) -> LengthEstimate:
    """Smallest n with the short-direction crossing probability of
    [0,2n] x [0,n] at most eps_l (vacant crossing mirror for p > p_c).

    Binary search over a doubling grid; each probe samples until the Wilson
    CI excludes eps_l (or the sample cap is hit, tie-broken by the point
    estimate and flagged via ``capped`` when the grid cap is hit).
    """
    if p == P_C:
        raise ValueError("L(p_c) is infinite")
    from .lattice import Rect
    from .percolation import RectGrid, wilson_ci
    from . import rng as rnglib

    color = "occupied" if p < P_C else "vacant"
    probes: list[tuple[int, int, int]] = []

    def crossing_leq(n: int) -> bool:
        grid = RectGrid(Rect(0, 2 * n, 0, n))
        gen = rnglib.bulk_generator(seed, n, rnglib.ESTIMATOR)
        hits = 0
        total = 0
        while total < max_samples:
            take = min(batch, max_samples - total)
            for _ in range(take):
                hits += grid.crossing_sample(gen, p, "vertical", color)
            total += take
            lo, hi = wilson_ci(hits, total)
            if lo > eps_l:
                probes.append((n, hits, total))
                return False
            if hi < eps_l:
                probes.append((n, hits, total))
                return True
        probes.append((n, hits, total))
        return hits / total <= eps_l

    n = 1
    while n <= cap and not crossing_leq(n):
        n *= 2
    if n > cap:
        return LengthEstimate(p, cap, True, probes)
    if n == 1:
        return LengthEstimate(p, 1, False, probes)
    lo, hi = n // 2, n  # crossing(lo) > eps_l >= crossing(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if crossing_leq(mid):
            hi = mid
        else:
            lo = mid
    return LengthEstimate(p, hi, False, probes)
