"""
Two-step optimization of the training/feedback split.

The inner step splits a fixed budget ``T_t = T1 + Tfb`` so as to minimize the
rate gap; the outer step picks ``T_t`` to maximize the net rate
``(1 - T_t/T) (R_zf - loss(T_t))``. Integer solutions are obtained by scanning
every integer split of the budgets adjacent to the continuous optimum.

Rates are reported in bits. The closed-form approximations at the bottom of
the module come from first-order expansions of the natural logarithm, so they
take the ZF rate in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from . import gaps
from .core import (AllocationResult, BudgetTooSmall, Infeasible, ResourceSplit,
                   SchemeKind, SchemeSpec, SystemConfig, validate_config)
from .qam import Constellation, fb_error_prob, qam_ser

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
COARSE_POINTS = 64


@dataclass(frozen=True)
class KConstant:
    k_value: float


@dataclass(frozen=True)
class InnerSolution:
    """Best split of one budget.

    ``g_value`` is the linear gap argument, except for uncoded-QAM feedback
    where it is the effective loss ``w`` in bits. ``loss_bits`` is the
    quantity subtracted from the ZF rate in every case.
    """

    split: ResourceSplit
    g_value: float
    loss_bits: float
    lagrange_mu: Optional[float] = None
    constellation_m: Optional[int] = None
    pe_fb: float = 0.0


def k_constant(scheme: SchemeSpec) -> KConstant:
    # Expanded square, so integer weights with an integer cross term stay exact.
    w1, wfb = scheme.w1, scheme.w_fb
    return KConstant(w1 + wfb + 2.0 * math.sqrt(w1 * wfb))


# -- one-dimensional search ---------------------------------------------------

def golden_section_min(f: Callable[[float], float], a: float, b: float,
                       tol: float = 1e-9) -> float:
    """Minimizer of a unimodal ``f`` on ``[a, b]`` to within ``tol``."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return c if fc <= fd else d


def bracketed_min(f: Callable[[float], float], lo: float, hi: float, *,
                  tol: float = 1e-9, geometric: bool = False,
                  f_vec: Callable[[np.ndarray], np.ndarray] | None = None) -> float:
    """Coarse scan followed by golden-section search around the best point.

    The scan guards against the kinks that minimum-allocation clamps put into
    otherwise unimodal objectives.
    """
    if hi - lo <= tol:
        return lo
    if geometric and lo > 0:
        grid = np.geomspace(lo, hi, COARSE_POINTS)
    else:
        grid = np.linspace(lo, hi, COARSE_POINTS)
    vals = f_vec(grid) if f_vec is not None else np.array([f(x) for x in grid])
    i = int(np.argmin(vals))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, len(grid) - 1)]
    x = golden_section_min(f, a, b, tol)
    return x if f(x) <= vals[i] else float(grid[i])


# -- per-scheme loss ----------------------------------------------------------

def _qam_pe(cfg: SystemConfig, m: int, t_fb):
    return fb_error_prob(qam_ser(Constellation(m), cfg.rho), t_fb, cfg)


def loss_bits(t1, t_fb, cfg: SystemConfig, scheme: SchemeSpec, m: Optional[int] = None,
              r_zf_bits: Optional[float] = None):
    """Rate loss in bits subtracted from R_zf for the split ``(t1, t_fb)``.

    Vectorized over ``t1`` and ``t_fb``.
    """
    n, rho = cfg.n_t, cfg.rho
    kind = scheme.kind
    if kind is SchemeKind.ANALOG:
        g = gaps.analog_g(t1, t_fb, scheme.w1, scheme.w_fb)
    elif kind is SchemeKind.TDD:
        g = scheme.w1 / np.asarray(t1, dtype=float)
    elif kind is SchemeKind.DIGITAL_ERRORFREE:
        g = gaps.digital_g_symbols(t1, t_fb, n, rho, 1.0 + rho)
    else:
        g = gaps.digital_g_symbols(t1, t_fb, n, rho, m)
        pe = _qam_pe(cfg, m, t_fb)
        r_zf = gaps.zf_rate(cfg) if r_zf_bits is None else r_zf_bits
        return (1.0 - pe) * np.log2(1.0 + g) + pe * r_zf
    return np.log2(1.0 + g)


def _solution(t1, t_fb, cfg, scheme, m=None, mu=None, integral=False, r_zf_bits=None):
    loss = float(loss_bits(t1, t_fb, cfg, scheme, m, r_zf_bits))
    kind = scheme.kind
    pe = 0.0
    if kind is SchemeKind.DIGITAL_QAM:
        pe = float(_qam_pe(cfg, m, t_fb))
        g_value = loss
    elif kind is SchemeKind.TDD:
        g_value = scheme.w1 / t1
    elif kind is SchemeKind.ANALOG:
        g_value = float(gaps.analog_g(t1, t_fb, scheme.w1, scheme.w_fb))
    else:
        g_value = float(gaps.digital_g_symbols(t1, t_fb, cfg.n_t, cfg.rho, 1.0 + cfg.rho))
    t1, t_fb = (int(round(t1)), int(round(t_fb))) if integral else (float(t1), float(t_fb))
    return InnerSolution(ResourceSplit(t1, t_fb, integral), g_value, loss, mu, m, pe)


def _check_budget(t_t, scheme):
    if t_t < scheme.min_budget:
        raise BudgetTooSmall(
            f"budget {t_t:g} < minimum training + feedback {scheme.min_budget}")


# -- inner step ---------------------------------------------------------------

def inner_split_analog(t_t: float, scheme: SchemeSpec, *,
                       respect_minimums: bool = True) -> InnerSolution:
    """Weighted harmonic split: each part is proportional to the square root
    of its weight, and the minimized gap is ``K / t_t``.

    With ``respect_minimums`` the closed form is projected onto the box
    ``t1 >= min_t1, t_fb >= min_tfb``.
    """
    if not t_t > 0:
        raise BudgetTooSmall(f"budget must be positive, got {t_t}")
    sw1, swfb = math.sqrt(scheme.w1), math.sqrt(scheme.w_fb)
    mu = t_t / (sw1 + swfb)
    t1, t_fb = (sw1 * mu, swfb * mu) if swfb else (float(t_t), 0.0)
    if respect_minimums:
        _check_budget(t_t, scheme)
        if t_fb < scheme.min_tfb:
            t1, t_fb, mu = t_t - scheme.min_tfb, float(scheme.min_tfb), None
        elif t1 < scheme.min_t1:
            t1, t_fb, mu = float(scheme.min_t1), t_t - scheme.min_t1, None
    if scheme.w_fb == 0:
        g = scheme.w1 / t1
    else:
        g = gaps.analog_g(t1, t_fb, scheme.w1, scheme.w_fb)
    loss = math.log2(1.0 + g)
    return InnerSolution(ResourceSplit(t1, t_fb), g, loss, mu)


def digital_tfb_of_mu(mu, n_t: int, rho: float, levels: float):
    """Unconstrained stationary feedback length for Lagrange parameter ``mu``."""
    c = n_t * (n_t - 1)
    ln_l = math.log(levels)
    return c * (2.0 * np.log(mu) + math.log(rho * ln_l / c)) / ln_l


def digital_tfb_of_t1(t1, n_t: int, rho: float, levels: float):
    """Same stationary feedback length, parameterized by the training length."""
    c = n_t * (n_t - 1)
    ln_l = math.log(levels)
    return c * (2.0 * np.log(t1) + math.log(rho * ln_l / (n_t * (n_t - 1) ** 2))) / ln_l


def _inner_digital_levels(t_t, n_t, rho, levels, min_t1, min_tfb):
    """Solve T1(mu) + max(Tfb(mu), min_tfb) = t_t by bisection on mu."""
    sa = math.sqrt(n_t - 1)

    def total(mu):
        return sa * mu + max(float(digital_tfb_of_mu(mu, n_t, rho, levels)), min_tfb)

    lo, hi = 0.0, t_t / sa
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if total(mid) < t_t:
            lo = mid
        else:
            hi = mid
    mu = 0.5 * (lo + hi)
    t1 = sa * mu
    if t1 < min_t1:
        return float(min_t1), t_t - min_t1, None
    return t1, t_t - t1, mu


def inner_split_digital(t_t: float, cfg: SystemConfig, scheme: SchemeSpec) -> InnerSolution:
    """Budget split for error-free digital feedback (capacity-achieving link).

    Training grows linearly in the multiplier ``mu`` while feedback grows
    like ``ln mu``; ``t_fb`` is clamped at ``min_tfb`` and ``t1`` at ``min_t1``.
    """
    _check_budget(t_t, scheme)
    t1, t_fb, mu = _inner_digital_levels(t_t, cfg.n_t, cfg.rho, 1.0 + cfg.rho,
                                         scheme.min_t1, scheme.min_tfb)
    return _solution(t1, t_fb, cfg, scheme, mu=mu)


def inner_split_qam(t_t: float, cfg: SystemConfig, c: Constellation, *,
                    scheme: Optional[SchemeSpec] = None,
                    r_zf_bits: Optional[float] = None) -> InnerSolution:
    """Minimize the effective loss ``w`` of uncoded ``c.m``-QAM feedback.

    ``w = (1 - Pe) log2(1 + g) + Pe R_zf`` with ``Pe`` the probability that at
    least one of the user's feedback symbols is in error.
    """
    if scheme is None:
        scheme = SchemeSpec.build(SchemeKind.DIGITAL_QAM, cfg.n_t, (c.m,))
    _check_budget(t_t, scheme)
    r_zf = gaps.zf_rate(cfg) if r_zf_bits is None else r_zf_bits
    lo, hi = float(scheme.min_t1), t_t - scheme.min_tfb

    def w_vec(t1):
        return loss_bits(t1, t_t - t1, cfg, scheme, c.m, r_zf)

    t1 = bracketed_min(lambda x: float(w_vec(x)), lo, hi, tol=1e-9 * max(1.0, t_t),
                       f_vec=w_vec)
    return _solution(t1, t_t - t1, cfg, scheme, c.m, r_zf_bits=r_zf)


def inner_split(t_t: float, cfg: SystemConfig, scheme: SchemeSpec, m: Optional[int] = None,
                *, r_zf_bits: Optional[float] = None) -> InnerSolution:
    """Continuous inner split for any scheme.

    For uncoded QAM without an explicit ``m`` the best constellation of the
    scheme's set is chosen.
    """
    kind = scheme.kind
    if kind in (SchemeKind.ANALOG, SchemeKind.TDD):
        return inner_split_analog(t_t, scheme)
    if kind is SchemeKind.DIGITAL_ERRORFREE:
        return inner_split_digital(t_t, cfg, scheme)
    r_zf = gaps.zf_rate(cfg) if r_zf_bits is None else r_zf_bits
    ms = (m,) if m is not None else scheme.constellation_set
    sols = [inner_split_qam(t_t, cfg, Constellation(mm), scheme=scheme, r_zf_bits=r_zf)
            for mm in ms]
    return min(sols, key=lambda s: s.loss_bits)


def inner_split_integer(budget: int, cfg: SystemConfig, scheme: SchemeSpec,
                        m: Optional[int] = None, *,
                        r_zf_bits: Optional[float] = None) -> InnerSolution:
    """Best integer split of an integer budget, by scanning every ``t1``."""
    budget = int(budget)
    _check_budget(budget, scheme)
    r_zf = gaps.zf_rate(cfg) if r_zf_bits is None else r_zf_bits
    if scheme.kind is SchemeKind.DIGITAL_QAM and m is None:
        sols = [inner_split_integer(budget, cfg, scheme, mm, r_zf_bits=r_zf)
                for mm in scheme.constellation_set]
        return min(sols, key=lambda s: s.loss_bits)
    if scheme.kind is SchemeKind.TDD:
        return _solution(budget, 0, cfg, scheme, integral=True, r_zf_bits=r_zf)
    t1 = np.arange(scheme.min_t1, budget - scheme.min_tfb + 1, dtype=float)
    losses = loss_bits(t1, budget - t1, cfg, scheme, m, r_zf)
    best = float(t1[int(np.argmin(losses))])
    return _solution(best, budget - best, cfg, scheme, m, integral=True, r_zf_bits=r_zf)


# -- outer step ---------------------------------------------------------------

def outer_gradient_nats(t_t, cfg: SystemConfig, k: KConstant,
                        r_zf_nats: Optional[float] = None):
    """Derivative of ``(1 - T_t/T)(R_zf - ln(1 + K/T_t))`` with respect to T_t."""
    t = cfg.blocklength_t
    r = gaps.zf_rate_nats(cfg) if r_zf_nats is None else r_zf_nats
    kv = k.k_value
    x = kv / t_t
    return kv * (1.0 - t_t / t) / (t_t ** 2 * (1.0 + x)) - (r - np.log1p(x)) / t


def stationarity_residual_nats(t_t, cfg: SystemConfig, k: KConstant,
                               r_zf_nats: Optional[float] = None):
    """Left minus right side of the optimality condition for the budget."""
    t = cfg.blocklength_t
    r = gaps.zf_rate_nats(cfg) if r_zf_nats is None else r_zf_nats
    kv = k.k_value
    return kv * (t - t_t) / (t_t ** 2 * (1.0 + kv / t_t)) - (r - math.log1p(kv / t_t))


def _continuous_budget(cfg, scheme, m, r_zf):
    t = float(cfg.blocklength_t)
    lo = float(scheme.min_budget)

    def neg_f(t_t):
        sol = inner_split(t_t, cfg, scheme, m, r_zf_bits=r_zf)
        return -gaps.net_rate_value(t_t, t, r_zf, sol.loss_bits)

    t_star = bracketed_min(neg_f, lo, t, tol=1e-10 * t, geometric=True)
    if scheme.kind in (SchemeKind.ANALOG, SchemeKind.TDD):
        t_star = _polish_analog(t_star, cfg, scheme, lo, t)
    return t_star


def _polish_analog(t_star, cfg, scheme, lo, t):
    # Exact root of the closed-form gradient when the optimum is unclamped.
    sol = inner_split_analog(t_star, scheme)
    if sol.lagrange_mu is None:
        return t_star
    k = k_constant(scheme)
    a, b = max(lo, 0.5 * t_star), min(t, 2.0 * t_star)
    ga, gb = outer_gradient_nats(a, cfg, k), outer_gradient_nats(b, cfg, k)
    if ga > 0 > gb:
        root = brentq(lambda x: outer_gradient_nats(x, cfg, k), a, b, xtol=1e-13, rtol=1e-15)
        if inner_split_analog(root, scheme).lagrange_mu is not None:
            return root
    return t_star


def _integer_budget(cfg, scheme, m, t_star, r_zf):
    t = cfg.blocklength_t
    lo_b, hi_b = scheme.min_budget, t
    cache = {}

    def value(b):
        if b not in cache:
            sol = inner_split_integer(b, cfg, scheme, m, r_zf_bits=r_zf)
            cache[b] = (gaps.net_rate_value(b, t, r_zf, sol.loss_bits), sol)
        return cache[b][0]

    lo = max(lo_b, math.floor(t_star) - 2)
    hi = min(hi_b, math.ceil(t_star) + 2)
    for b in range(lo, hi + 1):
        value(b)
    # Widen the window while its best point sits on an edge.
    while True:
        best = max(range(lo, hi + 1), key=lambda b: (value(b), -b))
        if best == lo and lo > lo_b:
            lo -= 1
            value(lo)
        elif best == hi and hi < hi_b:
            hi += 1
            value(hi)
        else:
            break
    return best, cache[best][1], cache[best][0]


def _assemble(cfg, scheme, sol: InnerSolution, r_zf) -> AllocationResult:
    split = sol.split
    kind = scheme.kind
    bits, pe, m = 0.0, 0.0, None
    if kind is SchemeKind.ANALOG:
        gap = gaps.g_analog(split, scheme)
    elif kind is SchemeKind.TDD:
        gap = gaps.g_tdd(split.t1, cfg)
    else:
        if kind is SchemeKind.DIGITAL_ERRORFREE:
            bps = gaps.errorfree_bits_per_symbol(cfg)
        else:
            m = sol.constellation_m
            bps = Constellation(m).bits_per_symbol
            pe = sol.pe_fb
        bits = gaps.quantization_bits(split.t_fb, cfg, bps)
        gap = gaps.g_digital_quantized(split.t1, bits, cfg)
    rate = gaps.net_rate(cfg, scheme, split, gap, pe, r_zf_bits=r_zf)
    return AllocationResult(kind, split, m, bits, gap.gap_bits, pe, rate, r_zf)


def outer_optimize(cfg: SystemConfig, scheme: SchemeSpec, *,
                   integral: bool = True) -> AllocationResult:
    """Maximize the net rate over the total budget and its split.

    The continuous optimum is found first; with ``integral`` the integer
    splits of the budgets around it are then scanned exhaustively. For
    uncoded QAM the search is repeated for every constellation in the
    scheme's set and the best one is returned.

    Raises
    ------
    Infeasible
        If no split yields a positive net rate.
    """
    validate_config(cfg, scheme)
    r_zf = gaps.zf_rate(cfg)
    ms = scheme.constellation_set if scheme.kind is SchemeKind.DIGITAL_QAM else (None,)
    best = None
    for m in ms:
        t_star = _continuous_budget(cfg, scheme, m, r_zf)
        if integral:
            _, sol, rate = _integer_budget(cfg, scheme, m, t_star, r_zf)
        else:
            sol = inner_split(t_star, cfg, scheme, m, r_zf_bits=r_zf)
            rate = gaps.net_rate_value(t_star, cfg.blocklength_t, r_zf, sol.loss_bits)
        if best is None or rate > best[0]:
            best = (rate, sol)
    rate, sol = best
    if not rate > 0:
        raise Infeasible(
            f"{scheme.kind.value}: no split gives a positive net rate at T = {cfg.blocklength_t}")
    return _assemble(cfg, scheme, sol, r_zf)


# -- closed-form approximations ----------------------------------------------

def approx_tt_upper(cfg: SystemConfig, k: KConstant, r_zf_nats: Optional[float] = None) -> float:
    """Upper bound sqrt(K T / R_zf) on the optimal budget (R_zf in nats)."""
    r = gaps.zf_rate_nats(cfg) if r_zf_nats is None else r_zf_nats
    return math.sqrt(k.k_value * cfg.blocklength_t / r)


def approx_t1(cfg: SystemConfig, r_zf_nats: Optional[float] = None) -> float:
    """Approximate optimal training length sqrt((n_t - 1) T / R_zf)."""
    r = gaps.zf_rate_nats(cfg) if r_zf_nats is None else r_zf_nats
    return math.sqrt((cfg.n_t - 1) * cfg.blocklength_t / r)


def approx_effective_gap(cfg: SystemConfig, k: KConstant, r_zf_nats: Optional[float] = None,
                         *, bits: bool = True) -> float:
    """Approximate loss ``R_zf - f(T_t*) ~ 2 sqrt(K R_zf / T)``.

    Evaluated in nats and converted to bits unless ``bits`` is false.
    """
    r = gaps.zf_rate_nats(cfg) if r_zf_nats is None else r_zf_nats
    gap = 2.0 * math.sqrt(k.k_value * r / cfg.blocklength_t)
    return gap / gaps.LN2 if bits else gap
