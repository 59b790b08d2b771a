"""
Closed-form rate gaps, the ideal-CSI zero-forcing rate and the net-rate
objective.

Each gap function returns the argument ``g`` of ``log2(1 + g)``. The plain
``*_g`` helpers accept numpy arrays and are used by the optimizers and the
exhaustive scans; the :class:`GapValue`-returning functions are the scalar
public API and validate their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import exp1

from .core import (InfeasibleSplit, ResourceSplit, SchemeKind, SchemeSpec,
                   SystemConfig, ZeroAllocation)

LN2 = math.log(2.0)


@dataclass(frozen=True)
class GapValue:
    g_linear: float

    @property
    def gap_bits(self) -> float:
        return math.log2(1.0 + self.g_linear)


def mmse_error_variance(t1, cfg: SystemConfig):
    """Per-coefficient error variance of the UT's LMMSE channel estimate
    after ``t1`` shared pilot symbols."""
    var = 1.0 / (1.0 + (np.asarray(t1, dtype=float) / cfg.n_t) * cfg.rho)
    return float(var) if var.ndim == 0 else var


def analog_g(t1, t_fb, w1, w_fb):
    return w1 / t1 + w_fb / t_fb


def digital_g(t1, bits_b, n_t, rho):
    """Training term plus RVQ quantization distortion for ``bits_b`` bits."""
    return (n_t - 1) / t1 + rho * np.exp2(-np.asarray(bits_b, dtype=float) / (n_t - 1))


def digital_g_symbols(t1, t_fb, n_t, rho, levels):
    """Digital gap when each of the ``t_fb / n_t`` feedback symbols carries
    ``log2(levels)`` bits; ``levels = 1 + rho`` is the error-free case."""
    return (n_t - 1) / t1 + rho * np.power(float(levels), -np.asarray(t_fb, dtype=float)
                                           / (n_t * (n_t - 1)))


def _positive(name, value):
    if not value > 0:
        raise ZeroAllocation(f"{name} must be positive, got {value}")


def g_analog(split: ResourceSplit, scheme: SchemeSpec) -> GapValue:
    _positive("t1", split.t1)
    if scheme.w_fb > 0:
        _positive("t_fb", split.t_fb)
        return GapValue(analog_g(split.t1, split.t_fb, scheme.w1, scheme.w_fb))
    return GapValue(scheme.w1 / split.t1)


def g_tdd(t_tdd: float, cfg: SystemConfig) -> GapValue:
    _positive("t_tdd", t_tdd)
    return GapValue((cfg.n_t - 1) / t_tdd)


def quantization_bits(t_fb: float, cfg: SystemConfig, bits_per_symbol: float) -> float:
    """Bits per user carried by ``t_fb / n_t`` feedback symbols."""
    return (t_fb / cfg.n_t) * bits_per_symbol


def errorfree_bits_per_symbol(cfg: SystemConfig) -> float:
    return math.log2(1.0 + cfg.rho)


def g_digital_errorfree(split: ResourceSplit, cfg: SystemConfig) -> GapValue:
    _positive("t1", split.t1)
    return GapValue(float(digital_g_symbols(split.t1, split.t_fb, cfg.n_t, cfg.rho, 1.0 + cfg.rho)))


def g_digital_quantized(t1: float, bits_b: float, cfg: SystemConfig) -> GapValue:
    _positive("t1", t1)
    return GapValue(float(digital_g(t1, bits_b, cfg.n_t, cfg.rho)))


def expected_ln1p_exponential(a: float) -> float:
    """E[ln(1 + a X)] for X ~ Exp(1), i.e. exp(1/a) E1(1/a)."""
    if a <= 0:
        return 0.0
    x = 1.0 / a
    if x < 500.0:
        return math.exp(x) * float(exp1(x))
    # Asymptotic series of exp(x) E1(x); truncation error below x**-7 * 720.
    return (1.0 / x) * (1 - 1 / x + 2 / x**2 - 6 / x**3 + 24 / x**4 - 120 / x**5)


def zf_rate_nats(cfg: SystemConfig) -> float:
    """Per-user ZF rate with perfect CSI, in nats.

    With K = n_t i.i.d. Rayleigh users each beam is independent of its own
    user's channel, so the effective gain is unit-mean exponential.
    """
    return expected_ln1p_exponential(cfg.rho / cfg.n_t)


def zf_rate(cfg: SystemConfig) -> float:
    """Per-user ZF rate with perfect CSI, in bits per channel use."""
    return zf_rate_nats(cfg) / LN2


def net_rate(cfg: SystemConfig, scheme: SchemeSpec, split: ResourceSplit, gap: GapValue,
             pe_fb: float = 0.0, *, r_zf_bits: float | None = None) -> float:
    """Net spectral efficiency per user, clamped at zero.

    ``pe_fb`` is the probability that a user's feedback is lost; it must be
    zero except for uncoded-QAM digital feedback.
    """
    if split.t_total > cfg.blocklength_t:
        raise InfeasibleSplit(
            f"T1 + Tfb = {split.t_total:g} exceeds the block length {cfg.blocklength_t}")
    if not 0.0 <= pe_fb <= 1.0:
        raise ValueError(f"pe_fb must lie in [0, 1], got {pe_fb}")
    if pe_fb and scheme.kind is not SchemeKind.DIGITAL_QAM:
        raise ValueError(f"{scheme.kind.value} feedback cannot be received in error")
    r_zf = zf_rate(cfg) if r_zf_bits is None else r_zf_bits
    return net_rate_value(split.t_total, cfg.blocklength_t, r_zf, gap.gap_bits, pe_fb)


def net_rate_value(t_total, t, r_zf, gap_bits, pe_fb=0.0):
    """Array form of :func:`net_rate` without validation."""
    t_total = np.asarray(t_total, dtype=float)
    rate = (1.0 - t_total / t) * (1.0 - pe_fb) * (r_zf - gap_bits)
    rate = np.where(t_total <= t, np.maximum(rate, 0.0), 0.0)
    return float(rate) if rate.ndim == 0 else rate
