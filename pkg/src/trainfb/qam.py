"""
Uncoded QAM over the AWGN feedback link: symbol error rate and the
probability that a user's feedback word contains at least one symbol error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .core import BadConstellation, SystemConfig, is_valid_constellation


@dataclass(frozen=True)
class Constellation:
    m: int

    def __post_init__(self):
        if not is_valid_constellation(int(self.m)):
            raise BadConstellation(f"M = {self.m} is neither BPSK nor square QAM")

    @property
    def bits_per_symbol(self) -> float:
        return math.log2(self.m)


def q_function(x):
    """Gaussian tail probability Q(x) = erfc(x / sqrt 2) / 2."""
    q = 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))
    return float(q) if q.ndim == 0 else q


def qam_ser(c: Constellation, rho: float) -> float:
    """Symbol error probability of uncoded BPSK or square M-QAM at SNR ``rho``
    (average symbol energy over noise power)."""
    if rho < 0:
        raise ValueError(f"rho must be non-negative, got {rho}")
    if c.m == 2:
        return q_function(math.sqrt(2.0 * rho))
    # Per-rail PAM error; the square root inside Q is the standard form.
    p_rail = 2.0 * (1.0 - 1.0 / math.sqrt(c.m)) * q_function(math.sqrt(3.0 * rho / (c.m - 1)))
    return 1.0 - (1.0 - p_rail) ** 2


def fb_error_prob(p_s, t_fb, cfg: SystemConfig):
    """Probability that any of the ``t_fb / n_t`` symbols of one user's
    feedback is received in error."""
    p_s = np.asarray(p_s, dtype=float)
    if np.any((p_s < 0) | (p_s > 1)):
        raise ValueError("p_s must lie in [0, 1]")
    n_sym = np.asarray(t_fb, dtype=float) / cfg.n_t
    with np.errstate(divide="ignore"):
        pe = -np.expm1(n_sym * np.log1p(-p_s))
    pe = np.where(n_sym == 0, 0.0, pe)
    return float(pe) if pe.ndim == 0 else pe
