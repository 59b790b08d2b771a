"""Independent reference computations used by the tests.

Nothing here calls the allocator; rates come straight from the closed-form
expressions, the ZF rate from mpmath quadrature and Q from math.erfc.
"""

import math
from functools import lru_cache

import mpmath as mp
import numpy as np


@lru_cache(maxsize=None)
def zf_rate_bits(n_t, rho):
    mp.mp.dps = 30
    a = mp.mpf(rho) / n_t
    v = mp.quad(lambda x: mp.log(1 + a * x) * mp.exp(-x), [0, 1, 10, mp.inf])
    return float(v / mp.log(2))


def q(x):
    return 0.5 * math.erfc(x / math.sqrt(2))


def ser(m, rho):
    if m == 2:
        return q(math.sqrt(2 * rho))
    p = 2 * (1 - 1 / math.sqrt(m)) * q(math.sqrt(3 * rho / (m - 1)))
    return 1 - (1 - p) ** 2


def gap_and_pe(kind, t1, tfb, n_t, rho, m=None):
    """Linear gap argument and feedback error probability, vectorized."""
    t1 = np.asarray(t1, dtype=float)
    tfb = np.asarray(tfb, dtype=float)
    train = (n_t - 1) / t1
    if kind == "analog":
        return train + n_t * (n_t - 1) / tfb, 0.0
    if kind == "tdd":
        return train, 0.0
    bps = math.log2(1 + rho) if kind == "digital-errorfree" else math.log2(m)
    bits = tfb / n_t * bps
    g = train + rho * 2.0 ** (-bits / (n_t - 1))
    if kind == "digital-errorfree":
        return g, 0.0
    return g, 1 - (1 - ser(m, rho)) ** (tfb / n_t)


MINIMA = {"analog": lambda n: (n, n * n), "tdd": lambda n: (n, 0),
          "digital-errorfree": lambda n: (n, n), "digital-qam": lambda n: (n, n)}


def exhaustive_best(kind, n_t, rho, t, constellations=(2, 4, 16, 64)):
    """Best net rate over every feasible integer (t1, tfb) pair.

    Returns (rate, t1, tfb, m).
    """
    r = zf_rate_bits(n_t, rho)
    min_t1, min_tfb = MINIMA[kind](n_t)
    t1 = np.arange(min_t1, t + 1, dtype=float)
    if kind == "tdd":
        tfb = np.zeros(1)
    else:
        tfb = np.arange(min_tfb, t - min_t1 + 1, dtype=float)
    T1, TFB = np.meshgrid(t1, tfb, indexing="ij")
    ok = T1 + TFB <= t
    best = (-1.0, None, None, None)
    for m in (constellations if kind == "digital-qam" else (None,)):
        g, pe = gap_and_pe(kind, T1, TFB, n_t, rho, m)
        rate = (1 - (T1 + TFB) / t) * (1 - pe) * (r - np.log2(1 + g))
        rate = np.where(ok, rate, -np.inf)
        i = np.unravel_index(np.argmax(rate), rate.shape)
        if rate[i] > best[0]:
            best = (float(rate[i]), int(T1[i]), int(TFB[i]), m)
    return best


def best_split_on_grid(kind, t_t, n_t, rho, step, m=None, r_zf=None, lo=None, hi=None):
    """Minimum loss over T1 on a uniform grid with T1 + Tfb = t_t."""
    lo = n_t if lo is None else lo
    hi = t_t - MINIMA[kind](n_t)[1] if hi is None else hi
    t1 = np.arange(lo, hi + step / 2, step)
    g, pe = gap_and_pe(kind, t1, t_t - t1, n_t, rho, m)
    if kind == "digital-qam":
        r = zf_rate_bits(n_t, rho) if r_zf is None else r_zf
        val = (1 - pe) * np.log2(1 + g) + pe * r
    else:
        val = g
    i = int(np.argmin(val))
    return float(val[i]), float(t1[i])
