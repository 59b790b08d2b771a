"""
Link-level Monte Carlo simulation of one coherence block: downlink training,
analog or RVQ feedback, zero-forcing beamforming and per-user SINR.

Arrays carry users along the last axis: ``h[..., :, k]`` is user ``k``'s
channel vector, so a batch of blocks has shape ``(n_blocks, n_t, n_t)``.
Noise power is normalized to one, so the per-user data SNR is ``rho / n_t``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import gaps
from .core import (BadTrialCount, BitBudgetTooLarge, BudgetTooSmall, ResourceSplit,
                   SchemeKind, SchemeSpec, SingularChannel, SystemConfig)
from .qam import Constellation, fb_error_prob, qam_ser

MAX_CODEBOOK_BITS = 24
COND_LIMIT = 1e12
# Upper bound on codebook entries materialized at once by the explicit quantizer.
_CODEBOOK_ENTRIES = 1 << 18


@dataclass(frozen=True)
class ChannelBlock:
    h: np.ndarray


@dataclass(frozen=True)
class CsiEstimate:
    h_hat_ut: np.ndarray
    h_hat_bs: Optional[np.ndarray]
    error_var_ut: float


@dataclass(frozen=True)
class BeamformerSet:
    v: np.ndarray
    valid: np.ndarray


@dataclass(frozen=True)
class TrialOutcome:
    sinr: np.ndarray
    rate_bits: np.ndarray
    interference: np.ndarray


@dataclass(frozen=True)
class CampaignResult:
    kind: SchemeKind
    t1: float
    t_fb: float
    bits_b: Optional[int]
    constellation_m: Optional[int]
    pe_fb: float
    trials: int
    skipped: int
    mean_rate_bits: float
    stderr_bits: float
    bound_bits: float
    zf_rate_bits: float
    seed: int

    @property
    def bound_holds(self) -> bool:
        return self.mean_rate_bits + 3.0 * self.stderr_bits >= self.bound_bits


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly-symmetric CN(0, 1) samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * math.sqrt(0.5)


def draw_channel(rng_seed, cfg: SystemConfig, n_blocks: Optional[int] = None) -> ChannelBlock:
    rng = make_rng(rng_seed)
    shape = (cfg.n_t, cfg.n_t) if n_blocks is None else (n_blocks, cfg.n_t, cfg.n_t)
    return ChannelBlock(complex_normal(rng, shape))


def ut_train_estimate(block: ChannelBlock, t1, cfg: SystemConfig, rng) -> CsiEstimate:
    """LMMSE estimate of every channel coefficient from ``t1`` shared pilots.

    The received pilot observation is ``sqrt(t1 rho / n_t) h + z``.
    """
    rng = make_rng(rng)
    snr = t1 * cfg.rho / cfg.n_t
    s = math.sqrt(snr) * block.h + complex_normal(rng, block.h.shape)
    h_hat = (math.sqrt(snr) / (1.0 + snr)) * s
    return CsiEstimate(h_hat, None, 1.0 / (1.0 + snr))


def analog_feedback_observation(h_hat_ut: np.ndarray, t_fb, cfg: SystemConfig, rng) -> np.ndarray:
    """Unbiased BS copy of the UT estimate after ``t_fb / n_t**2`` uses per coefficient.

    Repetitions are combined coherently, leaving additive noise of variance
    ``n_t**2 / (rho t_fb)`` per coefficient.
    """
    reps = t_fb / cfg.n_t ** 2
    noise_var = 1.0 / (cfg.rho * reps)
    return h_hat_ut + math.sqrt(noise_var) * complex_normal(make_rng(rng), h_hat_ut.shape)


def analog_feedback(est: CsiEstimate, t_fb, cfg: SystemConfig, rng) -> CsiEstimate:
    if t_fb < cfg.n_t ** 2:
        raise BudgetTooSmall(f"analog feedback needs t_fb >= n_t^2 = {cfg.n_t ** 2}, got {t_fb}")
    y = analog_feedback_observation(est.h_hat_ut, t_fb, cfg, rng)
    signal_var = 1.0 - est.error_var_ut
    noise_var = cfg.n_t ** 2 / (cfg.rho * t_fb)
    h_bs = (signal_var / (signal_var + noise_var)) * y
    return CsiEstimate(est.h_hat_ut, h_bs, est.error_var_ut)


def random_unit_vectors(rng: np.random.Generator, shape, n_t: int) -> np.ndarray:
    z = complex_normal(rng, tuple(shape) + (n_t,))
    return z / np.linalg.norm(z, axis=-1, keepdims=True)


def _check_bits(bits_b):
    if bits_b < 0 or bits_b != int(bits_b):
        raise ValueError(f"bits_b must be a non-negative integer, got {bits_b}")
    if bits_b > MAX_CODEBOOK_BITS:
        raise BitBudgetTooLarge(f"B = {bits_b} exceeds the {MAX_CODEBOOK_BITS}-bit codebook cap")


def rvq_quantize(est: CsiEstimate, bits_b: int, cfg: SystemConfig, rng,
                 codebook: Optional[np.ndarray] = None) -> CsiEstimate:
    """Quantize each user's estimated direction with a random codebook.

    Every user gets its own fresh codebook of ``2**bits_b`` isotropic unit
    vectors, unless ``codebook`` (shape ``(2**bits_b, n_t)``) is supplied, in
    which case all users share it. The BS estimate is the codeword with the
    largest ``|h_hat^H w|``.
    """
    _check_bits(bits_b)
    rng = make_rng(rng)
    h = np.moveaxis(est.h_hat_ut, -1, -2)          # (..., user, n_t)
    n_cw = 1 << int(bits_b)
    lead = h.shape[:-1]
    flat = h.reshape(-1, cfg.n_t)
    out = np.empty_like(flat)
    step = max(1, _CODEBOOK_ENTRIES // n_cw)
    for start in range(0, flat.shape[0], step):
        chunk = flat[start:start + step]
        if codebook is None:
            cb = random_unit_vectors(rng, (chunk.shape[0], n_cw), cfg.n_t)
            corr = np.abs(np.einsum("icn,in->ic", cb.conj(), chunk))
            best = np.argmax(corr, axis=1)
            out[start:start + step] = cb[np.arange(chunk.shape[0]), best]
        else:
            corr = np.abs(chunk @ codebook.conj().T)
            out[start:start + step] = codebook[np.argmax(corr, axis=1)]
    w = out.reshape(lead + (cfg.n_t,))
    return CsiEstimate(est.h_hat_ut, np.moveaxis(w, -1, -2), est.error_var_ut)


def rvq_quantize_sampled(est: CsiEstimate, bits_b: float, cfg: SystemConfig, rng) -> CsiEstimate:
    """Draw the RVQ output directly from its distribution.

    For an isotropic codebook of ``N = 2**bits_b`` vectors the best
    codeword's ``sin^2`` to the estimate is the minimum of ``N`` variables with
    CDF ``x**(n_t - 1)``, and its residual direction is uniform on the
    orthogonal complement. Sampling these two pieces gives the same law as
    :func:`rvq_quantize` at a cost independent of ``bits_b``.
    """
    if bits_b < 0:
        raise ValueError(f"bits_b must be non-negative, got {bits_b}")
    rng = make_rng(rng)
    n = cfg.n_t
    h = np.moveaxis(est.h_hat_ut, -1, -2)
    u = h / np.linalg.norm(h, axis=-1, keepdims=True)
    lead = u.shape[:-1]
    n_cw = 2.0 ** bits_b
    p = rng.random(lead)
    sin2 = (-np.expm1(np.log1p(-p) / n_cw)) ** (1.0 / (n - 1))
    z = complex_normal(rng, lead + (n,))
    z = z - u * np.sum(u.conj() * z, axis=-1, keepdims=True)
    z = z / np.linalg.norm(z, axis=-1, keepdims=True)
    w = np.sqrt(1.0 - sin2)[..., None] * u + np.sqrt(sin2)[..., None] * z
    return CsiEstimate(est.h_hat_ut, np.moveaxis(w, -1, -2), est.error_var_ut)


def sin2_angle(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``sin^2`` of the angle between column vectors of ``a`` and ``b``."""
    num = np.abs(np.sum(a.conj() * b, axis=-2)) ** 2
    den = np.sum(np.abs(a) ** 2, axis=-2) * np.sum(np.abs(b) ** 2, axis=-2)
    return 1.0 - num / den


def zf_beamformers(h_hat_bs: np.ndarray) -> BeamformerSet:
    """Unit-norm zero-forcing beams: ``v_k`` is orthogonal to every other
    user's estimated channel.

    Blocks whose estimate has condition number above ``COND_LIMIT`` are
    flagged invalid and get identity beams.
    """
    h = np.asarray(h_hat_bs)
    single = h.ndim == 2
    if single:
        h = h[None]
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(h)
    valid = np.isfinite(cond) & (cond <= COND_LIMIT)
    eye = np.broadcast_to(np.eye(h.shape[-1], dtype=complex), h.shape)
    safe = np.where(valid[:, None, None], h, eye)
    v = np.linalg.solve(np.conj(np.swapaxes(safe, -1, -2)), eye)
    v = v / np.linalg.norm(v, axis=-2, keepdims=True)
    if single:
        return BeamformerSet(v[0], valid[0])
    return BeamformerSet(v, valid)


def trial_outcome(h: np.ndarray, v: np.ndarray, cfg: SystemConfig) -> TrialOutcome:
    """Per-user SINR with equal power ``rho / n_t`` per beam."""
    gains = np.abs(np.conj(np.swapaxes(h, -1, -2)) @ v) ** 2 * (cfg.rho / cfg.n_t)
    signal = np.diagonal(gains, axis1=-2, axis2=-1)
    interference = gains.sum(axis=-1) - signal
    sinr = signal / (1.0 + interference)
    return TrialOutcome(sinr, np.log2(1.0 + sinr), interference)


def _default_bits(split, cfg, kind, m):
    bps = gaps.errorfree_bits_per_symbol(cfg) if kind is SchemeKind.DIGITAL_ERRORFREE \
        else Constellation(m).bits_per_symbol
    return int(math.floor(gaps.quantization_bits(split.t_fb, cfg, bps) + 1e-9))


def campaign_bound(cfg: SystemConfig, scheme: SchemeSpec, split: ResourceSplit,
                   bits_b: Optional[int] = None, constellation_m: Optional[int] = None):
    """Analytic lower bound on the per-user rate and the feedback error probability."""
    r_zf = gaps.zf_rate(cfg)
    kind = scheme.kind
    if kind is SchemeKind.ANALOG:
        return r_zf - gaps.g_analog(split, scheme).gap_bits, 0.0
    if kind is SchemeKind.TDD:
        return r_zf - gaps.g_tdd(split.t1, cfg).gap_bits, 0.0
    gap = gaps.g_digital_quantized(split.t1, bits_b, cfg).gap_bits
    if kind is SchemeKind.DIGITAL_ERRORFREE:
        return r_zf - gap, 0.0
    pe = fb_error_prob(qam_ser(Constellation(constellation_m), cfg.rho), split.t_fb, cfg)
    return (1.0 - pe) * (r_zf - gap), pe


def _simulate_chunk(cfg, kind, split, bits_b, pe, rvq_method, seed, index, n):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
    block = draw_channel(rng, cfg, n)
    est = ut_train_estimate(block, split.t1, cfg, rng)
    erased = None
    if kind is SchemeKind.TDD:
        h_bs = est.h_hat_ut
    elif kind is SchemeKind.ANALOG:
        h_bs = analog_feedback(est, split.t_fb, cfg, rng).h_hat_bs
    else:
        quantize = rvq_quantize if rvq_method == "codebook" else rvq_quantize_sampled
        h_bs = quantize(est, bits_b, cfg, rng).h_hat_bs
        if kind is SchemeKind.DIGITAL_QAM:
            # A corrupted feedback word points the BS at an arbitrary codeword.
            erased = rng.random((n, cfg.n_t)) < pe
            junk = np.moveaxis(random_unit_vectors(rng, (n, cfg.n_t), cfg.n_t), -1, -2)
            h_bs = np.where(erased[:, None, :], junk, h_bs)
    beams = zf_beamformers(h_bs)
    rates = trial_outcome(block.h, beams.v, cfg).rate_bits
    if erased is not None:
        rates = np.where(erased, 0.0, rates)
    per_block = rates.mean(axis=-1)[beams.valid]
    return float(per_block.sum()), float(np.square(per_block).sum()), per_block.size, \
        int(n - per_block.size)


def run_campaign(cfg: SystemConfig, scheme: SchemeSpec, split: ResourceSplit, trials: int,
                 seed: int, *, bits_b: Optional[int] = None,
                 constellation_m: Optional[int] = None, rvq_method: str = "sampled",
                 chunk_size: int = 4096, workers: int = 1,
                 max_skip_fraction: float = 1e-3) -> CampaignResult:
    """Average the per-user rate over ``trials`` independent coherence blocks.

    Trials are processed in fixed chunks whose random streams are derived
    from ``(seed, chunk index)``; chunk sums are reduced in chunk order, so
    the statistics are bit-identical for any ``workers`` count.

    Parameters
    ----------
    bits_b : int, optional
        RVQ bits per user for digital schemes. Defaults to what the split's
        feedback symbols carry, rounded down.
    constellation_m : int, optional
        QAM order for uncoded digital feedback (required for that scheme).
    rvq_method : {"sampled", "codebook"}
        Exact-law sampling of the RVQ output, or explicit random codebooks.
    """
    if trials < 1:
        raise BadTrialCount(f"trials must be at least 1, got {trials}")
    if rvq_method not in ("sampled", "codebook"):
        raise ValueError(f"unknown rvq_method {rvq_method!r}")
    kind = scheme.kind
    if kind is SchemeKind.ANALOG and split.t_fb < cfg.n_t ** 2:
        raise BudgetTooSmall(f"analog feedback needs t_fb >= {cfg.n_t ** 2}")
    if kind is SchemeKind.DIGITAL_QAM and constellation_m is None:
        raise ValueError("uncoded QAM feedback needs constellation_m")
    if kind in (SchemeKind.DIGITAL_ERRORFREE, SchemeKind.DIGITAL_QAM):
        if bits_b is None:
            bits_b = _default_bits(split, cfg, kind, constellation_m)
        if rvq_method == "codebook":
            _check_bits(bits_b)
    else:
        bits_b = None
    bound, pe = campaign_bound(cfg, scheme, split, bits_b, constellation_m)

    sizes = [min(chunk_size, trials - s) for s in range(0, trials, chunk_size)]

    def job(i):
        return _simulate_chunk(cfg, kind, split, bits_b, pe, rvq_method, seed, i, sizes[i])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    else:
        parts = [job(i) for i in range(len(sizes))]

    total = total_sq = 0.0
    count = skipped = 0
    for s, sq, c, k in parts:
        total += s
        total_sq += sq
        count += c
        skipped += k
    if skipped > max_skip_fraction * trials or count == 0:
        raise SingularChannel(f"{skipped} of {trials} blocks had singular channel estimates")
    mean = total / count
    var = max(total_sq / count - mean * mean, 0.0) * count / max(count - 1, 1)
    return CampaignResult(kind, split.t1, split.t_fb, bits_b, constellation_m, pe, trials,
                          skipped, mean, math.sqrt(var / count), bound, gaps.zf_rate(cfg),
                          seed)
