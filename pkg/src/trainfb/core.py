"""
Shared domain types for the training/feedback allocation problem.

All rates handled by the package are in bits per channel use per user.
SNR is configured in dB and converted to linear scale exactly once, when a
:class:`SystemConfig` is built.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

DEFAULT_CONSTELLATIONS: Tuple[int, ...] = (2, 4, 16, 64)


class TrainFbError(Exception):
    """Base class for all package errors."""


class ConfigError(TrainFbError, ValueError):
    """Invalid system or scheme configuration.

    ``problems`` lists every violated invariant, not only the first one.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class NtTooSmall(ConfigError):
    pass


class BlocklengthTooSmall(ConfigError):
    pass


class BadConstellation(ConfigError):
    pass


class ZeroAllocation(TrainFbError, ValueError):
    """A gap function was evaluated with zero training or feedback."""


class InfeasibleSplit(TrainFbError, ValueError):
    """Training plus feedback exceeds the coherence block."""


class BudgetTooSmall(TrainFbError, ValueError):
    """The budget cannot hold the minimum training and feedback lengths."""


class Infeasible(TrainFbError):
    """No split gives a positive net rate."""


class BitBudgetTooLarge(TrainFbError, ValueError):
    pass


class SingularChannel(TrainFbError):
    """Too many simulated blocks had an ill-conditioned channel estimate."""


class BadTrialCount(TrainFbError, ValueError):
    pass


def is_valid_constellation(m: int) -> bool:
    """True for BPSK (2) and square QAM orders (powers of 4)."""
    if m == 2:
        return True
    if m < 4 or m & (m - 1):
        return False
    return (m.bit_length() - 1) % 2 == 0


def db_to_linear(snr_db: float) -> float:
    return 10.0 ** (snr_db / 10.0)


class SchemeKind(str, enum.Enum):
    ANALOG = "analog"
    TDD = "tdd"
    DIGITAL_ERRORFREE = "digital-errorfree"
    DIGITAL_QAM = "digital-qam"

    @classmethod
    def parse(cls, name: str) -> "SchemeKind":
        key = name.strip().lower().replace("_", "-")
        aliases = {"digital": cls.DIGITAL_ERRORFREE, "qam": cls.DIGITAL_QAM}
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ConfigError(f"unknown scheme {name!r} (expected one of: {valid})") from None


@dataclass(frozen=True)
class SystemConfig:
    """Base station with ``n_t`` antennas serving ``n_t`` single-antenna users.

    Parameters
    ----------
    n_t : int
        Number of BS antennas, equal to the number of users.
    snr_db : float
        Nominal SNR P/N0 in dB. The linear value is available as ``rho``.
    blocklength_t : int
        Channel uses per coherence block.
    """

    n_t: int
    snr_db: float
    blocklength_t: int
    rho: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "rho", db_to_linear(self.snr_db))


@dataclass(frozen=True)
class SchemeSpec:
    """Feedback regime plus its weights and minimum allocations.

    Use :meth:`build` rather than the constructor; it fills in the
    regime-specific constants for a given antenna count.
    """

    kind: SchemeKind
    n_t: int
    w1: float
    w_fb: float
    min_t1: int
    min_tfb: int
    constellation_set: Tuple[int, ...] = ()

    @classmethod
    def build(cls, kind, n_t: int, constellations=None) -> "SchemeSpec":
        kind = SchemeKind.parse(kind) if isinstance(kind, str) else SchemeKind(kind)
        w1 = float(n_t - 1)
        if kind is SchemeKind.ANALOG:
            return cls(kind, n_t, w1, float(n_t * (n_t - 1)), n_t, n_t * n_t)
        if kind is SchemeKind.TDD:
            return cls(kind, n_t, w1, 0.0, n_t, 0)
        # Digital: w_fb is the exponent scale N_t(N_t-1) of the quantization term.
        w_fb = float(n_t * (n_t - 1))
        if kind is SchemeKind.DIGITAL_ERRORFREE:
            return cls(kind, n_t, w1, w_fb, n_t, n_t)
        cs = tuple(constellations) if constellations else DEFAULT_CONSTELLATIONS
        return cls(kind, n_t, w1, w_fb, n_t, n_t, tuple(int(m) for m in cs))

    @property
    def min_budget(self) -> int:
        return self.min_t1 + self.min_tfb


@dataclass(frozen=True)
class ResourceSplit:
    """Training and feedback symbols spent in one coherence block."""

    t1: float
    t_fb: float
    integral: bool = False

    @property
    def t_total(self) -> float:
        return self.t1 + self.t_fb

    def check(self, cfg: SystemConfig, scheme: SchemeSpec) -> None:
        """Raise unless the split fits ``cfg`` and respects ``scheme`` minimums."""
        if self.t_total > cfg.blocklength_t:
            raise InfeasibleSplit(
                f"T1 + Tfb = {self.t_total:g} exceeds the block length {cfg.blocklength_t}")
        if self.integral and (self.t1 != int(self.t1) or self.t_fb != int(self.t_fb)):
            raise InfeasibleSplit(f"integral split has fractional entries ({self.t1}, {self.t_fb})")
        if self.t1 < scheme.min_t1 or self.t_fb < scheme.min_tfb:
            raise BudgetTooSmall(
                f"split ({self.t1:g}, {self.t_fb:g}) below minimums "
                f"({scheme.min_t1}, {scheme.min_tfb})")


@dataclass(frozen=True)
class AllocationResult:
    kind: SchemeKind
    split: ResourceSplit
    constellation_m: Optional[int]
    bits_b: float
    rate_gap_bits: float
    pe_fb: float
    net_rate_bits: float
    zf_rate_bits: float


def validate_config(cfg: SystemConfig, scheme: SchemeSpec) -> Tuple[SystemConfig, SchemeSpec]:
    """Check every invariant of ``cfg`` and ``scheme`` and return them unchanged.

    Raises the error class of the first violation found; its message and
    ``problems`` attribute list all violations.
    """
    found = []
    if cfg.n_t < 2:
        found.append((NtTooSmall, f"n_t = {cfg.n_t} < 2"))
    if not (cfg.rho > 0 and math.isfinite(cfg.rho)):
        found.append((ConfigError, f"linear SNR {cfg.rho} is not positive and finite"))
    if scheme.n_t != cfg.n_t:
        found.append((ConfigError, f"scheme built for n_t = {scheme.n_t}, config has {cfg.n_t}"))
    if cfg.blocklength_t < 2 * cfg.n_t:
        found.append((BlocklengthTooSmall, f"T = {cfg.blocklength_t} < 2 n_t = {2 * cfg.n_t}"))
    if scheme.min_budget > cfg.blocklength_t:
        found.append((BlocklengthTooSmall,
                      f"minimum T_t = {scheme.min_t1} + {scheme.min_tfb} = "
                      f"{scheme.min_budget} > T = {cfg.blocklength_t}"))
    if scheme.w1 <= 0 or scheme.w_fb < 0:
        found.append((ConfigError, f"bad weights w1 = {scheme.w1}, w_fb = {scheme.w_fb}"))
    if scheme.kind is SchemeKind.DIGITAL_QAM:
        if not scheme.constellation_set:
            found.append((BadConstellation, "empty constellation set"))
        bad = [m for m in scheme.constellation_set if not is_valid_constellation(m)]
        if bad:
            found.append((BadConstellation,
                          f"constellation orders {bad} are not 2 or a power of 4"))
    elif scheme.constellation_set:
        found.append((BadConstellation, f"{scheme.kind.value} takes no constellation set"))
    if found:
        exc_type = found[0][0]
        raise exc_type([msg for _, msg in found])
    return cfg, scheme
