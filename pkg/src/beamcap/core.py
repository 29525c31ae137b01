"""Channel and power-budget types plus the single-constraint capacities.

Capacities are in nats. Noise variance is fixed to 1, so every power is an
SNR-scaled linear quantity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

# relative tolerance shared by every boolean predicate in the package
REL_TOL = 1e-12


class InvalidBudgetError(ValueError):
    """Raised when a power value is missing, non-positive or not finite."""


class ChannelFormatError(ValueError):
    """Raised when channel input cannot be parsed."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ChannelVector:
    """Complex MISO channel gains ``h_i`` (noise-normalized).

    ``sort_perm[j]`` is the user index of the j-th strongest antenna, so
    ``magnitudes[sort_perm]`` is non-increasing. Ties keep user order.
    """

    gains: np.ndarray
    magnitudes: np.ndarray = field(init=False, repr=False)
    phases: np.ndarray = field(init=False, repr=False)
    sort_perm: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        g = np.array(self.gains, dtype=complex).reshape(-1)
        if g.size == 0:
            raise ChannelFormatError("channel must have at least one antenna")
        if not np.all(np.isfinite(g)):
            raise ChannelFormatError("channel gains must be finite")
        mags = np.abs(g)
        phases = np.angle(g)
        # keep phases in (-pi, pi]
        phases = np.where(phases <= -math.pi, math.pi, phases)
        perm = np.argsort(-mags, kind="stable")
        object.__setattr__(self, "gains", _frozen(g))
        object.__setattr__(self, "magnitudes", _frozen(mags))
        object.__setattr__(self, "phases", _frozen(phases))
        object.__setattr__(self, "sort_perm", _frozen(perm))

    @classmethod
    def from_polar(cls, magnitudes, phases=None) -> "ChannelVector":
        mags = np.asarray(magnitudes, dtype=float)
        if np.any(mags < 0):
            raise ChannelFormatError("magnitudes must be non-negative")
        ph = np.zeros_like(mags) if phases is None else np.asarray(phases, dtype=float)
        if ph.shape != mags.shape:
            raise ChannelFormatError("magnitudes and phases differ in length")
        return cls(mags * np.exp(1j * ph))

    @property
    def m(self) -> int:
        return self.gains.size

    @property
    def nonzero(self) -> np.ndarray:
        """Mask of antennas with non-zero gain; the others are excluded from solving."""
        return self.magnitudes > 0

    @property
    def inverse_perm(self) -> np.ndarray:
        inv = np.empty_like(self.sort_perm)
        inv[self.sort_perm] = np.arange(self.m)
        return inv

    @property
    def sorted_magnitudes(self) -> np.ndarray:
        return self.magnitudes[self.sort_perm]

    def l1(self) -> float:
        return float(np.sum(self.magnitudes))

    def l2(self) -> float:
        return float(np.sqrt(np.sum(self.magnitudes**2)))

    def rotated(self, factors) -> "ChannelVector":
        """Multiply each gain by the matching unit-modulus factor."""
        return ChannelVector(self.gains * np.asarray(factors))

    def to_json(self) -> dict:
        return {"gains": [[float(z.real), float(z.imag)] for z in self.gains]}


def channel_from_json(obj: dict) -> ChannelVector:
    """Parse ``{"gains": [[re, im], ...]}`` or ``{"magnitudes": [...], "phases": [...]}``.

    A bare real number in ``gains`` is accepted as a real gain.
    """
    if not isinstance(obj, dict):
        raise ChannelFormatError("channel JSON must be an object")
    if "gains" in obj:
        gains = []
        for item in obj["gains"]:
            if isinstance(item, (int, float)):
                gains.append(complex(item, 0.0))
            elif isinstance(item, (list, tuple)) and len(item) == 2:
                gains.append(complex(float(item[0]), float(item[1])))
            else:
                raise ChannelFormatError(f"bad gain entry {item!r}; expected [re, im]")
        return ChannelVector(gains)
    if "magnitudes" in obj:
        return ChannelVector.from_polar(obj["magnitudes"], obj.get("phases"))
    raise ChannelFormatError("channel JSON needs 'gains' or 'magnitudes'")


def _check_power(value, name: str) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise InvalidBudgetError(f"{name} must be a number, got {value!r}") from None
    if not math.isfinite(v) or v <= 0:
        raise InvalidBudgetError(f"{name} must be positive and finite, got {value!r}")
    return v


@dataclass(frozen=True)
class PowerBudget:
    """Total power ``total`` and per-antenna limits.

    ``per_antenna`` is a float for identical limits or a sequence of
    per-antenna limits ``P_i``.
    """

    total: float
    per_antenna: Union[float, Sequence[float]]

    def __post_init__(self):
        object.__setattr__(self, "total", _check_power(self.total, "total power"))
        if np.ndim(self.per_antenna) == 0:
            pa = _check_power(self.per_antenna, "per-antenna power")
        else:
            pa = tuple(_check_power(p, f"per-antenna power [{i}]")
                       for i, p in enumerate(self.per_antenna))
            if not pa:
                raise InvalidBudgetError("per-antenna list is empty")
        object.__setattr__(self, "per_antenna", pa)

    @property
    def is_uniform(self) -> bool:
        return isinstance(self.per_antenna, float)

    def limits(self, m: int) -> np.ndarray:
        """Per-antenna limits as an array of length ``m``."""
        if self.is_uniform:
            return np.full(m, self.per_antenna)
        if len(self.per_antenna) != m:
            raise InvalidBudgetError(
                f"{len(self.per_antenna)} per-antenna limits for {m} antennas")
        return np.array(self.per_antenna)

    def effective_total(self, m: int) -> float:
        """``P* = min(P_T, sum P_i)``."""
        return min(self.total, float(np.sum(self.limits(m))))

    def to_json(self) -> dict:
        pa = self.per_antenna if self.is_uniform else list(self.per_antenna)
        return {"P_T": self.total, "P": pa}


@dataclass(frozen=True)
class TruncatedChannel:
    """Norms of a sorted magnitude vector split after position ``start - 1``.

    ``start`` is 1-based (``k + 1``); ``tail_l2`` is the l2 norm of entries
    ``start..m`` and ``head_l1`` the l1 norm of entries ``1..start-1``.
    """

    start: int
    tail_l2: float
    head_l1: float

    @classmethod
    def split(cls, sorted_mags, k: int) -> "TruncatedChannel":
        g = np.asarray(sorted_mags, dtype=float)
        if not 0 <= k <= g.size:
            raise ValueError(f"split index {k} outside 0..{g.size}")
        return cls(start=k + 1,
                   tail_l2=float(np.sqrt(np.sum(g[k:] ** 2))),
                   head_l1=float(np.sum(g[:k])))


def capacity_mrt(h: ChannelVector, total_power: float) -> float:
    """Capacity under the total-power constraint alone, ``ln(1 + P_T |h|_2^2)``."""
    pt = _check_power(total_power, "total power")
    return float(np.log1p(pt * np.sum(h.magnitudes**2)))


def capacity_egt(h: ChannelVector, per_antenna) -> float:
    """Capacity under per-antenna constraints alone.

    For identical limits this is ``ln(1 + P |h|_1^2)``. A list of limits
    gives ``ln(1 + (sum_i sqrt(P_i) |h_i|)^2)``.
    """
    if np.ndim(per_antenna) == 0:
        p = _check_power(per_antenna, "per-antenna power")
        return float(np.log1p(p * np.sum(h.magnitudes) ** 2))
    limits = PowerBudget(1.0, per_antenna).limits(h.m)
    return float(np.log1p(np.sum(np.sqrt(limits) * h.magnitudes) ** 2))


def nats_to_bits(x):
    return x / math.log(2)
