"""Closed-form optimal beamforming for a MISO channel under joint total and
per-antenna power constraints.

The optimum is rank-1, ``R* = P* u u^H``. The ``k`` antennas with the largest
normalized gains ``|h_i| / sqrt(P_i)`` sit on their per-antenna limits; the
rest receive amplitudes proportional to ``|h_i|`` (maximum ratio transmission)
and share whatever total power is left. All work is done in sorted order and
mapped back to user antenna order at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (REL_TOL, ChannelVector, PowerBudget, TruncatedChannel,
                   capacity_egt, capacity_mrt)


class ActiveCountError(RuntimeError):
    """No admissible active-constraint count exists; indicates a bug or bad input."""


@dataclass(frozen=True)
class BeamformingSolution:
    """Optimal rank-1 covariance ``p_star * u u^H`` and derived quantities.

    Vectors (``u``, ``amplitudes``, ``active``) are in user antenna order.
    ``c1`` lists the active amplitudes in decreasing normalized-gain order;
    for identical limits they are all ``1/sqrt(m*)``. ``h_threshold`` is the
    gain threshold for identical limits and the threshold on
    ``|h_i|/sqrt(P_i)`` otherwise; it is 0 when every limit is active.
    """

    p_star: float
    u: np.ndarray
    k: int
    amplitudes: np.ndarray
    c1: tuple
    c2: float
    snr: float
    capacity_nats: float
    h_threshold: float
    active: np.ndarray
    uniform: bool
    u_defined: bool = True

    @property
    def m(self) -> int:
        return self.u.size

    @property
    def covariance(self) -> np.ndarray:
        return self.p_star * np.outer(self.u, self.u.conj())

    @property
    def antenna_powers(self) -> np.ndarray:
        return self.p_star * np.abs(self.u) ** 2

    def to_json(self) -> dict:
        return {
            "p_star": self.p_star,
            "k": self.k,
            "u": [[float(z.real), float(z.imag)] for z in self.u],
            "amplitudes": [float(a) for a in self.amplitudes],
            "active": [bool(x) for x in self.active],
            "c1": list(self.c1),
            "c2": self.c2,
            "snr": self.snr,
            "capacity_nats": self.capacity_nats,
            "h_threshold": self.h_threshold,
            "u_defined": self.u_defined,
        }


def _holds(lhs: float, rhs: float) -> bool:
    # "<=" with ties (and near-ties within REL_TOL) counted as holding
    return lhs <= rhs + REL_TOL * abs(rhs)


def find_active_count(sorted_mags, m_star: float) -> int:
    """Least ``k`` in ``0..floor(m*)`` with ``|h_{k+1}| <= |h_{k+1}^m|_2 / sqrt(m* - k)``.

    Evaluated in the squared form ``|h_{k+1}|^2 (m* - k) <= sum_{i>k} |h_i|^2``.
    Returns ``m`` when ``m* >= m``.

    Parameters
    ----------
    sorted_mags : array_like
        Non-increasing positive magnitudes.
    m_star : float
        ``P*/P``.
    """
    g = np.asarray(sorted_mags, dtype=float)
    m = g.size
    if _holds(m, m_star):
        return m
    tails = _tail_energy(g)
    for k in range(int(math.floor(m_star)) + 1):
        if _holds(g[k] ** 2 * (m_star - k), tails[k]):
            return k
    raise ActiveCountError(f"no active count found for m*={m_star!r}, mags={g.tolist()}")


def _tail_energy(g: np.ndarray) -> np.ndarray:
    """``out[k] = sum_{i>=k} g_i^2`` (0-based), with ``out[m] = 0``."""
    sq = g**2
    out = np.zeros(g.size + 1)
    for i in range(g.size - 1, -1, -1):
        out[i] = out[i + 1] + sq[i]
    return out


def _active_count(g: np.ndarray, p: np.ndarray, total: float) -> int:
    """Least solution of the heterogeneous threshold rule on sorted inputs."""
    m = g.size
    if _holds(float(np.sum(p)), total):
        return m
    tails = _tail_energy(g)
    used = 0.0
    for k in range(m):
        # |h_{k+1}|^2 (P_T - sum_{i<=k} P_i) <= P_{k+1} |h_{k+1}^m|_2^2
        if _holds(g[k] ** 2 * (total - used), p[k] * tails[k]):
            return k
        used += p[k]
    raise ActiveCountError(f"no active count found for P_T={total!r}")


def _sorted_problem(h: ChannelVector, budget: PowerBudget):
    limits = budget.limits(h.m)
    idx = np.flatnonzero(h.nonzero)
    key = h.magnitudes[idx] / np.sqrt(limits[idx])
    order = idx[np.argsort(-key, kind="stable")]
    return order, h.magnitudes[order], limits[order]


def _assemble(h, budget, order, g, p, k, p_star) -> BeamformingSolution:
    m_nz = g.size
    tail = TruncatedChannel.split(g, k)
    c1 = np.sqrt(p[:k] / p_star)
    if k < m_nz:
        remaining = p_star - float(np.sum(p[:k]))
        c2 = math.sqrt(max(remaining, 0.0) / p_star) / tail.tail_l2
        if budget.is_uniform:
            h_th = float(c1[0] / c2) if k > 0 else tail.tail_l2 / math.sqrt(p_star / budget.per_antenna)
        else:
            h_th = tail.tail_l2 / math.sqrt(max(budget.total - float(np.sum(p[:k])), 0.0))
    else:
        c2 = 0.0
        h_th = 0.0
    a_sorted = np.concatenate([c1, c2 * g[k:]])
    snr = p_star * (float(np.dot(c1, g[:k])) + c2 * tail.tail_l2**2) ** 2

    amplitudes = np.zeros(h.m)
    amplitudes[order] = a_sorted
    active = np.zeros(h.m, dtype=bool)
    active[order[:k]] = True
    u = amplitudes * np.exp(1j * h.phases)
    for arr in (amplitudes, active, u):
        arr.setflags(write=False)
    return BeamformingSolution(
        p_star=p_star, u=u, k=k, amplitudes=amplitudes,
        c1=tuple(float(c) for c in c1), c2=float(c2), snr=float(snr),
        capacity_nats=float(np.log1p(snr)), h_threshold=float(h_th),
        active=active, uniform=budget.is_uniform)


def _zero_solution(h: ChannelVector, budget: PowerBudget) -> BeamformingSolution:
    zeros = np.zeros(h.m)
    zeros.setflags(write=False)
    u = np.zeros(h.m, dtype=complex)
    u.setflags(write=False)
    active = np.zeros(h.m, dtype=bool)
    active.setflags(write=False)
    return BeamformingSolution(
        p_star=budget.effective_total(h.m), u=u, k=0, amplitudes=zeros, c1=(),
        c2=0.0, snr=0.0, capacity_nats=0.0, h_threshold=0.0, active=active,
        uniform=budget.is_uniform, u_defined=False)


def solve(h: ChannelVector, budget: PowerBudget) -> BeamformingSolution:
    """Optimal beamformer for ``budget`` (identical or per-antenna limits).

    Antennas with zero gain are left out of the computation and get zero
    amplitude, so ``P*`` and ``k`` refer to the non-zero antennas only.
    """
    order, g, p = _sorted_problem(h, budget)
    if g.size == 0:
        return _zero_solution(h, budget)
    k = _active_count(g, p, budget.total)
    # within rounding of P_T = sum P_i, keep |u| = 1 by using sum P_i itself
    p_star = float(np.sum(p)) if k == g.size else min(budget.total, float(np.sum(p)))
    return _assemble(h, budget, order, g, p, k, p_star)


def beamformer_for_k(h: ChannelVector, budget: PowerBudget, k: int) -> BeamformingSolution:
    """Closed-form beamformer with the active count forced to ``k``.

    Only the optimal ``k`` yields an optimal (or even feasible) result; other
    values are used as negative controls for the KKT certificate. Raises
    ``ValueError`` when the construction is undefined for ``k``.
    """
    order, g, p = _sorted_problem(h, budget)
    if not 0 <= k <= g.size:
        raise ValueError(f"k={k} outside 0..{g.size}")
    p_star = min(budget.total, float(np.sum(p)))
    if k < g.size and p_star - float(np.sum(p[:k])) <= 0:
        raise ValueError(f"no power left for inactive antennas at k={k}")
    return _assemble(h, budget, order, g, p, k, p_star)


def solve_uniform(h: ChannelVector, total_power: float, per_antenna: float) -> BeamformingSolution:
    """Optimal beamformer when every antenna has the same limit ``P``."""
    return solve(h, PowerBudget(total_power, float(per_antenna)))


def solve_heterogeneous(h: ChannelVector, total_power: float, limits) -> BeamformingSolution:
    """Optimal beamformer with individual per-antenna limits ``P_i``."""
    if np.ndim(limits) == 0 or len(limits) != h.m:
        raise ValueError(f"need {h.m} per-antenna limits, got {limits!r}")
    return solve(h, PowerBudget(total_power, list(limits)))


def is_mrt_optimal(h: ChannelVector, total_power: float, per_antenna) -> bool:
    """True iff no per-antenna limit is active, i.e. plain MRT is optimal.

    Tests ``|h_1|^2 P_T <= P_1 |h|_2^2`` for the antenna with the largest
    ``|h_i|/sqrt(P_i)``.
    """
    budget = PowerBudget(total_power, per_antenna)
    _, g, p = _sorted_problem(h, budget)
    if g.size == 0:
        return True
    return _holds(g[0] ** 2 * budget.total, p[0] * float(np.sum(g**2)))


def is_egt_optimal(total_power: float, per_antenna, m: int) -> bool:
    """True iff every per-antenna limit is active; does not depend on the channel."""
    budget = PowerBudget(total_power, per_antenna)
    return _holds(float(np.sum(budget.limits(m))), budget.total)


@dataclass(frozen=True)
class CapacityApprox:
    approx_nats: float
    upper_bound_nats: float
    exact: bool


def capacity_approx(h: ChannelVector, total_power: float, per_antenna) -> CapacityApprox:
    """``min(C_MRT, C_EGT)``, an upper bound on the joint capacity and a close approximation.

    ``exact`` flags the cases where the bound is attained: MRT optimal, EGT
    optimal, or all non-zero ``|h_i|/sqrt(P_i)`` equal (equal gains when the
    limits are identical).
    """
    c_mrt = capacity_mrt(h, total_power)
    c_egt = capacity_egt(h, per_antenna)
    bound = min(c_mrt, c_egt)
    limits = PowerBudget(total_power, per_antenna).limits(h.m)
    key = (h.magnitudes / np.sqrt(limits))[h.nonzero]
    equal = key.size > 0 and key.max() - key.min() <= REL_TOL * key.max()
    exact = (is_mrt_optimal(h, total_power, per_antenna)
             or is_egt_optimal(total_power, per_antenna, h.m)
             or bool(equal))
    return CapacityApprox(approx_nats=bound, upper_bound_nats=bound, exact=exact)


def solution_or_none(h: ChannelVector, budget: PowerBudget, k: int) -> Optional[BeamformingSolution]:
    """``beamformer_for_k`` returning None where the construction is undefined."""
    try:
        return beamformer_for_k(h, budget, k)
    except ValueError:
        return None
