"""Brute-force reference for the joint-constraint MISO problem.

With phases aligned to the channel, the SNR is ``P* (sum_i a_i |h_i|)^2``
and the problem is a search over amplitudes ``a`` in the intersection of
the unit ball and the box ``0 <= a_i <= sqrt(P_i / P*)``. This module solves
it numerically by projected gradient ascent with Dykstra projections and
multi-start, without using any of the closed-form machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .core import ChannelVector, PowerBudget

DEFAULT_SEED = 0


@dataclass(frozen=True)
class OracleResult:
    amplitudes: np.ndarray
    snr: float
    iterations: int
    converged: bool
    restarts_used: int


def project_box(x, upper):
    return np.minimum(np.maximum(x, 0.0), upper)


def project_ball(x):
    n = math.sqrt(x @ x)
    return x / n if n > 1.0 else x


@numba.njit(cache=True)
def _dykstra_kernel(y, upper, max_iter, tol):
    m = y.size
    x = y.copy()
    p = np.zeros(m)
    q = np.zeros(m)
    b = np.empty(m)
    for _ in range(max_iter):
        for i in range(m):
            v = x[i] + p[i]
            b[i] = min(max(v, 0.0), upper[i])
            p[i] = v - b[i]
        nrm = 0.0
        for i in range(m):
            nrm += (b[i] + q[i]) ** 2
        nrm = math.sqrt(nrm)
        scale = nrm if nrm > 1.0 else 1.0
        dx2 = 0.0
        gap2 = 0.0
        xx = 0.0
        for i in range(m):
            v = b[i] + q[i]
            xn = v / scale
            q[i] = v - xn
            dx2 += (xn - x[i]) ** 2
            gap2 += (xn - b[i]) ** 2
            xx += xn * xn
            x[i] = xn
        # iterates can stall for a cycle while the corrections still move, so
        # also require the two projections to agree
        lim = tol * tol * max(1.0, xx)
        if dx2 <= lim and gap2 <= lim:
            return x, True
    return x, False


@numba.njit(cache=True)
def _multiplier_projection(y, upper):
    # x = clip(y / (1 + mu), 0, upper), smallest mu >= 0 with |x| <= 1
    m = y.size
    x = np.empty(m)

    def sq(mu):
        s = 0.0
        for i in range(m):
            v = min(max(y[i] / (1.0 + mu), 0.0), upper[i])
            s += v * v
        return s

    if sq(0.0) <= 1.0:
        lo = hi = 0.0
    else:
        lo, hi = 0.0, 1.0
        while sq(hi) > 1.0:
            lo, hi = hi, 2.0 * hi
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if sq(mid) > 1.0:
                lo = mid
            else:
                hi = mid
    for i in range(m):
        x[i] = min(max(y[i] / (1.0 + hi), 0.0), upper[i])
    return x


def dykstra_projection(y, upper, max_iter: int = 500, tol: float = 1e-14):
    """Euclidean projection of ``y`` onto ``{0 <= x <= upper} ∩ {|x|_2 <= 1}``.

    Dykstra's alternating projections with correction terms. For points far
    outside the set the iterate can sit still for more than ``max_iter``
    cycles while the corrections drain; if the run ends unconverged, the
    projection is finished by bisection on the ball multiplier of the
    optimality condition ``x = clip(y / (1 + mu), 0, upper)``. The result is
    pushed through box then ball once more, a no-op up to rounding that
    guarantees both constraint sets hold.
    """
    y = np.asarray(y, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x, ok = _dykstra_kernel(y, upper, max_iter, tol)
    if not ok:
        x = _multiplier_projection(y, upper)
    return project_ball(project_box(x, upper))


def _objective(a, g):
    return float(np.dot(a, g)) ** 2


def _ascend(a0, g, upper, tol, max_iter):
    """Projected gradient ascent on ``(g . a)^2`` with BB steps and backtracking."""
    a = dykstra_projection(a0, upper)
    f = _objective(a, g)
    step = 1.0 / float(np.dot(g, g))
    calm = 0
    grad = 2.0 * np.dot(a, g) * g
    for it in range(1, max_iter + 1):
        if not np.any(grad):
            # a = 0 start: move along g
            grad = g.copy()
        while True:
            cand = dykstra_projection(a + step * grad, upper)
            f_new = _objective(cand, g)
            if f_new >= f or step < 1e-30:
                break
            step *= 0.5
        grad_new = 2.0 * np.dot(cand, g) * g
        da, dg = cand - a, grad_new - grad
        change = f_new - f
        a, f, grad = cand, f_new, grad_new
        calm = calm + 1 if abs(change) < tol * max(1.0, f) else 0
        if calm >= 2:
            return a, f, it, True
        curv = abs(float(np.dot(da, dg)))
        if curv > 0:
            step = min(float(np.dot(da, da)) / curv, 1e6 / float(np.dot(g, g)))
        else:
            step *= 2.0
    return a, f, max_iter, False


def _start(i, g, upper, seed):
    m = g.size
    if i == 0:
        return np.full(m, 1.0 / math.sqrt(m))    # uniform
    if i == 1:
        return g / np.linalg.norm(g)             # MRT-shaped
    if i == 2:
        return upper.copy()                      # box corner
    return np.random.default_rng([seed, i]).random(m)


def maximize_snr(h: ChannelVector, budget: PowerBudget, tol: float = 1e-12,
                 max_restarts: int = 8, max_iter: int = 20000,
                 seed: int = DEFAULT_SEED) -> OracleResult:
    """Maximize ``P* (sum a_i |h_i|)^2`` over the amplitude feasible set.

    Returns the best of ``max_restarts`` runs. Random starts use a generator
    seeded by ``(seed, restart index)``, so the result depends only on the
    inputs and ``seed``.
    """
    limits = budget.limits(h.m)
    p_star = budget.effective_total(h.m)
    g = h.magnitudes
    if not np.any(g):
        return OracleResult(np.zeros(h.m), 0.0, 0, True, 0)
    upper = np.sqrt(limits / p_star)
    best = None
    total_iter = 0
    any_converged = False
    for i in range(max_restarts):
        a, f, it, ok = _ascend(_start(i, g, upper, seed), g, upper, tol, max_iter)
        if best is None or f > best[1]:
            best = (a, f)
        total_iter += it
        any_converged = any_converged or ok
    a, f = best[0], best[1]
    return OracleResult(amplitudes=a, snr=p_star * f, iterations=total_iter,
                        converged=any_converged, restarts_used=max_restarts)


@dataclass
class KSearchReport:
    """Exhaustive check of the active-count threshold rule for one magnitude vector."""

    m_star: float
    weak_set: list = field(default_factory=list)      # k satisfying the "<=" rule
    strict_set: list = field(default_factory=list)    # k satisfying the strict ">" rule
    both_set: list = field(default_factory=list)
    up_closed: bool = False
    unique: bool = False
    k_search: int = -1
    matches: bool = False

    @property
    def ok(self) -> bool:
        return self.up_closed and self.unique and self.matches

    def to_json(self) -> dict:
        return {"m_star": self.m_star, "weak_set": self.weak_set,
                "strict_set": self.strict_set, "both_set": self.both_set,
                "up_closed": self.up_closed, "unique": self.unique,
                "k_search": self.k_search, "matches": self.matches, "ok": self.ok}


def validate_k_search(sorted_mags, m_star: float) -> KSearchReport:
    """Enumerate every ``k`` in ``0..floor(m*)`` and test both threshold inequalities.

    ``weak``: ``|h_{k+1}|^2 (m* - k) <= sum_{i>k} |h_i|^2`` (with ``h_{m+1} = 0``).
    ``strict``: ``|h_k|^2 (m* - k) > sum_{i>k} |h_i|^2`` (vacuous at ``k = 0``).
    Reports whether the weak set is an up-closed interval ending at
    ``floor(m*)``, whether exactly one ``k`` satisfies both, and whether that
    ``k`` equals ``find_active_count``. Requires ``m* < m`` (outside the
    tie slack).
    """
    from .core import REL_TOL
    from .miso import ActiveCountError, find_active_count

    g = np.asarray(sorted_mags, dtype=float)
    m = g.size
    if m_star >= m * (1 - REL_TOL):
        raise ValueError("validation covers m* < m; at m* >= m every limit is active")
    top = min(m, int(math.floor(m_star)))
    padded = np.append(g, 0.0)
    rep = KSearchReport(m_star=float(m_star))
    for k in range(top + 1):
        tail = float(np.sum(g[k:] ** 2))
        lhs_weak = padded[k] ** 2 * (m_star - k)
        if lhs_weak <= tail + REL_TOL * tail:
            rep.weak_set.append(k)
        if k == 0 or g[k - 1] ** 2 * (m_star - k) > tail + REL_TOL * tail:
            rep.strict_set.append(k)
    rep.both_set = sorted(set(rep.weak_set) & set(rep.strict_set))
    rep.up_closed = bool(rep.weak_set) and rep.weak_set == list(range(rep.weak_set[0], top + 1))
    rep.unique = len(rep.both_set) == 1
    try:
        rep.k_search = find_active_count(g, m_star)
    except ActiveCountError:
        rep.k_search = -1
    rep.matches = rep.unique and rep.both_set[0] == rep.k_search
    return rep


def grid_search_m2(h: ChannelVector, budget: PowerBudget, phase_points: int = 720,
                   amplitude_points: int = 500) -> float:
    """Best SNR for ``m = 2`` over a grid of complex beamformers.

    The common phase is irrelevant, so antenna 1 keeps phase 0 and antenna 2
    scans ``phase_points`` phases. ``a_1`` scans ``amplitude_points`` values
    in ``[0, sqrt(P_1/P*)]``; ``|h^H u|`` is convex in ``a_2``, so only its
    endpoints ``0`` and ``min(sqrt(P_2/P*), sqrt(1 - a_1^2))`` are needed.
    """
    if h.m != 2:
        raise ValueError("grid search is defined for two antennas only")
    limits = budget.limits(2)
    p_star = budget.effective_total(2)
    up = np.sqrt(limits / p_star)
    a1 = np.linspace(0.0, min(1.0, up[0]), amplitude_points)
    a2_max = np.minimum(up[1], np.sqrt(np.clip(1.0 - a1**2, 0.0, None)))
    theta = np.linspace(-math.pi, math.pi, phase_points, endpoint=False)
    h1, h2 = h.gains
    best = 0.0
    for a2 in (np.zeros_like(a1), a2_max):
        z = np.conj(h1) * a1[:, None] + np.conj(h2) * a2[:, None] * np.exp(1j * theta)[None, :]
        best = max(best, float(np.max(np.abs(z) ** 2)))
    return p_star * best
