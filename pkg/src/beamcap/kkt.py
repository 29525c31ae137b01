"""KKT certificate for a candidate MISO beamformer.

Given ``R = P* u u^H`` the multipliers are rebuilt from the candidate alone:
``lambda`` for the total-power constraint, ``lambda_i`` for the per-antenna
constraints and the PSD multiplier ``M = -h h^H + lambda I + diag(lambda_i)``
(stationarity holds by construction). The certificate then checks
complementary slackness, primal feasibility and dual feasibility. Failures
are reported through residuals, never raised.

The check runs on the non-zero-gain antennas; zero-gain antennas carry no
power and are irrelevant to the optimum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ChannelVector, PowerBudget
from .miso import BeamformingSolution

TOL = 1e-9
RANK_TOL = 1e-8

BRANCH_TP = "tp"   # total power active, lambda = a / c2
BRANCH_PA = "pa"   # all per-antenna limits active, lambda = 0


@dataclass(frozen=True)
class KktCertificate:
    """Reconstructed multipliers and named residuals.

    Every residual is normalized so that ``pass_`` holds iff each one is at
    most its tolerance in ``tolerances``.
    """

    lam: float
    lam_i: np.ndarray
    M: np.ndarray
    a_scalar: float
    branch: str
    residuals: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    rank: int = 0

    @property
    def passed(self) -> bool:
        return all(self.residuals[name] <= self.tolerances[name] for name in self.residuals)

    @property
    def failures(self) -> list:
        return [n for n in self.residuals if self.residuals[n] > self.tolerances[n]]

    def to_json(self) -> dict:
        return {
            "pass": self.passed,
            "branch": self.branch,
            "lambda": self.lam,
            "lambda_i": [float(x) for x in self.lam_i],
            "a": self.a_scalar,
            "rank_M": self.rank,
            "residuals": {k: float(v) for k, v in self.residuals.items()},
            "failures": self.failures,
        }


def _reduced(h: ChannelVector, solution: BeamformingSolution, budget: PowerBudget):
    idx = np.flatnonzero(h.nonzero)
    limits = budget.limits(h.m)
    return (h.gains[idx], np.asarray(solution.u)[idx], limits[idx],
            np.asarray(solution.active)[idx])


def reconstruct_multipliers(h: ChannelVector, solution: BeamformingSolution,
                            budget: PowerBudget, branch: str | None = None) -> KktCertificate:
    """Rebuild ``(lambda, lambda_i, M)`` from a candidate and evaluate the residuals.

    ``branch`` defaults to the one implied by the candidate: total power
    active (``lambda = a/c2``) when some per-antenna limit is slack, otherwise
    ``lambda = 0``. With ``branch="tp"`` and every limit active, ``lambda`` is
    the largest value keeping all ``lambda_i`` non-negative.
    """
    hr, ur, pr, active = _reduced(h, solution, budget)
    m = hr.size
    mags = np.abs(hr)
    amps = np.abs(ur)
    a = float(abs(np.vdot(hr, ur)))
    if branch is None:
        branch = BRANCH_TP if not active.all() else BRANCH_PA

    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(amps > 0, a * mags / amps, np.inf)
    if branch == BRANCH_PA:
        lam = 0.0
    elif (~active).any():
        lam = a / solution.c2 if solution.c2 > 0 else np.inf
    else:
        lam = float(np.min(ratio))
    lam_i = np.where(active, ratio - lam, 0.0)

    M = -np.outer(hr, hr.conj()) + lam * np.eye(m) + np.diag(lam_i)
    return _evaluate(hr, ur, pr, solution.p_star, budget.total, lam, lam_i, M, a, branch)


def _evaluate(hr, ur, pr, p_star, total, lam, lam_i, M, a, branch) -> KktCertificate:
    m = hr.size
    h2 = float(np.sum(np.abs(hr) ** 2))
    finite = np.isfinite(lam) and np.all(np.isfinite(lam_i))
    r_diag = p_star * np.abs(ur) ** 2
    tr_r = float(np.sum(r_diag))
    res = {}
    if not finite:
        # a zero amplitude on an active antenna or c2 = 0: no valid multipliers
        inf = float("inf")
        res = dict.fromkeys(["stationarity", "slack_tp", "slack_pa", "slack_rm",
                             "primal", "dual_psd", "dual_multipliers", "rank"], inf)
        return KktCertificate(lam=float(lam), lam_i=lam_i, M=M, a_scalar=a, branch=branch,
                              residuals=res, tolerances=_tolerances(), rank=-1)

    stationarity = -np.outer(hr, hr.conj()) + lam * np.eye(m) + np.diag(lam_i) - M
    res["stationarity"] = float(np.linalg.norm(stationarity)) / max(1.0, h2)
    res["slack_tp"] = abs(lam * (tr_r - total)) / max(1.0, lam * total)
    res["slack_pa"] = float(np.max(np.abs(lam_i * (r_diag - pr)) / np.maximum(1.0, lam_i * pr)))
    res["slack_rm"] = float(np.linalg.norm(M @ ur)) / h2
    res["primal"] = max(0.0, tr_r / total - 1.0, float(np.max(r_diag / pr - 1.0)))

    eig = np.linalg.eigvalsh(M)
    scale = max(float(np.max(np.abs(eig))), h2)
    res["dual_psd"] = max(0.0, -float(eig[0])) / scale
    res["dual_multipliers"] = max(0.0, -lam, -float(np.min(lam_i))) / max(1.0, h2)

    top = float(np.max(eig))
    rank = int(np.sum(eig > RANK_TOL * top)) if top > 0 else 0
    res["rank"] = float(abs(rank - (m - 1))) if m >= 2 else 0.0
    return KktCertificate(lam=float(lam), lam_i=lam_i, M=M, a_scalar=a, branch=branch,
                          residuals=res, tolerances=_tolerances(), rank=rank)


def _tolerances() -> dict:
    tol = dict.fromkeys(["stationarity", "slack_tp", "slack_pa", "slack_rm",
                         "primal", "dual_psd", "dual_multipliers"], TOL)
    tol["rank"] = 0.0
    return tol


def certify(h: ChannelVector, solution: BeamformingSolution, budget: PowerBudget,
            certificate: KktCertificate | None = None) -> KktCertificate:
    """Certify a candidate, trying the alternate multiplier branch on failure.

    At ``P_T = sum P_i`` both ``lambda = 0`` and ``lambda > 0`` can be
    consistent, so either branch is accepted. Returns the first passing
    certificate, or the one for the candidate's own branch if none pass.
    """
    if not solution.u_defined or not h.nonzero.any():
        m = h.m
        return KktCertificate(lam=0.0, lam_i=np.zeros(m), M=np.zeros((m, m)), a_scalar=0.0,
                              branch="degenerate", residuals={}, tolerances={})
    first = certificate or reconstruct_multipliers(h, solution, budget)
    if first.passed:
        return first
    other = BRANCH_PA if first.branch == BRANCH_TP else BRANCH_TP
    second = reconstruct_multipliers(h, solution, budget, branch=other)
    return second if second.passed else first


def perturb_amplitude(solution: BeamformingSolution, index: int, factor: float = 1.05):
    """Copy of ``solution`` with one amplitude scaled by ``factor`` and ``u`` renormalized."""
    from dataclasses import replace

    u = np.array(solution.u)
    u[index] *= factor
    u /= np.linalg.norm(u)
    u.setflags(write=False)
    amps = np.abs(u)
    amps.setflags(write=False)
    return replace(solution, u=u, amplitudes=amps)
