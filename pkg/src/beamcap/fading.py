"""Monte Carlo ergodic capacity of fading MIMO channels under joint power constraints.

For right unitary-invariant fading (i.i.d. Rayleigh, or receive-only
correlation ``H = R_r^{1/2} H_0``) isotropic signaling ``P* I`` with
``P* = min(P, P_T/m)`` is optimal. Transmit-side correlation breaks that
invariance and serves as the control case.

Random draws come in fixed-size blocks; block ``b`` of stream ``s`` uses a
Philox generator keyed by ``(seed, s, b)``, so sample ``i`` depends only on
``(seed, s, i)`` and results do not depend on the number of workers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .parallel import map_ordered

BLOCK = 4096
PSD_TOL = 1e-10


class CorrelationError(ValueError):
    """Correlation or covariance matrix is not Hermitian PSD (or violates the budget)."""


def check_hermitian_psd(R, name="matrix") -> np.ndarray:
    R = np.array(R, dtype=complex)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise CorrelationError(f"{name} must be square, got shape {R.shape}")
    scale = max(1.0, float(np.max(np.abs(R))) if R.size else 1.0)
    if np.max(np.abs(R - R.conj().T)) > PSD_TOL * scale:
        raise CorrelationError(f"{name} is not Hermitian")
    R = 0.5 * (R + R.conj().T)
    if np.linalg.eigvalsh(R)[0] < -PSD_TOL * scale:
        raise CorrelationError(f"{name} is not positive semi-definite")
    return R


def hermitian_sqrt(R) -> np.ndarray:
    """PSD square root via eigendecomposition (works for singular ``R``)."""
    w, V = np.linalg.eigh(R)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T


class FadingKind(enum.Enum):
    IID_RAYLEIGH = "iid"
    SEMI_CORRELATED = "semi"
    TX_CORRELATED = "tx"


@dataclass(frozen=True)
class FadingModel:
    """Kronecker-type fading model with correlation on one side at most.

    Build instances with :meth:`iid`, :meth:`semi_correlated` or
    :meth:`tx_correlated`.
    """

    kind: FadingKind
    n: int
    m: int
    correlation: Optional[np.ndarray] = None
    root: Optional[np.ndarray] = None

    @classmethod
    def iid(cls, n: int, m: int) -> "FadingModel":
        if n < 1 or m < 1:
            raise ValueError("antenna counts must be positive")
        return cls(FadingKind.IID_RAYLEIGH, n, m)

    @classmethod
    def semi_correlated(cls, r_rx, m: int) -> "FadingModel":
        R = check_hermitian_psd(r_rx, "receive correlation")
        return cls(FadingKind.SEMI_CORRELATED, R.shape[0], m, R, _root(R))

    @classmethod
    def tx_correlated(cls, r_tx, n: int) -> "FadingModel":
        R = check_hermitian_psd(r_tx, "transmit correlation")
        return cls(FadingKind.TX_CORRELATED, n, R.shape[0], R, _root(R))

    @property
    def right_unitary_invariant(self) -> bool:
        return self.kind is not FadingKind.TX_CORRELATED

    def apply(self, H0: np.ndarray) -> np.ndarray:
        """Map i.i.d. draws ``(..., n, m)`` to this model's channel."""
        if self.root is None:
            return H0
        if self.kind is FadingKind.SEMI_CORRELATED:
            return self.root @ H0
        return H0 @ self.root


def _root(R):
    # identity correlation must reproduce i.i.d. draws bit for bit
    if np.array_equal(R, np.eye(R.shape[0])):
        return None
    return hermitian_sqrt(R)


def block_rng(seed: int, stream: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream, block])))


def sample_channel(model: FadingModel, rng: np.random.Generator) -> np.ndarray:
    """One ``n x m`` channel matrix drawn from ``model``."""
    return model.apply(_cn(rng, (model.n, model.m)))


def _cn(rng, shape):
    """CN(0, 1) entries: real and imaginary parts each with variance 1/2.

    Real and imaginary parts are drawn interleaved, so a batch of ``k``
    matrices is a prefix of a batch of ``k' > k`` from the same generator.
    """
    z = rng.standard_normal(tuple(shape) + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / math.sqrt(2.0)


def sample_block(model: FadingModel, seed: int, block: int, count: int, stream: int = 0):
    """Channels for samples ``block*BLOCK .. block*BLOCK + count - 1``."""
    return model.apply(_cn(block_rng(seed, stream, block), (count, model.n, model.m)))


def _blocks(samples: int):
    return [(b, min(BLOCK, samples - b * BLOCK)) for b in range(-(-samples // BLOCK))]


def log_det_terms(H: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Per-sample ``ln det(I + H R H^H)`` for a batch ``H`` of shape ``(N, n, m)``."""
    n = H.shape[-2]
    A = np.eye(n) + H @ R @ np.conj(np.swapaxes(H, -1, -2))
    L = np.linalg.cholesky(A)
    vals = 2.0 * np.sum(np.log(np.real(np.diagonal(L, axis1=-2, axis2=-1))), axis=-1)
    # the determinant is >= 1; only rounding can push the log below zero
    return np.maximum(vals, 0.0)


@dataclass(frozen=True)
class CovariancePolicy:
    """Transmit covariance used for every fading state."""

    R: np.ndarray
    label: str
    p_star: Optional[float] = None

    @classmethod
    def isotropic(cls, m: int, total: float, per_antenna: Optional[float] = None) -> "CovariancePolicy":
        """``P* I`` with ``P* = min(P, P_T/m)`` (or ``P_T/m`` without a per-antenna limit)."""
        if total < 0 or (per_antenna is not None and per_antenna < 0):
            raise ValueError("powers must be non-negative")
        p = total / m if per_antenna is None else min(per_antenna, total / m)
        return cls(p * np.eye(m, dtype=complex), "isotropic", p)

    @classmethod
    def explicit(cls, R, total: Optional[float] = None, per_antenna: Optional[float] = None,
                 label: str = "explicit") -> "CovariancePolicy":
        R = check_hermitian_psd(R, "covariance")
        tr = float(np.real(np.trace(R)))
        if total is not None and tr > total * (1 + PSD_TOL) + PSD_TOL:
            raise CorrelationError(f"trace {tr} exceeds total power {total}")
        diag = np.real(np.diag(R))
        if per_antenna is not None and np.any(diag > per_antenna * (1 + PSD_TOL) + PSD_TOL):
            raise CorrelationError(f"diagonal exceeds per-antenna power {per_antenna}")
        return cls(R, label)


@dataclass(frozen=True)
class ErgodicEstimate:
    capacity_nats: float
    std_error: float
    samples: int
    seed: int
    p_star: Optional[float] = None

    def to_json(self) -> dict:
        return {"capacity_nats": self.capacity_nats, "std_error": self.std_error,
                "samples": self.samples, "seed": self.seed, "p_star": self.p_star}


def _mean_se(values: np.ndarray):
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(values.size))
    return mean, se


def per_sample_capacity(model: FadingModel, policies, samples: int, seed: int,
                        workers=None, stream: int = 0) -> list:
    """``ln det`` values for each policy on common channel draws.

    Returns one array of length ``samples`` per policy, in sample order.
    """
    Rs = [np.asarray(p.R if isinstance(p, CovariancePolicy) else p, dtype=complex)
          for p in policies]
    for R in Rs:
        if R.shape != (model.m, model.m):
            raise ValueError(f"covariance shape {R.shape} does not match m={model.m}")

    def run(item):
        b, count = item
        H = sample_block(model, seed, b, count, stream)
        return [log_det_terms(H, R) for R in Rs]

    parts = map_ordered(run, _blocks(samples), workers)
    return [np.concatenate([part[j] for part in parts]) for j in range(len(Rs))]


def ergodic_capacity(model: FadingModel, policy: CovariancePolicy, samples: int,
                     seed: int = 0, workers=None) -> ErgodicEstimate:
    """Sample mean of ``ln det(I + H R H^H)`` over ``samples`` seeded draws."""
    if samples < 2:
        raise ValueError("need at least 2 samples")
    (vals,) = per_sample_capacity(model, [policy], samples, seed, workers)
    mean, se = _mean_se(vals)
    return ErgodicEstimate(mean, se, samples, seed, policy.p_star)


@dataclass(frozen=True)
class PairedComparison:
    """Two policies evaluated on common random numbers; ``diff = first - second``."""

    first: str
    second: str
    first_est: ErgodicEstimate
    second_est: ErgodicEstimate
    diff_mean: float
    diff_se: float
    passed: bool
    criterion: str

    @property
    def z_score(self) -> float:
        if self.diff_se == 0:
            return 0.0 if self.diff_mean == 0 else math.copysign(math.inf, self.diff_mean)
        return self.diff_mean / self.diff_se

    def to_json(self) -> dict:
        return {"first": self.first, "second": self.second,
                "first_estimate": self.first_est.to_json(),
                "second_estimate": self.second_est.to_json(),
                "diff_mean": self.diff_mean, "diff_std_error": self.diff_se,
                "z": self.z_score if math.isfinite(self.z_score) else str(self.z_score),
                "criterion": self.criterion, "pass": self.passed}


def compare_policies(model, first: CovariancePolicy, second: CovariancePolicy,
                     samples: int, seed: int, workers=None):
    a, b = per_sample_capacity(model, [first, second], samples, seed, workers)
    ma, sa = _mean_se(a)
    mb, sb = _mean_se(b)
    dm, ds = _mean_se(a - b)
    return (ErgodicEstimate(ma, sa, samples, seed, first.p_star),
            ErgodicEstimate(mb, sb, samples, seed, second.p_star), dm, ds)


def isotropic_dominance_test(model: FadingModel, power_profile, samples: int,
                             seed: int = 0, workers=None) -> PairedComparison:
    """Compare ``C(P* I)`` with ``C(diag(power_profile))`` on identical draws.

    ``P* = trace / m``. Passes when the paired difference
    ``C(P* I) - C(diag)`` is at least ``-3`` paired standard errors.
    """
    lam = np.asarray(power_profile, dtype=float)
    if lam.shape != (model.m,) or np.any(lam < 0):
        raise ValueError("power profile must be m non-negative values")
    total = float(np.sum(lam))
    iso = CovariancePolicy.isotropic(model.m, total)
    diag = CovariancePolicy.explicit(np.diag(lam).astype(complex), total=total, label="diagonal")
    ei, ed, dm, ds = compare_policies(model, iso, diag, samples, seed, workers)
    return PairedComparison("isotropic", "diagonal", ei, ed, dm, ds,
                            passed=dm >= -3.0 * ds, criterion="diff >= -3*se")


def tx_correlated_counterexample(total: float, per_antenna: float, m: int, n: int = 2,
                                 samples: int = 10_000, seed: int = 0,
                                 workers=None) -> PairedComparison:
    """Transmit correlation ``diag(1, 0, ..., 0)``: concentrated vs isotropic power.

    The concentrated policy puts ``min(P_T, P)`` on the first antenna. Passes
    when it beats ``P* I`` by more than 3 paired standard errors; when
    ``P <= P_T/m`` the two policies feed the same power to the only live
    antenna and tie exactly.
    """
    r_tx = np.zeros((m, m), dtype=complex)
    r_tx[0, 0] = 1.0
    model = FadingModel.tx_correlated(r_tx, n)
    conc = np.zeros((m, m), dtype=complex)
    conc[0, 0] = min(total, per_antenna)
    first = CovariancePolicy.explicit(conc, total, per_antenna, label="concentrated")
    iso = CovariancePolicy.isotropic(m, total, per_antenna)
    ec, ei, dm, ds = compare_policies(model, first, iso, samples, seed, workers)
    return PairedComparison("concentrated", "isotropic", ec, ei, dm, ds,
                            passed=dm > 3.0 * ds, criterion="diff > 3*se")


def haar_unitary(k: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed ``k x k`` unitary (QR of a complex Gaussian, phases fixed)."""
    Z = _cn(rng, (k, k))
    Q, Rq = np.linalg.qr(Z)
    d = np.diag(Rq)
    return Q * (d / np.abs(d))


def right_invariance_gap(model: FadingModel, U: np.ndarray, p_star: float,
                         samples: int, seed: int = 0) -> float:
    """Largest per-sample ``|ln det(I + P* HU (HU)^H) - ln det(I + P* H H^H)|``."""
    R = p_star * np.eye(model.m, dtype=complex)
    worst = 0.0
    for b, count in _blocks(samples):
        H = sample_block(model, seed, b, count)
        worst = max(worst, float(np.max(np.abs(log_det_terms(H @ U, R) - log_det_terms(H, R)))))
    return worst


def siso_rayleigh_capacity(p_star: float) -> float:
    """Closed form ``e^{1/P} E_1(1/P)`` for a single-antenna Rayleigh channel."""
    from scipy.special import exp1

    if p_star == 0:
        return 0.0
    x = 1.0 / p_star
    return float(math.exp(x) * exp1(x))
