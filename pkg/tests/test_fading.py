import math

import numpy as np
import pytest
from scipy import integrate

from beamcap import CovariancePolicy, FadingModel, ergodic_capacity, isotropic_dominance_test
from beamcap import tx_correlated_counterexample
from beamcap.fading import (BLOCK, CorrelationError, block_rng, haar_unitary, hermitian_sqrt,
                            log_det_terms, per_sample_capacity, right_invariance_gap,
                            sample_block, sample_channel, siso_rayleigh_capacity)

# seed 0, stream 0, block 0; stored as hex floats so the comparison is bitwise
_GOLDEN_HEX = [
    [("-0x1.2a4841df6ea94p-3", "-0x1.752cc24686917p-4"), ("-0x1.a3a91ae607fc0p-3", "-0x1.cc7e1ece625aap-1")],
    [("-0x1.fd2f0f11ffdb5p-1", "0x1.f6e3665910b4cp-6"), ("-0x1.8da40905e1bdap-2", "0x1.bb244405b97edp-2")],
]
GOLDEN_IID_2x2 = np.array([[complex(float.fromhex(re), float.fromhex(im)) for re, im in row]
                           for row in _GOLDEN_HEX])


def siso_by_quadrature(p):
    val, _ = integrate.quad(lambda x: math.log1p(p * x) * math.exp(-x), 0, math.inf)
    return val


def test_golden_fixture():
    H = sample_channel(FadingModel.iid(2, 2), block_rng(0, 0, 0))
    assert np.array_equal(H, GOLDEN_IID_2x2)


def test_block_matches_single_draw():
    H = sample_block(FadingModel.iid(2, 2), seed=0, block=0, count=3)
    assert H.shape == (3, 2, 2)
    assert np.array_equal(H[0], GOLDEN_IID_2x2)


def test_identity_correlation_is_bitwise_iid():
    iid = FadingModel.iid(3, 2)
    semi = FadingModel.semi_correlated(np.eye(3), 2)
    assert np.array_equal(sample_block(iid, 4, 1, 50), sample_block(semi, 4, 1, 50))


def test_second_moment():
    H = sample_block(FadingModel.iid(3, 4), seed=1, block=0, count=BLOCK)
    mean_energy = np.mean(np.sum(np.abs(H) ** 2, axis=(1, 2)))
    assert mean_energy == pytest.approx(12.0, rel=0.02)


def test_semi_correlated_covariance():
    R = np.array([[1.0, 0.6j], [-0.6j, 1.0]])
    model = FadingModel.semi_correlated(R, 1)
    H = np.concatenate([sample_block(model, 2, b, BLOCK)[:, :, 0] for b in range(8)])
    emp = H.T @ H.conj() / H.shape[0]
    assert emp == pytest.approx(R, abs=0.03)


@pytest.mark.parametrize("bad", [np.array([[1.0, 2.0], [2.0, 1.0]]),
                                 np.array([[1.0, 1j], [1j, 1.0]]),
                                 np.ones((2, 3))])
def test_bad_correlation(bad):
    with pytest.raises(CorrelationError):
        FadingModel.semi_correlated(bad, 2)


def test_hermitian_sqrt():
    R = np.array([[2.0, 0.5 - 0.5j], [0.5 + 0.5j, 1.0]])
    S = hermitian_sqrt(R)
    assert S @ S == pytest.approx(R, abs=1e-12)
    assert S == pytest.approx(S.conj().T, abs=1e-14)


def test_log_det_terms():
    H = np.array([[[1.0, 1j]]])
    R = np.diag([2.0, 3.0]).astype(complex)
    assert log_det_terms(H, R)[0] == pytest.approx(math.log(6.0))
    assert log_det_terms(H, np.zeros((2, 2)))[0] == 0.0


@pytest.mark.parametrize("p", [0.1, 1.0, 10.0])
def test_siso_closed_form_matches_quadrature(p):
    assert siso_rayleigh_capacity(p) == pytest.approx(siso_by_quadrature(p), rel=1e-10)


def test_siso_reference_value():
    assert siso_rayleigh_capacity(1.0) == pytest.approx(0.5963, abs=1e-4)
    assert siso_rayleigh_capacity(0.0) == 0.0


def test_siso_monte_carlo():
    est = ergodic_capacity(FadingModel.iid(1, 1), CovariancePolicy.isotropic(1, 1.0), 20_000, seed=3)
    assert abs(est.capacity_nats - siso_by_quadrature(1.0)) <= 3 * est.std_error


def test_zero_power():
    est = ergodic_capacity(FadingModel.iid(2, 3), CovariancePolicy.isotropic(3, 0.0), 1000)
    assert est.capacity_nats == 0.0
    assert est.std_error == 0.0


def test_std_error_scaling():
    model, pol = FadingModel.iid(2, 2), CovariancePolicy.isotropic(2, 2.0)
    ses = [ergodic_capacity(model, pol, n, seed=9).std_error for n in (1000, 4000, 16000)]
    assert ses[0] / ses[1] == pytest.approx(2.0, rel=0.15)
    assert ses[1] / ses[2] == pytest.approx(2.0, rel=0.15)


def test_isotropic_power_selection():
    assert CovariancePolicy.isotropic(4, 8.0, 1.0).p_star == 1.0
    assert CovariancePolicy.isotropic(4, 2.0, 1.0).p_star == 0.5
    assert CovariancePolicy.isotropic(4, 2.0).p_star == 0.5


def test_explicit_policy_checks():
    with pytest.raises(CorrelationError):
        CovariancePolicy.explicit(np.diag([2.0, 2.0]), total=3.0)
    with pytest.raises(CorrelationError):
        CovariancePolicy.explicit(np.diag([2.0, 0.5]), total=3.0, per_antenna=1.0)


def test_sample_prefix_is_stable():
    model, pol = FadingModel.iid(2, 2), CovariancePolicy.isotropic(2, 1.0)
    (a,) = per_sample_capacity(model, [pol], 5000, seed=1)
    (b,) = per_sample_capacity(model, [pol], 9000, seed=1)
    assert np.array_equal(a, b[:5000])


def test_worker_count_does_not_change_result():
    model, pol = FadingModel.iid(2, 3), CovariancePolicy.isotropic(3, 3.0)
    one = ergodic_capacity(model, pol, 20_000, seed=5, workers=1)
    many = ergodic_capacity(model, pol, 20_000, seed=5, workers=4)
    assert one == many


def test_right_invariance_per_sample():
    model = FadingModel.semi_correlated(np.diag([2.0, 0.5, 0.1]), 3)
    U = haar_unitary(3, np.random.default_rng(0))
    assert U.conj().T @ U == pytest.approx(np.eye(3), abs=1e-12)
    assert right_invariance_gap(model, U, 1.3, 5000) <= 1e-12


def test_eigenvector_invariance():
    lam = np.diag([1.5, 0.4]).astype(complex)
    Q = haar_unitary(2, np.random.default_rng(8))
    pol = CovariancePolicy.isotropic(2, 2.0)
    e1 = ergodic_capacity(FadingModel.semi_correlated(lam, 2), pol, 20_000, seed=1)
    e2 = ergodic_capacity(FadingModel.semi_correlated(Q @ lam @ Q.conj().T, 2), pol, 20_000, seed=2)
    assert abs(e1.capacity_nats - e2.capacity_nats) <= 3 * math.hypot(e1.std_error, e2.std_error)


def test_dominance_identical_policy_is_zero():
    rep = isotropic_dominance_test(FadingModel.iid(2, 3), [1.0, 1.0, 1.0], 2000)
    assert rep.diff_mean == 0.0
    assert rep.passed


def test_dominance_concentrated():
    rep = isotropic_dominance_test(FadingModel.iid(4, 4), [4.0, 0, 0, 0], 10_000)
    assert rep.passed
    assert rep.z_score > 3


def test_permuted_profile_matches():
    model = FadingModel.iid(2, 3)
    a = isotropic_dominance_test(model, [2.0, 1.0, 0.0], 10_000, seed=4)
    b = isotropic_dominance_test(model, [0.0, 2.0, 1.0], 10_000, seed=4)
    (x, y) = per_sample_capacity(model, [np.diag([2.0, 1.0, 0.0]), np.diag([0.0, 2.0, 1.0])],
                                 10_000, seed=4)
    d = x - y
    assert abs(d.mean()) <= 3 * d.std(ddof=1) / math.sqrt(d.size)
    assert a.first_est == b.first_est


def test_counterexample():
    rep = tx_correlated_counterexample(2.0, 2.0, 2, n=2, samples=10_000)
    assert rep.passed and rep.diff_mean > 0


@pytest.mark.parametrize("m,p", [(1, 2.0), (2, 1.0)])
def test_counterexample_ties(m, p):
    rep = tx_correlated_counterexample(2.0, p, m, n=2, samples=2000)
    assert rep.diff_mean == pytest.approx(0.0, abs=1e-15)
    assert not rep.passed


def test_tx_model_not_invariant():
    assert not FadingModel.tx_correlated(np.diag([1.0, 0.0]), 2).right_unitary_invariant
    assert FadingModel.iid(2, 2).right_unitary_invariant
