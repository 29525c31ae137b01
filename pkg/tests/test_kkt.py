import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from beamcap import ChannelVector, PowerBudget, certify, reconstruct_multipliers, solve, solve_uniform
from beamcap.kkt import BRANCH_PA, BRANCH_TP, TOL, perturb_amplitude
from beamcap.miso import solution_or_none

from conftest import random_channel
from strategies import instances


def _cert(h, pt, pa):
    b = PowerBudget(pt, pa)
    sol = solve(h, b)
    return sol, certify(h, sol, b)


def test_skewed_certificate(skewed):
    sol, cert = _cert(skewed, 2.0, 1.0)
    assert cert.passed
    assert cert.branch == BRANCH_TP
    assert cert.lam_i[0] > 0
    assert np.all(cert.lam_i[1:] == 0)
    assert np.linalg.eigvalsh(cert.M).min() >= -1e-9 * np.abs(np.linalg.eigvalsh(cert.M)).max()


def test_mrt_certificate(skewed):
    sol, cert = _cert(skewed, 1.0, 1.0)
    assert cert.passed
    assert np.all(cert.lam_i == 0)
    assert cert.lam == pytest.approx(cert.a_scalar * skewed.l2())
    assert cert.lam > 0


def test_perturbed_candidate_fails(skewed):
    b = PowerBudget(2.0, 1.0)
    sol = solve(skewed, b)
    for i in range(4):
        cert = certify(skewed, perturb_amplitude(sol, i), b)
        assert not cert.passed
    cert = reconstruct_multipliers(skewed, perturb_amplitude(sol, 1), b)
    assert cert.residuals["slack_rm"] > TOL


def test_scalar_channel_gives_zero_m():
    h = ChannelVector([0.6 - 0.8j])
    for pt in (0.5, 1.0, 3.0):
        sol, cert = _cert(h, pt, 1.0)
        assert cert.passed
        assert cert.M == pytest.approx(np.zeros((1, 1)), abs=1e-12)


def test_egt_boundary_either_branch(skewed):
    b = PowerBudget(4.0, 1.0)
    sol = solve(skewed, b)
    assert sol.k == 4
    cert = certify(skewed, sol, b)
    assert cert.passed
    assert cert.lam >= 0
    # a strictly slack total leaves only the lambda = 0 branch
    b = PowerBudget(6.0, 1.0)
    cert = certify(skewed, solve(skewed, b), b)
    assert cert.passed and cert.lam == 0.0


def test_branch_override(skewed):
    b = PowerBudget(2.0, 1.0)
    sol = solve(skewed, b)
    assert not reconstruct_multipliers(skewed, sol, b, branch=BRANCH_PA).passed
    assert reconstruct_multipliers(skewed, sol, b, branch=BRANCH_TP).passed


def test_wrong_k_fails(skewed):
    b = PowerBudget(2.5, 1.0)
    assert solve(skewed, b).k == 2
    for k in (0, 1):
        wrong = solution_or_none(skewed, b, k)
        assert wrong is not None
        assert not certify(skewed, wrong, b).passed
    assert solution_or_none(skewed, b, 3) is None


def test_zero_channel_certificate():
    h = ChannelVector([0.0, 0.0])
    b = PowerBudget(1.0, 1.0)
    assert certify(h, solve(h, b), b).passed


def test_to_json(skewed):
    _, cert = _cert(skewed, 2.0, 1.0)
    js = cert.to_json()
    assert js["pass"] is True
    assert js["failures"] == []
    assert set(js["residuals"]) >= {"slack_tp", "slack_pa", "slack_rm", "primal", "dual_psd"}


@given(instances())
def test_random_instances_certify(inst):
    h, pt, pa = inst
    _, cert = _cert(h, pt, pa)
    assert cert.passed, cert.to_json()


@given(instances())
def test_diagonal_identity(inst):
    h, pt, pa = inst
    _, cert = _cert(h, pt, pa)
    lhs = np.abs(h.gains) ** 2 + np.real(np.diag(cert.M))
    assert lhs == pytest.approx(cert.lam + cert.lam_i, abs=1e-10 * max(1.0, h.l2() ** 2))


@given(instances(), st.lists(st.floats(-3.14, 3.14), min_size=8, max_size=8))
def test_phase_covariance(inst, thetas):
    h, pt, pa = inst
    rot = np.exp(1j * np.asarray(thetas[:h.m]))
    _, c0 = _cert(h, pt, pa)
    _, c1 = _cert(h.rotated(rot), pt, pa)
    D = np.diag(rot)
    assert c1.M == pytest.approx(D @ c0.M @ D.conj().T, abs=1e-12 * max(1.0, h.l2() ** 2))
    for name, r in c0.residuals.items():
        assert c1.residuals[name] == pytest.approx(r, abs=1e-12)


def test_quadratic_form_nonnegative():
    rng = np.random.default_rng(7)
    for trial in range(20):
        m = int(rng.integers(2, 9))
        h = random_channel(rng, m)
        pt = float(10 ** rng.uniform(-2, 2))
        pa = float(10 ** rng.uniform(-2, 2))
        _, cert = _cert(h, pt, pa)
        x = rng.standard_normal((10_000, m)) + 1j * rng.standard_normal((10_000, m))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        q = np.real(np.einsum("ni,ij,nj->n", x.conj(), cert.M, x))
        assert q.min() >= -1e-9 * h.l2() ** 2


def test_rank_is_m_minus_one():
    rng = np.random.default_rng(3)
    for _ in range(50):
        m = int(rng.integers(2, 9))
        h = random_channel(rng, m)
        _, cert = _cert(h, float(10 ** rng.uniform(-2, 2)), float(10 ** rng.uniform(-2, 2)))
        assert cert.rank == m - 1
