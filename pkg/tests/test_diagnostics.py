import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tensorfactor.dgp import DgpSpec, gen_series
from tensorfactor.diagnostics import (
    lagged_moments,
    loading_loss,
    loss_projection,
    loss_sine,
    norm_relations_hold,
    predicted_rate,
    theory_report,
)
from tensorfactor.errors import LagError
from tensorfactor.estimators import tipup_matrix, topup_matrix


def one_factor(seed=0, T=60, dims=(5, 4), lam=1.7, phi=0.6):
    return gen_series(DgpSpec(dims, (1,) * len(dims), T, lam=lam, ar_coeffs=phi, noise_scale=0.0, seed=seed))


@pytest.mark.parametrize("h0", [1, 2, 3])
def test_one_factor_identities(h0):
    lam = 1.7
    _, truth = one_factor(lam=lam)
    rep = theory_report(truth.signal, h0, factors=truth.factors)
    rho = rep.rho_hat
    want = lam**2 * np.sqrt(np.sum(rho[1:] ** 2) / h0)
    for m in rep.modes:
        assert abs(m.lambda_k**2 - want) < 1e-8 * max(1, want)
        assert abs(m.lambda_k_star - m.lambda_k) < 1e-8
        assert abs(m.theta_star_spectral - lam**2 * rho[0]) < 1e-8
        assert abs(m.theta_op - lam**2 * rho[0]) < 1e-8


def test_zero_signal_report():
    rep = theory_report(np.zeros((10, 3, 3)), 1)
    for m in rep.modes:
        assert m.theta_op == m.theta_star_spectral == m.theta_trace == 0
        assert not np.any(m.tau) and not np.any(m.tau_star)
        assert m.lambda_k == m.lambda_k_star == 0


def test_report_lag_error():
    with pytest.raises(LagError):
        theory_report(np.ones((3, 2, 2)), 3)


def test_report_to_dict_and_flag():
    _, truth = one_factor()
    d = theory_report(truth.signal, 1, factors=truth.factors, empirical=True).to_dict()
    assert d["empirical"] is True and len(d["modes"]) == 2 and len(d["rho_hat"]) == 2


def test_ladders_match_direct_svd():
    x, truth = gen_series(DgpSpec((5, 6), (2, 2), 40, lam=2.0, noise_offdiag=0.2, seed=1))
    rep = theory_report(x, 2, empirical=True)
    for k, m in enumerate(rep.modes):
        s = np.linalg.svd(topup_matrix(x, k, 2), compute_uv=False)
        np.testing.assert_allclose(m.tau[: s.size], s, rtol=1e-8, atol=1e-8 * s[0])
        s = np.linalg.svd(tipup_matrix(x, k, 2), compute_uv=False)
        np.testing.assert_allclose(m.tau_star[: s.size], s, rtol=1e-8, atol=1e-8 * s[0])
        assert np.all(np.diff(m.tau) <= 1e-12)


def test_loss_sine_examples():
    assert loss_sine([1, 0], [1, 0]) == 0
    assert loss_sine([0, 1], [1, 0]) == 1
    assert abs(loss_sine(np.array([1, 1]) / np.sqrt(2), [1, 0]) - np.sqrt(2) / 2) < 1e-12


def test_loss_projection_examples():
    p = np.diag([1.0, 0.0])
    assert loss_projection(p, p) == 0
    assert abs(loss_projection(p, np.diag([0.0, 1.0])) - 1) < 1e-15


def test_loading_loss_unnormalized_truth(rng):
    a = rng.standard_normal((6, 2))
    q, _ = np.linalg.qr(a)
    assert loading_loss(q, 3.0 * a) < 1e-12


def test_predicted_rate_examples():
    assert predicted_rate("TIPUP", 4, 4, 1, 4) == (1.0, 2.0)
    assert predicted_rate("TOPUP", 4, 4, 1, 4) == (2.0, 4.0)
    assert predicted_rate("iTIPUP", 4, 4, 1, 4) == (1.0, 2.0)
    t1, t2 = predicted_rate("TIPUP", 4, 4, 1e12, 4)
    assert t1 < 1e-11 and t2 < 1e-23
    with pytest.raises(ValueError):
        predicted_rate("UP", 4, 4, 1, 4)


@given(st.integers(0, 2**31), st.integers(1, 3))
def test_norm_relations_on_generated_signals(seed, r):
    _, truth = gen_series(DgpSpec((5, 4), (r, min(r, 4)), 30, lam=1.0, noise_scale=0.0, seed=seed))
    assert norm_relations_hold(theory_report(truth.signal, 1, factors=truth.factors))


@given(st.integers(0, 2**31), st.floats(-0.95, 0.95), st.integers(2, 50))
def test_lagged_moment_bound(seed, phi, T):
    _, truth = gen_series(DgpSpec((2,), (1,), T, ar_coeffs=phi, noise_scale=0.0, seed=seed))
    rho = lagged_moments(truth.factors, T - 1)
    for h in range(1, T):
        assert (1 - h / T) * abs(rho[h]) <= rho[0] * (1 + 1e-12) + 1e-15


@given(st.integers(0, 2**31), st.integers(2, 8))
def test_rank_one_losses_agree(seed, d):
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal(d), rng.standard_normal(d)
    u /= np.linalg.norm(u)
    v /= np.linalg.norm(v)
    assert abs(loss_sine(u, v) - loss_projection(np.outer(u, u), np.outer(v, v))) < 1e-10
