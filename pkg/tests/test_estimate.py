import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from compgp.cgp import CgpParams, cgp_predict
from compgp.data import Dataset
from compgp.errors import EstimationFailedError, SingularMatrixError
from compgp.estimate import (
    KAPPA_SPAN,
    PENALTY,
    CgpSpace,
    FitOptions,
    ProfileObjective,
    fit_cgp,
    log_unwarp,
    log_warp,
    multistart_minimize,
    profile_neg_loglik,
)
from compgp.gls import closed_form_mu_tau2
from compgp.kernels import NO_JITTER, corr_matrix, design_stats, safe_cholesky

from conftest import gauss_k


def _xiong_like(n=9, seed=0):
    X = np.sort(np.random.default_rng(seed).random(n))
    y = np.sin(30 * (X - 0.9) ** 4) * np.cos(2 * (X - 0.9)) + (X - 0.9) / 2
    return Dataset.from_unit(X, y)


@given(u=st.floats(0, 1), d=st.floats(1, 12))
def test_log_warp_roundtrip_and_endpoints(u, d):
    t = log_warp(u, d)
    assert 0.0 <= t <= 1.0 + 1e-15
    assert log_unwarp(t, d) == pytest.approx(u, abs=1e-9)
    assert log_warp(0.0, d) == 0.0
    assert log_warp(1.0, d) == pytest.approx(1.0, abs=1e-15)


def test_optimizer_convex_sanity():
    res = multistart_minimize(lambda u: (u[0] - 0.3) ** 2 + (u[1] - 0.7) ** 2, 2, seed=1)
    assert np.allclose(res.x, [0.3, 0.7], atol=1e-4)


def test_optimizer_stays_in_box_and_is_monotone():
    seen = []

    def f(u):
        seen.append(np.array(u))
        return float(np.sum((u - 1.4) ** 2))

    res = multistart_minimize(f, 3, seed=4)
    pts = np.array(seen)
    assert pts.min() >= 0.0 and pts.max() <= 1.0
    assert np.allclose(res.x, 1.0, atol=1e-4)
    assert np.all(np.diff(res.best_so_far) <= 0)
    assert len(res.runs) == 10


def test_optimizer_tie_break_prefers_smaller_key():
    res = multistart_minimize(lambda u: 0.0, 2, seed=0, tie_key=lambda u: (u[0],))
    assert res.x[0] == min(r.x[0] for r in res.runs)


def test_closed_form_identity_and_constant():
    y = np.array([1.0, 4.0, 2.5, -1.0])
    mu, tau2, _ = closed_form_mu_tau2(y, safe_cholesky(np.eye(4)))
    assert mu == pytest.approx(y.mean(), rel=1e-15)
    assert tau2 == pytest.approx(np.mean((y - y.mean()) ** 2), rel=1e-14)
    mu, tau2, w = closed_form_mu_tau2(np.full(3, 2.0), safe_cholesky(np.eye(3)))
    assert (mu, tau2) == (2.0, 0.0) and not np.any(w)


def test_closed_form_dense_oracle():
    A = np.random.default_rng(5).normal(size=(3, 3))
    Q = A @ A.T + 0.5 * np.eye(3)
    y = np.array([0.3, -1.2, 2.0])
    Qi = np.linalg.inv(Q)
    one = np.ones(3)
    mu = (one @ Qi @ y) / (one @ Qi @ one)
    tau2 = (y - mu) @ Qi @ (y - mu) / 3
    got = closed_form_mu_tau2(y, safe_cholesky(Q))
    assert got[0] == pytest.approx(mu, abs=1e-12)
    assert got[1] == pytest.approx(tau2, abs=1e-12)


def test_profile_two_point_hand_value():
    X = np.array([[0.0], [0.5]])
    y = np.array([1.0, 3.0])
    ds = Dataset.from_unit(X, y)
    r = math.exp(-2.0 * 0.25)
    # for a 2x2 unit-diagonal matrix with off-diagonal r, mu = ybar and
    # tau2 = (y1 - y2)^2 / (4 (1 + r)) ... times 2/2 with n = 2
    mu = 2.0
    d = y - mu
    Ri = np.array([[1, -r], [-r, 1]]) / (1 - r * r)
    tau2 = d @ Ri @ d / 2
    want = 2 * math.log(tau2) + math.log(1 - r * r)
    params = CgpParams(0.0, [2.0], [100.0], 0.5)
    assert profile_neg_loglik(ds, params, alpha_lower=2.0) == pytest.approx(want, abs=1e-10)


def test_profile_lambda_zero_is_ok_objective():
    ds = _xiong_like()
    theta = np.array([30.0])
    G = gauss_k(ds.X, ds.X, theta)
    Gi = np.linalg.inv(G)
    one = np.ones(ds.n)
    mu = (one @ Gi @ ds.y) / (one @ Gi @ one)
    s2 = (ds.y - mu) @ Gi @ (ds.y - mu) / ds.n
    want = ds.n * math.log(s2) + np.linalg.slogdet(G)[1]
    got = profile_neg_loglik(ds, CgpParams(0.0, theta, theta + 500, 0.3))
    assert got == pytest.approx(want, abs=1e-8)


@settings(max_examples=10, deadline=None)
@given(c=st.floats(-100, 100), lam=st.floats(0.01, 1), b=st.floats(0, 1))
def test_profile_shift_invariant(c, lam, b):
    ds = _xiong_like()
    al = design_stats(ds.X).alpha_lower
    params = CgpParams(lam, [0.5 * al], [3 * al], b)
    base = profile_neg_loglik(ds, params)
    shifted = profile_neg_loglik(Dataset.from_unit(ds.X, ds.y + c), params)
    assert shifted == pytest.approx(base, abs=1e-8 * (1 + abs(c)))


def test_profile_penalty_on_failure():
    ds = Dataset.from_unit(np.array([0.0, 1e-9, 0.5]), np.array([1.0, 2.0, 0.0]))
    obj = ProfileObjective(ds, 10.0, ladder=NO_JITTER)
    assert obj(CgpParams(0.0, [1e-6], [10.0], 0.5)) == PENALTY
    assert obj.failures == 1


@settings(max_examples=30, deadline=None)
@given(u=st.lists(st.floats(0, 1), min_size=5, max_size=5), mode=st.sampled_from(["reduced", "full"]))
def test_space_maps_into_feasible_box(u, mode):
    space = CgpSpace(2, 7.5, mode)
    u = np.array(u[:space.dim] + [0.5] * (space.dim - len(u)))
    prm = space.to_params(u)
    prm.check(alpha_lower=7.5)
    assert np.all(prm.alpha <= 7.5 * (1 + KAPPA_SPAN) * (1 + 1e-12))
    back = space.to_params(space.to_unit(prm))
    assert back.lam == pytest.approx(prm.lam, rel=1e-9, abs=1e-15)
    assert np.allclose(back.alpha, prm.alpha, rtol=1e-9)


def test_fit_xiong_like_properties():
    ds = _xiong_like(12, seed=2)
    model, report = fit_cgp(ds, seed=0)
    p = model.params
    al = report.alpha_lower
    p.check(alpha_lower=al)
    assert al <= p.kappa <= KAPPA_SPAN * al * (1 + 1e-12)
    assert report.objective == pytest.approx(profile_neg_loglik(ds, p, alpha_lower=al), abs=1e-8)
    assert np.all(np.diff(report.best_so_far) <= 0)
    assert report.restarts == 10
    pred = cgp_predict(model, ds.X)
    assert np.max(np.abs(pred.mean - ds.y)) <= 1e-6 * np.ptp(ds.y)
    again, report2 = fit_cgp(ds, seed=0)
    assert report2.objective == report.objective
    assert np.array_equal(again.weights, model.weights)


def test_full_mode_not_worse_than_reduced():
    ds = _xiong_like(10, seed=3)
    _, red = fit_cgp(ds, seed=1)
    _, full = fit_cgp(ds, seed=1, mode="full")
    assert full.objective <= red.objective + 1e-3 * abs(red.objective) + 1e-6
    assert full.best_params.kappa is None


def test_lambda_invariant_to_response_scale():
    ds = _xiong_like(10, seed=4)
    a, ra = fit_cgp(ds, seed=2)
    b, rb = fit_cgp(Dataset.from_unit(ds.X, 7.0 * ds.y), seed=2)
    assert abs(a.params.lam - b.params.lam) <= 1e-3
    assert rb.objective - ra.objective == pytest.approx(ds.n * math.log(49.0), abs=1e-3)
    Xq = np.linspace(0, 1, 9)
    assert np.allclose(cgp_predict(b, Xq).mean, 7.0 * cgp_predict(a, Xq).mean, atol=1e-3)


def test_constant_response_is_degenerate(caplog):
    ds = Dataset.from_unit(np.linspace(0, 1, 5), np.full(5, -2.0))
    model, report = fit_cgp(ds)
    assert "degenerate constant response" in caplog.text
    assert model.degenerate and model.params.lam == 0.0 and model.tau2_hat == 0.0
    assert np.all(cgp_predict(model, np.linspace(0, 1, 11)).mean == -2.0)


def test_total_failure_raises_with_report(monkeypatch):
    import compgp.estimate as est

    def broken(*args, **kw):
        raise SingularMatrixError("forced")

    monkeypatch.setattr(est, "assemble_Q", broken)
    monkeypatch.setattr(est, "fit_volatility", lambda *a, **k: broken())
    ds = _xiong_like(6)
    with pytest.raises(EstimationFailedError) as err:
        fit_cgp(ds, FitOptions(n_starts=2, maxfev=20))
    assert err.value.report is not None
    assert err.value.report.failures > 0


def test_fit_options_override():
    ds = _xiong_like(8, seed=5)
    _, report = fit_cgp(ds, FitOptions(n_starts=3, maxfev=60), seed=9)
    assert report.restarts == 3
    assert corr_matrix(ds.X, report.best_params.theta).shape == (8, 8)
