import math

import numpy as np
import pytest

from ssfplsim.estimator import (
    FitConfig,
    FitResult,
    LambdaSchedule,
    ProfiledDesign,
    bic_score,
    build_profiled_design,
    coordinate_descent_scad,
    direction_candidates,
    fit_sparse_linear,
    fit_ssfplsim,
    penalized_objective,
    profiled_ols,
    refine_candidates,
)
from ssfplsim.exceptions import NoFeasibleFit, NumericalDivergence, SingularDesign
from ssfplsim.functional import FunctionalSample, Grid, build_bspline_basis, calibrate_direction
from ssfplsim.scad import ScadParams, scad_univariate_min
from ssfplsim.simulation import Scenario, _setup, generate_replicate, true_beta, true_direction
from ssfplsim.smoothing import weight_matrix


def gauss_solve(a, b):
    """Gaussian elimination with partial pivoting (independent of LAPACK)."""
    a = [list(map(float, row)) + [float(v)] for row, v in zip(a, b)]
    n = len(a)
    for k in range(n):
        piv = max(range(k, n), key=lambda i: abs(a[i][k]))
        a[k], a[piv] = a[piv], a[k]
        for i in range(k + 1, n):
            f = a[i][k] / a[k][k]
            for j in range(k, n + 1):
                a[i][j] -= f * a[k][j]
    x = [0.0] * n
    for i in reversed(range(n)):
        x[i] = (a[i][n] - sum(a[i][j] * x[j] for j in range(i + 1, n))) / a[i][i]
    return np.array(x)


def random_design(rng, n, p, noise=0.5):
    x = rng.normal(size=(n, p))
    beta = rng.normal(size=p) * (rng.uniform(size=p) < 0.5)
    y = x @ beta + noise * rng.normal(size=n)
    return ProfiledDesign(y, x)


@pytest.fixture(scope="module")
def small_problem():
    s = Scenario(n=60, p=8, rho=0.0, c=0.01, seed=7)
    grid, basis = _setup(s)
    theta0 = true_direction(basis)
    data = generate_replicate(s, 0, theta0, grid)
    return s, basis, theta0, data


# -- profiled design --------------------------------------------------------------------


def test_profiled_design_constant_column(grid100, basis33, rng):
    sample = FunctionalSample(rng.normal(size=(15, 100)), grid100)
    theta = calibrate_direction([1, 0, 1, 0, 0, 0], basis33)
    x = np.column_stack([np.full(15, 3.0), rng.normal(size=15)])
    d = build_profiled_design(sample, x, rng.normal(size=15), theta, 1.0)
    assert np.max(np.abs(d.x_tilde[:, 0])) <= 1e-8


def test_profiled_design_flat_limit(grid100, basis33, rng):
    sample = FunctionalSample(rng.normal(size=(15, 100)), grid100)
    theta = calibrate_direction([1, 0, 1, 0, 0, 0], basis33)
    y = rng.normal(size=15)
    d = build_profiled_design(sample, rng.normal(size=(15, 2)), y, theta, 1e9)
    assert np.max(np.abs(d.y_tilde - (y - y.mean()))) < 1e-6


def test_profiled_design_naive_loop(grid100, basis33, rng):
    sample = FunctionalSample(rng.normal(size=(5, 100)), grid100)
    theta = calibrate_direction([0, 1, 0, 1, -1, -1], basis33)
    x, y = rng.normal(size=(5, 2)), rng.normal(size=5)
    w = weight_matrix(theta, 5.0, sample).entries
    d = build_profiled_design(sample, x, y, theta, 5.0)
    for i in range(5):
        yi = y[i] - sum(w[i, j] * y[j] for j in range(5))
        assert abs(d.y_tilde[i] - yi) < 1e-12
        for q in range(2):
            xi = x[i, q] - sum(w[i, j] * x[j, q] for j in range(5))
            assert abs(d.x_tilde[i, q] - xi) < 1e-12


def test_profiled_design_row_mismatch(grid100, basis33, rng):
    sample = FunctionalSample(rng.normal(size=(5, 100)), grid100)
    theta = calibrate_direction([1, 0, 0, 0, 0, 0], basis33)
    with pytest.raises(ValueError):
        build_profiled_design(sample, rng.normal(size=(4, 2)), rng.normal(size=5), theta, 1.0)


# -- profiled OLS ------------------------------------------------------------------------------


def test_ols_orthonormal_design(rng):
    q, _ = np.linalg.qr(rng.normal(size=(20, 3)))
    y = rng.normal(size=20)
    beta, _ = profiled_ols(ProfiledDesign(y, q))
    assert np.allclose(beta, q.T @ y, atol=1e-12)


def test_ols_duplicate_columns(rng):
    x = rng.normal(size=(20, 2))
    x = np.column_stack([x, x[:, 0]])
    with pytest.raises(SingularDesign):
        profiled_ols(ProfiledDesign(rng.normal(size=20), x))
    beta, sigma = profiled_ols(ProfiledDesign(rng.normal(size=20), x), ridge=1e-6)
    assert np.all(np.isfinite(beta)) and np.all(sigma > 0)


def test_ols_against_gaussian_elimination(rng):
    d = random_design(rng, 20, 3)
    beta, sigma = profiled_ols(d)
    xtx, xty = d.x_tilde.T @ d.x_tilde, d.x_tilde.T @ d.y_tilde
    ref = gauss_solve(xtx, xty)
    assert np.max(np.abs(beta - ref)) < 1e-8
    resid = d.y_tilde - d.x_tilde @ ref
    s2 = resid @ resid / (20 - 3)
    inv = np.column_stack([gauss_solve(xtx, e) for e in np.eye(3)])
    assert np.allclose(sigma, np.sqrt(s2 * np.diag(inv)), rtol=1e-8)


# -- coordinate descent -------------------------------------------------------------------------


def test_cd_lambda_zero_equals_ols_100_problems():
    r = np.random.default_rng(99)
    worst = 0.0
    for _ in range(100):
        n, p = int(r.integers(15, 60)), int(r.integers(1, 8))
        d = random_design(r, n, p)
        assert np.linalg.cond(d.x_tilde) < 1e8
        ols, _ = profiled_ols(d)
        beta, _, _, conv = coordinate_descent_scad(d, LambdaSchedule.from_sigma(0.0, np.ones(p)),
                                                   tol=1e-12, max_iter=100000)
        assert conv
        worst = max(worst, np.max(np.abs(beta - ols)) / max(np.max(np.abs(ols)), 1e-12))
    assert worst < 1e-6


def test_cd_zero_response(rng):
    x = rng.normal(size=(30, 4))
    beta, obj, _, _ = coordinate_descent_scad(ProfiledDesign(np.zeros(30), x),
                                              LambdaSchedule.from_sigma(0.1, np.ones(4)))
    assert np.array_equal(beta, np.zeros(4)) and obj == 0.0


def test_cd_orthogonal_design_decouples(rng):
    n = 40
    q, _ = np.linalg.qr(rng.normal(size=(n, 2)))
    x = q * np.sqrt(n)  # unit second moment, so standardization is the identity
    y = x @ np.array([2.5, 0.3]) + 0.1 * rng.normal(size=n)
    lam = 0.8
    d = ProfiledDesign(y, x)
    beta, _, _, _ = coordinate_descent_scad(d, LambdaSchedule.from_sigma(lam, np.ones(2)), tol=1e-12)
    z = x.T @ y / n
    for j in range(2):
        assert abs(beta[j] - scad_univariate_min(z[j], 1.0, ScadParams(lam))) < 2e-5


def test_cd_objective_non_increasing_20_fits():
    r = np.random.default_rng(5)
    for _ in range(20):
        n, p = int(r.integers(20, 80)), int(r.integers(3, 15))
        d = random_design(r, n, p, noise=2.0)
        sched = LambdaSchedule.from_sigma(r.uniform(0.02, 0.5), r.uniform(0.5, 2, size=p))
        init = r.normal(size=p) * 3
        out = coordinate_descent_scad(d, sched, init=init, trace=True)
        beta, obj, trace = out[0], out[1], out[4]
        start = penalized_objective(d, init, sched)
        seq = np.concatenate([[start], trace])
        assert np.all(np.diff(seq) <= 1e-9 * np.abs(seq[:-1]) + 1e-12)
        assert obj == pytest.approx(penalized_objective(d, beta, sched), rel=1e-10)


def test_cd_exact_zeros_and_null_model_threshold(rng):
    n, p = 50, 6
    x = rng.normal(size=(n, p))
    y = rng.normal(size=n)
    d = ProfiledDesign(y, x)
    scale = np.sqrt(np.mean(x * x, axis=0))
    sigma = np.ones(p)
    # original-unit levels: coefficient j stays at zero while lam * s_j^2 >= |x_j.y| / n
    lam_max = np.max(np.abs(x.T @ y / n) / scale ** 2)
    for mult in (1.0, 1.5, 10.0):
        beta, _, _, _ = coordinate_descent_scad(d, LambdaSchedule.from_sigma(lam_max * mult, sigma))
        assert np.array_equal(beta, np.zeros(p))
    beta, _, _, _ = coordinate_descent_scad(d, LambdaSchedule.from_sigma(lam_max * 0.5, sigma))
    assert np.any(beta != 0)
    assert set(np.unique(beta[np.abs(beta) < 1e-8])) <= {0.0}


@pytest.mark.filterwarnings("ignore:overflow")
def test_cd_divergence():
    x = np.full((5, 1), 1e200)
    x[0, 0] = -1e200
    d = ProfiledDesign(np.full(5, 1e200), x)
    with pytest.raises(NumericalDivergence):
        coordinate_descent_scad(d, LambdaSchedule.from_sigma(0.0, [1.0]))


def test_cd_rejects_bad_arguments(rng):
    d = random_design(rng, 10, 2)
    with pytest.raises(ValueError):
        coordinate_descent_scad(d, LambdaSchedule.from_sigma(0.1, [1, 1]), tol=0)
    with pytest.raises(ValueError):
        coordinate_descent_scad(d, LambdaSchedule.from_sigma(0.1, [1, 1]), init=[np.nan, 0])


# -- BIC ------------------------------------------------------------------------------------------


def test_bic_examples(rng):
    y = rng.normal(size=10)
    d = ProfiledDesign(y, rng.normal(size=(10, 3)))
    assert bic_score(d, np.zeros(3)) == pytest.approx(10 * math.log(y @ y / 10), abs=1e-12)
    # hand case: n = 10, RSS = 5, df = 2
    x = np.zeros((10, 3))
    x[0, 0] = x[1, 1] = 1.0
    yy = np.zeros(10)
    yy[2] = math.sqrt(5.0)
    hand = ProfiledDesign(yy, x)
    assert bic_score(hand, [1e-3, 2e-3, 0.0]) == pytest.approx(
        10 * math.log(5.0 + 1e-6 + 4e-6) / 1 - 10 * math.log(10) + 2 * math.log(10), abs=1e-12)
    exact = ProfiledDesign(np.array([0, 0, math.sqrt(5.0)] + [0] * 7), x)
    assert bic_score(exact, [0.0, 0.0, 0.0]) == pytest.approx(10 * math.log(0.5), abs=1e-12)
    assert 10 * math.log(0.5) + 2 * math.log(10) == pytest.approx(-6.931471805599453 + 4.605170185988092)


def test_bic_df_penalty(rng):
    x = np.zeros((10, 3))
    y = rng.normal(size=10)
    d = ProfiledDesign(y, x)
    assert bic_score(d, [1.0, 1.0, 0.0]) < bic_score(d, [1.0, 1.0, 1.0])


# -- candidates -----------------------------------------------------------------------------------


def test_candidate_counts(grid100):
    assert len(direction_candidates(build_bspline_basis(2, 0, grid100))) == 4
    basis = build_bspline_basis(3, 3, grid100)
    cands = direction_candidates(basis)
    assert len(cands) == 364
    seed = calibrate_direction([0, 1, 0, 1, -1, -1], basis)
    assert any(np.allclose(c.coefficients, seed.coefficients) for c in cands)
    assert all(c.calibrated and c.coefficients[np.flatnonzero(c.coefficients)[0]] > 0 for c in cands)


def test_refine_candidates(basis33):
    best = calibrate_direction([0, 1, 0, 1, -1, -1], basis33)
    extra = refine_candidates(best, basis33, 0.5)
    assert len(extra) == 12
    assert all(c.calibrated for c in extra)


# -- full fit -----------------------------------------------------------------------------------


def test_fit_degenerate_grids_equal_profiled_ols(small_problem):
    s, basis, theta0, data = small_problem
    cfg = FitConfig(lambdas=(0.0,))
    fit = fit_ssfplsim(data.curves, data.x, data.y, basis, cfg, candidates=[theta0])
    d = build_profiled_design(data.curves, data.x, data.y, theta0, fit.h_hat)
    ols, _ = profiled_ols(d)
    assert np.max(np.abs(fit.beta_hat - ols)) < 1e-6 * max(1, np.max(np.abs(ols)))
    assert fit.lambda_hat == 0.0


def test_fit_result_invariants_and_determinism(small_problem):
    s, basis, theta0, data = small_problem
    cfg = FitConfig(baselines=True, true_support=(0, 1, 4))
    f1 = fit_ssfplsim(data.curves, data.x, data.y, basis, cfg)
    f2 = fit_ssfplsim(data.curves, data.x, data.y, basis, cfg)
    assert f1.selected == tuple(np.flatnonzero(f1.beta_hat))
    assert np.array_equal(f1.beta_hat, f2.beta_hat) and f1.theta_hat.key == f2.theta_hat.key
    assert (f1.h_hat, f1.lambda_hat, f1.bic) == (f2.h_hat, f2.lambda_hat, f2.bic)
    assert f1.theta_hat.calibrated
    assert f1.candidates_evaluated == 364 * 8
    assert set(f1.baselines) == {"beta_ols", "beta_oracle"}
    assert np.flatnonzero(f1.baselines["beta_oracle"]).tolist() == [0, 1, 4]


def test_fit_permutation_invariance(small_problem):
    s, basis, theta0, data = small_problem
    cands = direction_candidates(basis)
    perm = np.random.default_rng(0).permutation(len(cands))
    f1 = fit_ssfplsim(data.curves, data.x, data.y, basis, candidates=cands)
    f2 = fit_ssfplsim(data.curves, data.x, data.y, basis, candidates=[cands[i] for i in perm])
    assert np.array_equal(f1.beta_hat, f2.beta_hat)
    assert f1.theta_hat.key == f2.theta_hat.key
    assert (f1.h_hat, f1.lambda_hat, f1.bic) == (f2.h_hat, f2.lambda_hat, f2.bic)


def test_fit_simulated_replicate_selects_sparse_model():
    s = Scenario(n=100, p=50, rho=0.0, c=0.01, seed=11)
    grid, basis = _setup(s)
    theta0 = true_direction(basis)
    data = generate_replicate(s, 0, theta0, grid)
    fit = fit_ssfplsim(data.curves, data.x, data.y, basis)
    assert 0 in fit.selected
    assert len(fit.selected) <= 10
    assert np.all(fit.beta_hat[np.flatnonzero(true_beta(50) == 0)] == 0) or len(fit.selected) < 25


def test_fit_refinement_never_worse(small_problem):
    s, basis, theta0, data = small_problem
    base = fit_ssfplsim(data.curves, data.x, data.y, basis)
    ref = fit_ssfplsim(data.curves, data.x, data.y, basis, FitConfig(refine=True))
    assert ref.bic <= base.bic
    assert ref.candidates_evaluated > base.candidates_evaluated


def test_fit_no_feasible_pair(grid100, basis33, rng):
    sample = FunctionalSample(np.tile(np.sin(grid100.points), (12, 1)), grid100)
    with pytest.raises(NoFeasibleFit):
        fit_ssfplsim(sample, rng.normal(size=(12, 2)), rng.normal(size=12), basis33)


def test_fit_input_validation(small_problem):
    s, basis, theta0, data = small_problem
    with pytest.raises(ValueError):
        fit_ssfplsim(data.curves, data.x[:-1], data.y, basis)
    other = build_bspline_basis(3, 3, Grid.uniform(0, 2, 100))
    with pytest.raises(ValueError):
        fit_ssfplsim(data.curves, data.x, data.y, other)


def test_fit_result_support_invariant(basis33):
    theta = calibrate_direction([1, 0, 0, 0, 0, 0], basis33)
    with pytest.raises(ValueError):
        FitResult(np.array([1.0, 0.0]), theta, (0, 1), 1.0, 0.1, 0.0, 0.0, 1)


def test_sparse_linear_baseline(rng):
    n, p = 120, 10
    x = rng.normal(size=(n, p))
    y = 4.0 + x[:, 0] * 2 - x[:, 3] * 1.5 + 0.3 * rng.normal(size=n)
    fit = fit_sparse_linear(x, y)
    assert {0, 3} <= set(fit.selected) and len(fit.selected) <= 4
    assert fit.intercept == pytest.approx(4.0, abs=0.2)
    assert fit.predict(x).shape == (n,)


def test_path_early_stop_keeps_bic_minimum():
    from ssfplsim.estimator import _lambda_grid, _rss_over_n, _scad_path
    r = np.random.default_rng(2024)
    cfg = FitConfig()
    stopped = 0
    for _ in range(200):
        n, p = int(r.integers(30, 120)), int(r.integers(2, 20))
        d = random_design(r, n, p, noise=r.uniform(0.1, 3.0))
        x = d.x_tilde / np.sqrt(np.mean(d.x_tilde ** 2, axis=0))
        G, c, yy = x.T @ x / n, x.T @ d.y_tilde / n, float(d.y_tilde @ d.y_tilde / n)
        ols, sigma = profiled_ols(ProfiledDesign(d.y_tilde, x))
        lambdas = _lambda_grid(float(np.max(np.abs(c) / sigma)), cfg)
        runs = []
        for floor in (_rss_over_n(G, c, yy, ols), 0.0):
            L = lambdas.size
            out = (np.zeros((L, p)), np.empty(L), np.empty(L), np.zeros(L, np.int64), np.zeros(L, np.bool_))
            done = _scad_path(G, c, yy, sigma, lambdas, 3.7, 1e-6, 1000, float(n), floor, *out)
            runs.append((done, out[0], out[1]))
        (done, b1, bic1), (full, b2, bic2) = runs
        assert full == lambdas.size
        stopped += done < full
        k1, k2 = np.lexsort((lambdas, bic1))[0], np.lexsort((lambdas, bic2))[0]
        assert k1 == k2 and np.array_equal(b1[k1], b2[k2])
    assert stopped > 0
