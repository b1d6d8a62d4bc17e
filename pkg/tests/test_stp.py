import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stpforecast.linalg import EigResult, svd_oracle
from stpforecast.preprocess import center_transient
from stpforecast.stp import (MissingMeanError, ModelInvariantError, NotCenteredError,
                             RankError, STPModel, build_hindcast_matrix,
                             build_prediction_matrix, expansion_coefficients, fit,
                             hindcast_correlation, hindcast_modes, predict, project,
                             solve_pod, stp_modes, truncate)
from stpforecast.types import DimensionError, Ensemble, HorizonSpec, WeightVector

from conftest import random_ensemble, rel


def centered(data, n, m, p):
    return Ensemble(np.atleast_2d(np.asarray(data, float)), HorizonSpec(n, m, p), centered=True)


# data matrices

def test_matrices_single_episode():
    ens = centered([1, 2, 3, 4], 1, 1, 2)
    np.testing.assert_array_equal(build_hindcast_matrix(ens), [[1], [2]])
    np.testing.assert_array_equal(build_prediction_matrix(ens), [[1], [2], [3], [4]])


def test_identical_episodes_give_identical_columns():
    ens = centered([[1, 2, 3, 4], [1, 2, 3, 4]], 1, 1, 2)
    q = build_hindcast_matrix(ens)
    np.testing.assert_array_equal(q[:, 0], q[:, 1])


def test_matrices_on_random_ensemble(small_ensemble):
    qm = build_hindcast_matrix(small_ensemble)
    qpm = build_prediction_matrix(small_ensemble)
    np.testing.assert_array_equal(qm, qpm[: qm.shape[0]])
    norms = [np.sqrt(sum(v * v for v in ep)) for ep in small_ensemble.data.tolist()]
    np.testing.assert_allclose(np.linalg.norm(qpm, axis=0), norms, rtol=1e-14)


def test_uncentered_rejected():
    ens = Ensemble(np.zeros((1, 4)), HorizonSpec(1, 1, 2))
    with pytest.raises(NotCenteredError):
        build_hindcast_matrix(ens)
    with pytest.raises(NotCenteredError):
        build_prediction_matrix(ens)


# correlation matrix and eigenproblem

def test_correlation_small_cases():
    np.testing.assert_array_equal(hindcast_correlation(np.array([[1.0], [2.0]])), [[5.0]])
    np.testing.assert_array_equal(hindcast_correlation(np.eye(2)), 0.5 * np.eye(2))


def test_correlation_weight_scaling(small_ensemble):
    q = build_hindcast_matrix(small_ensemble)
    p = small_ensemble.horizon.p
    c1 = hindcast_correlation(q, WeightVector.uniform(p))
    c2 = hindcast_correlation(q, WeightVector(np.full(p, 2.0)))
    np.testing.assert_array_equal(c2, 2.0 * c1)
    assert np.array_equal(c2, c2.T)


def test_correlation_weights_replicate_per_snapshot():
    rng = np.random.default_rng(5)
    n, p, k = 3, 4, 6
    q = rng.standard_normal((n * p, k))
    w = rng.uniform(0.5, 2, p)
    full_w = np.concatenate([w] * n)
    expected = np.einsum("ij,i,ik->jk", q, full_w, q) / k
    np.testing.assert_allclose(hindcast_correlation(q, WeightVector(w)), expected, rtol=1e-13)
    with pytest.raises(DimensionError):
        hindcast_correlation(q[:-1], WeightVector(w))


def test_solve_pod_small():
    res = solve_pod(0.5 * np.eye(2))
    np.testing.assert_allclose(res.eigenvalues, [0.5, 0.5])
    res = solve_pod(np.diag([2.0, 0.5]))
    np.testing.assert_array_equal(res.eigenvalues, [2.0, 0.5])
    np.testing.assert_array_equal(res.eigenvectors, np.eye(2))


def test_solve_pod_trace_and_clamp(small_ensemble):
    c = hindcast_correlation(build_hindcast_matrix(small_ensemble))
    res = solve_pod(c)
    assert abs(res.eigenvalues.sum() - np.trace(c)) <= 1e-10 * np.trace(c)
    # centering makes the Gram matrix singular; the null eigenvalue is clamped
    assert np.all(res.eigenvalues >= 0)


def test_truncate():
    eig = EigResult(np.array([2.0, 0.5]), np.eye(2))
    same = truncate(eig, 2)
    np.testing.assert_array_equal(same.eigenvalues, eig.eigenvalues)
    np.testing.assert_array_equal(same.eigenvectors, eig.eigenvectors)
    one = truncate(eig, 1)
    np.testing.assert_array_equal(one.eigenvalues, [2.0])
    np.testing.assert_array_equal(one.eigenvectors, [[1.0], [0.0]])
    guarded = truncate(EigResult(np.array([1.0, 1e-18, 0.0]), np.eye(3)), 3)
    assert guarded.rank == 1
    for bad in (0, 3):
        with pytest.raises(RankError):
            truncate(eig, bad)


# modes and coefficients

def test_hindcast_modes_by_hand():
    # C- = diag(2, 0.5), Psi = I, Phi = diag(2,1) diag(1/sqrt2, sqrt2) / sqrt2 = I
    q = np.diag([2.0, 1.0])
    eig = solve_pod(hindcast_correlation(q))
    np.testing.assert_allclose(eig.eigenvalues, [2.0, 0.5])
    np.testing.assert_allclose(hindcast_modes(q, eig, 2), np.eye(2), atol=1e-15)


def test_single_episode_mode_is_normalized_data():
    q = np.array([[3.0], [0.0], [4.0]])
    eig = solve_pod(hindcast_correlation(q))
    np.testing.assert_allclose(eig.eigenvalues, [25.0])
    np.testing.assert_allclose(hindcast_modes(q, eig, 1), q / 5.0, rtol=1e-15)


def test_zero_eigenvalue_rejected():
    with pytest.raises(RankError):
        hindcast_modes(np.eye(2), EigResult(np.array([1.0, 0.0]), np.eye(2)), 2)


def test_coefficients_modes_as_data():
    phi = np.linalg.qr(np.random.default_rng(0).standard_normal((8, 3)))[0]
    np.testing.assert_allclose(expansion_coefficients(phi, None, phi), np.eye(3), atol=1e-14)


def test_coefficients_rank_one():
    phi = np.array([[0.6], [0.8]])
    c = np.array([1.0, -2.0, 0.5])
    a = expansion_coefficients(phi, None, phi @ c[None, :])
    np.testing.assert_allclose(a, c[None, :], rtol=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_coefficient_identities(seed):
    ens = random_ensemble(seed, k=15, n=4, m=3, p=5)
    k = ens.k
    w = WeightVector(np.random.default_rng(seed).uniform(0.5, 2.0, 5))
    q = build_hindcast_matrix(ens)
    eig = truncate(solve_pod(hindcast_correlation(q, w)), k)
    phi = hindcast_modes(q, eig, k)
    a = expansion_coefficients(phi, w, q)
    a2 = np.sqrt(k) * np.sqrt(eig.eigenvalues)[:, None] * eig.eigenvectors.T
    assert rel(a, a2) <= 1e-9
    assert rel(a @ a.T / k, np.diag(eig.eigenvalues)) <= 1e-9


def test_stp_modes_degenerate_forecast_block(small_ensemble):
    q = build_hindcast_matrix(small_ensemble)
    eig = truncate(solve_pod(hindcast_correlation(q)), small_ensemble.k)
    np.testing.assert_array_equal(stp_modes(q, eig, small_ensemble.k),
                                  hindcast_modes(q, eig, small_ensemble.k))


def test_stp_mode_top_block(small_ensemble):
    k = small_ensemble.k
    q = build_hindcast_matrix(small_ensemble)
    eig = truncate(solve_pod(hindcast_correlation(q)), k)
    top = stp_modes(build_prediction_matrix(small_ensemble), eig, k)[: q.shape[0]]
    assert np.max(np.abs(top - hindcast_modes(q, eig, k))) <= 1e-14
    model = fit(small_ensemble)
    assert np.shares_memory(model.hindcast_modes, model.stp_modes)


def rank_one_ensemble(k=20, n=3, m=2, p=4, seed=0):
    rng = np.random.default_rng(seed)
    psi = rng.standard_normal((n + m) * p)
    c = rng.standard_normal(k)
    return centered(np.outer(c, psi), n, m, p), psi


def test_rank_one_stp_mode_and_forecast():
    ens, psi = rank_one_ensemble()
    h = ens.horizon
    model = fit(ens, 1)
    mode = model.stp_modes[:, 0]
    cos = abs(mode @ psi) / (np.linalg.norm(mode) * np.linalg.norm(psi))
    assert cos == pytest.approx(1.0, abs=1e-14)
    cstar = 1.7
    pred = predict(model, cstar * psi[: h.hindcast_size])
    assert rel(pred.forecast, cstar * psi[h.hindcast_size:]) <= 1e-10
    assert fit(ens).rank == 1


# fit

def test_fit_full_then_truncated_share_leading_mode(small_ensemble):
    full = fit(small_ensemble)
    one = fit(small_ensemble, 1)
    assert one.eigenvalues[0] == full.eigenvalues[0]
    # same eigenpair; the mode matmul differs only by BLAS blocking
    np.testing.assert_allclose(one.stp_modes[:, 0], full.stp_modes[:, 0], rtol=1e-13, atol=1e-15)


def test_fit_rank_checks(small_ensemble):
    with pytest.raises(RankError):
        fit(small_ensemble, 0)
    with pytest.raises(RankError):
        fit(small_ensemble, small_ensemble.k + 1)
    with pytest.raises(RankError):
        fit(centered(np.zeros((3, 4)), 1, 1, 2))


def test_fit_records_effective_rank(small_ensemble):
    # centering removes one dimension: at most k-1 nonzero eigenvalues
    model = fit(small_ensemble)
    assert model.requested_rank == small_ensemble.k
    assert model.rank == small_ensemble.k - 1


@pytest.mark.parametrize("seed", range(4))
def test_orthonormality_weighted(seed):
    ens = random_ensemble(seed, k=30, n=5, m=4, p=6)
    w = WeightVector(np.random.default_rng(seed).uniform(0.1, 3.0, 6))
    model = fit(ens, w=w)
    phi = model.hindcast_modes
    wr = w.replicated(5)
    assert np.max(np.abs(phi.T @ (wr[:, None] * phi) - np.eye(model.rank))) <= 1e-10
    model.check()


@pytest.mark.parametrize("seed", range(4))
def test_svd_oracle_agrees_with_fit(seed):
    ens = random_ensemble(seed, k=20, n=3, m=2, p=10)
    w = np.random.default_rng(seed).uniform(0.5, 2, 10)
    model = fit(ens, w=WeightVector(w))
    q = build_hindcast_matrix(ens)
    s, _ = svd_oracle(np.sqrt(np.tile(w, 3))[:, None] * q / np.sqrt(ens.k))
    np.testing.assert_allclose(model.eigenvalues, s[: model.rank] ** 2, rtol=1e-9)


# projection and prediction

def test_project_basis_vectors(small_ensemble):
    model = fit(small_ensemble)
    for j in range(model.rank):
        a = project(model, model.hindcast_modes[:, j])
        np.testing.assert_allclose(a, np.eye(model.rank)[j], atol=1e-12)


def test_project_orthogonal_vector():
    ens, psi = rank_one_ensemble()
    model = fit(ens)
    phi = model.hindcast_modes[:, 0]
    v = np.random.default_rng(1).standard_normal(phi.size)
    v -= (v @ phi) * phi
    assert abs(project(model, v)[0]) <= 1e-14


def test_project_training_episode_gives_coefficients(small_ensemble):
    model = fit(small_ensemble)
    q = build_hindcast_matrix(small_ensemble)
    a = expansion_coefficients(model.hindcast_modes, None, q)
    for j in (0, 5):
        np.testing.assert_allclose(project(model, q[:, j]), a[:, j], rtol=1e-12, atol=1e-12)


def test_in_span_reconstruction(small_ensemble):
    model = fit(small_ensemble)
    for ep in small_ensemble.episodes:
        pred = predict(model, ep.hindcast)
        assert rel(pred.hindcast, ep.hindcast) <= 1e-8
        np.testing.assert_allclose(np.concatenate([pred.hindcast, pred.forecast]),
                                   model.stp_modes @ pred.coefficients, rtol=1e-12, atol=1e-14)


def test_zero_input_and_mean_handling():
    raw = random_ensemble(3, k=10, n=2, m=2, p=3, centered=False)
    ens, mean = center_transient(raw)
    model = fit(ens, mean=mean)
    h = model.horizon
    pred = predict(model, np.zeros(h.hindcast_size))
    assert np.all(pred.hindcast == 0) and np.all(pred.forecast == 0)
    pred = predict(model, np.zeros(h.hindcast_size), add_mean=True)
    np.testing.assert_array_equal(pred.forecast, mean.values[h.hindcast_size:])
    # raw input equal to the mean projects to zero
    pred = predict(model, mean.values[: h.hindcast_size], raw=True)
    assert np.max(np.abs(pred.coefficients)) <= 1e-14
    with pytest.raises(MissingMeanError):
        predict(fit(ens), np.zeros(h.hindcast_size), raw=True)
    with pytest.raises(DimensionError):
        predict(model, np.zeros(h.hindcast_size + 1))


def test_deterministic_map_exactness():
    rng = np.random.default_rng(9)
    n, m, p, k = 2, 3, 3, 20
    L = rng.standard_normal((m * p, n * p))
    qm = rng.standard_normal((k, n * p))
    ens, _ = center_transient(Ensemble(np.hstack([qm, qm @ L.T]), HorizonSpec(n, m, p)))
    model = fit(ens)
    q_new = rng.standard_normal(n * p)
    assert rel(predict(model, q_new).forecast, L @ q_new) <= 1e-8


def test_rank_monotone_hindcast_error(small_ensemble):
    full = fit(small_ensemble)
    q_new = np.random.default_rng(4).standard_normal(small_ensemble.horizon.hindcast_size)
    errs = [np.linalg.norm(q_new - predict(full.truncated(r), q_new).hindcast)
            for r in range(1, full.rank + 1)]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(errs, errs[1:]))


@given(alpha=st.floats(-1e3, 1e3, allow_nan=False).map(lambda a: round(a, 6)),
       seed=st.integers(0, 1000))
@settings(max_examples=40, deadline=None)
def test_predict_is_linear(alpha, seed):
    ens = random_ensemble(seed, k=8, n=2, m=2, p=3)
    model = fit(ens)
    q = np.random.default_rng(seed + 1).standard_normal(6)
    a = predict(model, alpha * q).trajectory
    b = alpha * predict(model, q).trajectory
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12 * max(1, abs(alpha)) * np.abs(b).max())


def test_model_check_catches_violations(small_ensemble):
    model = fit(small_ensemble)
    bad_eig = model.eigenvalues.copy()
    bad_eig[-1] = -1.0
    with pytest.raises(ModelInvariantError):
        STPModel(model.horizon, bad_eig, model.stp_modes, model.weights, model.k_train).check()
    with pytest.raises(ModelInvariantError):
        STPModel(model.horizon, model.eigenvalues, 2 * model.stp_modes, model.weights,
                 model.k_train).check()
