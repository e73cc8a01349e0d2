import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dalab.errors import ConfigurationError, DimensionError, SingularSystemError
from dalab.shallow import (IDENTITY, GeometricTransform, ShallowConfig, error_curve,
                           gen_two_class, perturb_transform, principal_basis,
                           ridge_objective_grad, run_shallow, subspace_align, weighted_ridge)


def test_transform_validation_and_inverse():
    with pytest.raises(SingularSystemError):
        GeometricTransform(np.ones((2, 2)), np.zeros(2))
    with pytest.raises(DimensionError):
        GeometricTransform(np.eye(3), np.zeros(3))
    T = GeometricTransform.from_params(40, (2, 0.5), 0.3, (1, -2))
    X = np.random.default_rng(0).normal(size=(5, 2))
    np.testing.assert_allclose(T.inverse()(T(X)), X, atol=1e-12)


def test_two_class_generator():
    X, y = gen_two_class(1, 20000, IDENTITY, offset=1.5)
    assert np.sum(y == 1) == np.sum(y == -1) == 10000
    np.testing.assert_allclose(X[y == 1].mean(axis=0), [1.5, 0], atol=0.05)
    np.testing.assert_allclose(X[y == -1].mean(axis=0), [-1.5, 0], atol=0.05)
    X2, y2 = gen_two_class(1, 20000, IDENTITY, offset=1.5)
    assert np.array_equal(X, X2) and np.array_equal(y, y2)
    assert set(np.unique(gen_two_class(0, 7)[1])) == {-1.0, 1.0}
    with pytest.raises(ConfigurationError):
        gen_two_class(0, 1)


def test_perturbation_norm():
    T = GeometricTransform.from_params(10, (1, 2))
    assert perturb_transform(T, 0.0, 3) is T
    a, b = perturb_transform(T, 0.37, 1), perturb_transform(T, 0.37, 2)
    assert np.linalg.norm(a.A - T.A, 2) == pytest.approx(0.37, abs=1e-9)
    assert np.linalg.norm(b.A - T.A, 2) == pytest.approx(0.37, abs=1e-9)
    assert not np.allclose(a.A, b.A)
    np.testing.assert_array_equal(a.t, T.t)
    with pytest.raises(ConfigurationError):
        perturb_transform(T, -0.1, 0)


def test_ridge_hand_solved():
    w = weighted_ridge(np.array([[1.0, 0.0]]), np.array([1.0]), np.zeros((0, 2)), np.zeros(0),
                       0.0, 1.0)
    np.testing.assert_allclose(w, [0.5, 0.0], atol=1e-15)


def test_ridge_ignores_source_at_alpha_one():
    rng = np.random.default_rng(0)
    fS, fT = rng.normal(size=(10, 2)), rng.normal(size=(6, 2))
    ys, yt = rng.choice([-1.0, 1.0], 10), rng.choice([-1.0, 1.0], 6)
    w1 = weighted_ridge(fS, ys, fT, yt, 1.0, 0.1)
    w2 = weighted_ridge(fS, -ys, fT, yt, 1.0, 0.1)
    np.testing.assert_array_equal(w1, w2)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0, 1), st.floats(1e-3, 10))
def test_ridge_optimality_and_dense_solve(seed, alpha, lam):
    rng = np.random.default_rng(seed)
    fS, fT = rng.normal(size=(12, 3)), rng.normal(size=(5, 3))
    ys, yt = rng.normal(size=12), rng.normal(size=5)
    w = weighted_ridge(fS, ys, fT, yt, alpha, lam)
    assert np.linalg.norm(ridge_objective_grad(w, fS, ys, fT, yt, alpha, lam)) <= 1e-8
    # stacked least squares with sqrt weights gives the same minimizer
    A = np.vstack([np.sqrt((1 - alpha) / 12) * fS, np.sqrt(alpha / 5) * fT, np.sqrt(lam) * np.eye(3)])
    b = np.concatenate([np.sqrt((1 - alpha) / 12) * ys, np.sqrt(alpha / 5) * yt, np.zeros(3)])
    w_ref = np.linalg.lstsq(A, b, rcond=None)[0]
    np.testing.assert_allclose(w, w_ref, atol=1e-10)


def test_ridge_singular_without_regularization():
    with pytest.raises(SingularSystemError):
        weighted_ridge(np.array([[1.0, 0.0]]), [1.0], np.array([[2.0, 0.0]]), [1.0], 0.5, 0.0)


def test_subspace_alignment_identical_data():
    X = np.random.default_rng(1).normal(size=(200, 3)) * [3, 2, 1]
    sa = subspace_align(X, X, 2)
    np.testing.assert_allclose(np.abs(sa.M), np.eye(2), atol=1e-9)


def test_subspace_alignment_recovers_rotation():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(500, 2)) * [3, 1]
    th = np.deg2rad(35)
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    Xt = X @ R.T
    sa = subspace_align(X, Xt, 2)
    # the target basis is the rotated source basis, up to column signs
    np.testing.assert_allclose(np.abs(sa.Ps.T @ R.T @ sa.Pt), np.eye(2), atol=1e-6)
    # aligned source features are the source points in target-basis coordinates
    np.testing.assert_allclose(sa.source(X), sa.target(X), atol=1e-6)


def test_subspace_alignment_projection_property():
    rng = np.random.default_rng(3)
    Xs, Xt = rng.normal(size=(100, 4)) * [4, 3, 2, 1], rng.normal(size=(80, 4)) * [1, 4, 2, 3]
    sa = subspace_align(Xs, Xt, 2)
    P = sa.Pt @ sa.Pt.T
    Z = sa.source(Xs) @ sa.Pt.T     # aligned features mapped back to input space
    np.testing.assert_allclose(Z @ P, Z, atol=1e-12)
    np.testing.assert_allclose(P @ P, P, atol=1e-12)


def test_subspace_alignment_rank_errors():
    with pytest.raises(DimensionError):
        subspace_align(np.ones((10, 2)), np.ones((10, 2)), 3)
    with pytest.raises(DimensionError):
        principal_basis(np.tile([1.0, 2.0], (10, 1)), 1)


def test_run_shallow_examples():
    easy = ShallowConfig(Ms=400, Mt=0, alpha=0.0, tau=0.0, offset=3.0, seed=1)
    assert run_shallow(easy) <= 0.05
    cfg = ShallowConfig(seed=7)
    assert run_shallow(cfg) == run_shallow(cfg)
    null = [run_shallow(ShallowConfig(seed=s, scramble_labels=True, Ms=400, Mt=400)) for s in range(20)]
    assert abs(np.mean(null) - 0.5) <= 0.05


def test_config_validation():
    for bad in (dict(Ms=500), dict(lam=-1), dict(tau=-0.1), dict(alpha=2)):
        with pytest.raises(ConfigurationError):
            ShallowConfig(**bad)


def test_error_curve_shape():
    rows = error_curve(ShallowConfig(), "Mt", [2, 8], trials=3, seed=0)
    assert [r[0] for r in rows] == [2, 8]
    assert all(len(r[3]) == 3 for r in rows)
    with pytest.raises(ConfigurationError):
        error_curve(ShallowConfig(), "lam", [1], 1)
