import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crashml.dataset import FeatureMatrix, one_hot_encode
from crashml.errors import ModelStateError, ShapeError, TrainingError
from crashml.svm import (
    KernelSpec,
    SmoParams,
    SvmModel,
    decision_value,
    dual_objective,
    kkt_residuals,
    platt_calibrate,
    sigmoid_proba,
    svm_predict_proba,
    train_smo,
    train_svm,
)

from conftest import random_dataset


def fm(X, y):
    return FeatureMatrix(np.asarray(X, dtype=float), np.asarray(y), {})


def separable(seed, n=None, d=None):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(10, 201))
    d = d or int(rng.integers(2, 8))
    w = rng.normal(size=d)
    X = rng.normal(size=(4 * n, d))
    s = X @ w
    keep = np.abs(s) > 0.3 * np.linalg.norm(w)
    X, s = X[keep][:n], s[keep][:n]
    y = np.where(s > 0, 1, -1)
    if len(set(y)) < 2:
        y[0] = -y[0]
        X[0] = -X[0]
    return X, y


def test_two_point_maximal_margin():
    X = np.eye(4)[:2]
    model = train_smo(fm(X, [1, -1]), SmoParams(C=1e6), calibrate=False)
    alphas = model.train_alphas
    assert alphas[0] == pytest.approx(alphas[1])
    assert alphas[0] == pytest.approx(1.0, abs=1e-6)
    w = (model.alphas * model.labels) @ model.support_rows
    assert np.allclose(w, alphas[0] * (X[0] - X[1]))
    assert abs(decision_value(model, (X[0] + X[1]) / 2)) <= 1e-6
    assert decision_value(model, X[0]) == pytest.approx(1.0, abs=1e-3)
    assert decision_value(model, X[1]) == pytest.approx(-1.0, abs=1e-3)


@pytest.mark.parametrize("seed", range(20))
def test_kkt_on_random_separable(seed):
    X, y = separable(seed)
    params = SmoParams(C=100.0)
    model = train_smo(fm(X, y), params, seed=seed, calibrate=False)
    assert model.converged
    a = model.train_alphas
    assert (a >= 0).all() and (a <= params.C).all()
    assert abs(float(a @ y)) <= 1e-8
    f = model.decision_function(X)
    assert kkt_residuals(a, y, f, params.C).max() <= params.tol
    assert np.array_equal(np.sign(f), y)


def test_debug_mode_checks_dual_ascent():
    X, y = separable(3, n=40)
    model = train_smo(fm(X, y), SmoParams(C=1.0), debug=True, calibrate=False)
    a = model.train_alphas
    assert dual_objective(a, y.astype(float), X @ X.T) > 0


def test_soft_margin_kkt_on_overlapping_data(planted_small):
    feats = one_hot_encode(planted_small)
    model = train_smo(feats, SmoParams(), seed=4)
    a = model.train_alphas
    f = model.decision_function(feats)
    assert model.converged
    assert kkt_residuals(a, feats.y, f, 1.0).max() <= 1e-3
    assert abs(float(a @ feats.y)) <= 1e-8


def test_duplicated_rows_same_decision_function():
    X, y = separable(5, n=60, d=4)
    one = train_smo(fm(X, y), SmoParams(C=1e4), calibrate=False)
    two = train_smo(fm(np.vstack([X, X]), np.concatenate([y, y])), SmoParams(C=1e4), calibrate=False)
    probe = np.random.default_rng(0).normal(size=(50, 4))
    assert np.allclose(one.decision_function(probe), two.decision_function(probe), atol=2e-2)


def test_decision_value_equals_explicit_sum():
    X, y = separable(7, n=50, d=3)
    model = train_smo(fm(X, y), SmoParams(C=10.0), calibrate=False)
    for x in np.random.default_rng(1).normal(size=(20, 3)):
        direct = sum(a * l * float(s @ x) for a, l, s in zip(model.alphas, model.labels, model.support_rows)) + model.bias
        assert decision_value(model, x) == pytest.approx(direct, abs=1e-10)


def test_on_margin_support_vector():
    X, y = separable(11, n=80, d=3)
    model = train_smo(fm(X, y), SmoParams(C=100.0), calibrate=False)
    a = model.train_alphas
    free = (a > 0) & (a < 100.0)
    assert free.any()
    f = model.decision_function(X[free])
    assert np.all(np.abs(y[free] * f - 1.0) <= 1e-3)


def test_polynomial_kernel_fits_xor():
    X = np.array([[1, 0, 1, 0], [0, 1, 0, 1], [1, 0, 0, 1], [0, 1, 1, 0]], dtype=float)
    y = np.array([1, 1, -1, -1])
    model = train_smo(fm(X, y), SmoParams(C=100.0), KernelSpec("polynomial", 2, 1.0), calibrate=False)
    assert np.array_equal(np.sign(model.decision_function(X)), y)
    with pytest.raises(ValueError):
        KernelSpec("rbf")


def test_errors_and_state():
    with pytest.raises(TrainingError):
        train_smo(fm(np.eye(3), [1, 1, 1]))
    with pytest.raises(ValueError):
        SmoParams(C=0)
    model = train_smo(fm(np.eye(3)[:2], [1, -1]), calibrate=False)
    with pytest.raises(ModelStateError):
        model.predict_proba(np.eye(3)[:1])
    with pytest.raises(ShapeError):
        decision_value(model, np.ones(5))


def test_iteration_cap_sets_flag(planted_small):
    model = train_smo(one_hot_encode(planted_small), SmoParams(max_iter=5), calibrate=False)
    assert not model.converged
    assert model.n_updates == 5


def test_seed_determinism(planted_small):
    a = train_svm(planted_small, seed=3)
    b = train_svm(planted_small, seed=3)
    assert a.to_dict() == b.to_dict()
    c = train_svm(planted_small, seed=4)
    # different pair order, same optimum within tolerance
    assert np.allclose(a.decision_function(planted_small), c.decision_function(planted_small), atol=0.05)


def test_platt_separated_values():
    f = np.array([-3.0, -2.0, -1.5, -1.0, 1.0, 1.5, 2.0, 3.0])
    y = np.array([-1, -1, -1, -1, 1, 1, 1, 1])
    A, B = platt_calibrate(f, y)
    assert A < 0
    p = sigmoid_proba(f, A, B)
    ll = -np.mean(np.where(y > 0, np.log(p), np.log(1 - p)))
    assert ll < math.log(2)


def test_platt_symmetric_b_is_zero():
    f = np.array([-1.0, 1.0] * 10)
    y = np.array([-1, 1] * 9 + [1, -1])
    _, B = platt_calibrate(f, y)
    assert abs(B) < 1e-8


def test_platt_reaches_gradient_tolerance():
    rng = np.random.default_rng(2)
    f = rng.normal(size=3000)
    y = np.where(rng.random(3000) < 1 / (1 + np.exp(-2 * f)), 1, -1)
    A, B = platt_calibrate(f, y)
    n_pos, n_neg = (y > 0).sum(), (y < 0).sum()
    t = np.where(y > 0, (n_pos + 1) / (n_pos + 2), 1 / (n_neg + 2))
    p = sigmoid_proba(f, A, B)
    assert math.hypot(float(np.sum(f * (t - p))), float(np.sum(t - p))) <= 1e-6
    assert A == pytest.approx(-2.0, abs=0.2)


@settings(max_examples=40, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.lists(st.floats(-50, 50), min_size=2, max_size=30))
def test_sigmoid_monotone_and_bounded(A, B, values):
    f = np.sort(np.array(values))
    p = sigmoid_proba(f, A, B)
    assert ((p >= 0) & (p <= 1)).all()
    d = np.diff(p)
    assert (d <= 1e-15).all() if A > 0 else (d >= -1e-15).all()


def test_predict_proba_matches_sigmoid(planted_small):
    model = train_svm(planted_small, seed=1)
    A, B = model.calibration
    X = one_hot_encode(planted_small).X[:20]
    for x in X:
        p0, p1 = svm_predict_proba(model, x)
        expected = 1 / (1 + math.exp(A * decision_value(model, x) + B))
        assert p1 == pytest.approx(expected, abs=1e-12)
        assert p0 + p1 == pytest.approx(1.0, abs=1e-12)
    zero = SvmModel(np.zeros(0), np.zeros(0), np.zeros((0, 3)), 0.0, KernelSpec(), 1.0, (-1.0, 0.0))
    assert zero.predict_proba(np.zeros((1, 3)))[0, 1] == 0.5
    assert svm_predict_proba(SvmModel(np.zeros(0), np.zeros(0), np.zeros((0, 1)), 1e6, KernelSpec(), 1.0, (-1.0, 0.0)), [0.0])[1] == pytest.approx(1.0)


def test_serialisation_round_trip(planted_small):
    model = train_svm(planted_small, seed=2)
    back = SvmModel.from_dict(model.to_dict(), planted_small.schema)
    assert np.array_equal(back.predict_proba(planted_small), model.predict_proba(planted_small))


def test_learns_planted_signal():
    ds = random_dataset(400, 100, seed=4)
    codes = ds.codes.copy()
    codes[:, 5] = np.where(ds.labels == 1, 2, 0)
    from crashml.dataset import Dataset

    sep = Dataset(ds.schema, codes, ds.labels)
    model = train_svm(sep, SmoParams(C=10.0))
    assert (np.sign(model.decision_function(sep)) == np.where(sep.labels == 1, 1, -1)).all()
