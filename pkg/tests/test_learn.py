import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from botamp.errors import ValidationError
from botamp.features import FEATURE_COLUMNS, FeatureMatrix, assemble_features
from botamp.learn import (
    DEFAULT_K, KnnModel, LogisticHyper, LogisticModel, SplitSpec, SvmHyper, SvmModel, feature_importance,
    hinge_objective, knn_predict, load_model, logistic_predict, predict, save_model, split_indices,
    svm_predict, train_knn, train_logistic, train_svm, upsample_indices,
)
from botamp.scoring import label_articles
from botamp.synth import SynthConfig, generate_dataset


def matrix(X, y) -> FeatureMatrix:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    pad = np.zeros((X.shape[0], 6 - X.shape[1]))
    return FeatureMatrix(np.hstack([X, pad]), np.asarray(y, dtype=bool), FEATURE_COLUMNS, {}, (0.0, 1.0))


def test_split_counts():
    tr, te = split_indices(np.zeros(10, bool), SplitSpec(0.7, 1, stratified=False))
    assert (len(tr), len(te)) == (7, 3)
    y = np.array([False] * 80 + [True] * 20)
    tr, te = split_indices(y, SplitSpec(0.7, 5))
    assert (np.sum(~y[tr]), np.sum(y[tr])) == (56, 14)
    assert sorted(np.concatenate([tr, te]).tolist()) == list(range(100))
    again = split_indices(y, SplitSpec(0.7, 5))
    assert np.array_equal(tr, again[0]) and np.array_equal(te, again[1])


def test_split_errors():
    with pytest.raises(ValidationError):
        split_indices(np.array([True] + [False] * 9), SplitSpec(0.7, 0))
    with pytest.raises(ValidationError):
        SplitSpec(1.0)


def test_upsample_examples():
    y = np.array([False] * 85 + [True] * 15)
    up = y[upsample_indices(y, 3)]
    assert (np.sum(~up), np.sum(up)) == (85, 85)
    even = np.array([False, True] * 5)
    assert upsample_indices(even, 3).tolist() == list(range(10))
    with pytest.raises(ValidationError):
        upsample_indices(np.ones(4, bool), 0)


def test_upsample_full_scale_counts():
    y = np.zeros(1_196_328 + 201_679, dtype=bool)
    y[:201_679] = True
    up = y[upsample_indices(y, 9)]
    assert int(up.sum()) == 1_196_328 and int((~up).sum()) == 1_196_328


def test_logistic_zero_model_and_saturation():
    zero = LogisticModel(np.zeros(6), 0.0)
    p, lab = logistic_predict(zero, np.ones((3, 6)))
    assert p.tolist() == [0.5] * 3 and not lab.any()
    p, lab = logistic_predict(LogisticModel(np.zeros(6), 20.0), np.ones((1, 6)))
    assert p[0] >= 1 - 1e-8 and lab[0]
    assert not logistic_predict(LogisticModel(np.zeros(6), -20.0), np.ones((1, 6)))[1][0]
    with pytest.raises(ValidationError):
        logistic_predict(zero, np.ones((1, 5)))


def test_logistic_separable_and_monotone_loss():
    m = matrix([0.0] * 50 + [1.0] * 50, [False] * 50 + [True] * 50)
    model = train_logistic(m)
    assert len(model.losses) <= 501
    assert np.all(np.diff(model.losses) <= 0)
    assert np.mean(logistic_predict(model, m)[1] == m.y) == 1.0


def test_knn_examples():
    with pytest.raises(ValidationError):
        train_knn(matrix([0.0, 1.0], [True, False]), 3)
    m = matrix([0.0, 1.0], [True, False])
    assert np.array_equal(train_knn(m, 1).X, m.X)
    assert train_knn(matrix(np.zeros(40), [True, False] * 20)).k == DEFAULT_K == 34
    s, lab = knn_predict(train_knn(m, 1), matrix([0.1], [False]).X)
    assert lab.tolist() == [True]
    model = train_knn(matrix([0.0, 0.1, 0.2, 0.9], [True, True, False, False]), 3)
    s, lab = knn_predict(model, matrix([0.05], [False]).X)
    assert s[0] == pytest.approx(2 / 3) and lab[0]
    s, lab = knn_predict(train_knn(m, 2), matrix([0.5], [False]).X)
    assert s[0] == 0.5 and not lab[0]


def test_svm_examples():
    X = np.array([[1.0, 0, 0, 0, 0, 0], [0.5, 0, 0, 0, 0, 0], [0, 1.0, 0, 0, 0, 0], [0, 0, 0, 0, 0, 0]])
    y = np.array([True, True, False, False])
    w, b = np.array([1.0, -1.0, 0, 0, 0, 0]), 0.5
    # margins: 1.5, 1.0, -0.5, 0.5; hinge terms 0, 0, 0.5, 1.5
    obj, _, _ = hinge_objective(X, y, w, b, 0.0)
    assert obj == pytest.approx((0 + 0 + 0.5 + 1.5) / 4, abs=1e-15)
    obj, _, _ = hinge_objective(X, y, w, b, 0.2)
    assert obj == pytest.approx(0.5 + 0.1 * 2, abs=1e-15)
    assert hinge_objective(X, y, np.zeros(6), 0.0)[0] == 1.0

    zero = SvmModel(np.zeros(6), 0.0)
    assert not svm_predict(zero, X)[1].any()
    assert svm_predict(SvmModel(np.zeros(6), 3.2), X[:1])[1][0]
    assert not svm_predict(SvmModel(np.zeros(6), -0.001), X[:1])[1][0]


def test_svm_separable():
    m = matrix([0.0] * 50 + [1.0] * 50, [False] * 50 + [True] * 50)
    model = train_svm(m)
    assert np.mean(svm_predict(model, m)[1] == m.y) == 1.0
    assert model.objectives[0] == 1.0


def test_importance_single_round_equals_fit():
    rng = np.random.default_rng(0)
    m = matrix(rng.random((60, 6)), rng.random(60) < 0.5)
    hyper = LogisticHyper(epochs=50)
    assert np.array_equal(feature_importance(m, 1, hyper=hyper), train_logistic(m, hyper).weights)


def test_importance_constant_column_near_zero():
    rng = np.random.default_rng(1)
    X = rng.random((80, 6))
    X[:, 3] = 0.0
    m = matrix(X, X[:, 0] > 0.5)
    coef = feature_importance(m, 11, seed=2, hyper=LogisticHyper(epochs=100, l2=1e-4))
    assert abs(coef[3]) <= 1e-6


def test_importance_finds_planted_column():
    cfg = SynthConfig(n_articles=4000, seed=7, signal=1.0, planted_weights=(10.0, 0, 0, 0, 0, 0))
    ds = generate_dataset(cfg)
    m = assemble_features(label_articles(ds.articles, ds.store).articles)
    coef = feature_importance(m.subset(upsample_indices(m.y, 1)), 11, seed=3, hyper=LogisticHyper(epochs=200))
    assert np.argmax(np.abs(coef)) == 0 and coef[0] > 0


def test_planted_signs_recovered():
    cfg = SynthConfig(n_articles=6000, seed=11, signal=1.0)
    ds = generate_dataset(cfg)
    m = assemble_features(label_articles(ds.articles, ds.store).articles)
    coef = feature_importance(m.subset(upsample_indices(m.y, 1)), 11, seed=3, hyper=LogisticHyper(epochs=200))
    for planted, got in zip(ds.planted_weights, coef):
        if planted:
            assert math.copysign(1, planted) == math.copysign(1, got)


@pytest.mark.parametrize("kind", ["lr", "knn", "svm"])
def test_model_file_round_trip(tmp_path, kind):
    rng = np.random.default_rng(4)
    m = matrix(rng.random((50, 6)), rng.random(50) < 0.4)
    model = {"lr": lambda: train_logistic(m, LogisticHyper(epochs=20)), "knn": lambda: train_knn(m, 5),
             "svm": lambda: train_svm(m, SvmHyper(epochs=20))}[kind]()
    save_model(tmp_path / "m.json", model, seed=1)
    again, meta = load_model(tmp_path / "m.json")
    assert meta["kind"] == kind
    a, b = predict(model, m), predict(again, m)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


@given(st.lists(st.booleans(), min_size=2, max_size=60).filter(lambda v: 0 < sum(v) < len(v)),
       st.integers(0, 2**32))
def test_upsample_conservation(labels, seed):
    y = np.array(labels)
    X = np.arange(len(y), dtype=float)
    idx = upsample_indices(y, seed)
    yy = y[idx]
    assert yy.sum() == (~yy).sum()
    minority = y.sum() < (~y).sum()
    kept = X[idx][yy == minority]
    assert set(kept.tolist()) <= set(X[y == minority].tolist())
    majority_rows = X[idx][yy != minority]
    assert majority_rows.tobytes() == X[y != minority].tobytes()


@given(st.integers(4, 200), st.integers(0, 2**32))
def test_split_and_predict_deterministic(n, seed):
    rng = np.random.default_rng(seed)
    y = np.array([True, False] * 2 + list(rng.random(n - 4) < 0.3))
    assert all(np.array_equal(a, b) for a, b in zip(split_indices(y, SplitSpec(0.7, seed)),
                                                    split_indices(y, SplitSpec(0.7, seed))))
    model = KnnModel(rng.random((n, 6)), y, 3)
    Q = rng.random((5, 6))
    assert knn_predict(model, Q)[0].tobytes() == knn_predict(model, Q)[0].tobytes()
