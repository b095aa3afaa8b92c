import math

import numpy as np
import pytest

from adasize import RiskSpec, empirical_loss_and_grad, loss_value, risk_value, \
    risk_value_and_grad, smoothness_constant
from adasize.erm import test_error as classification_error
from adasize.data import generate_synthetic, normalize, parse_sparse_text
from adasize.erm import EmptyViewError

# log1p(exp(-50)) at 40 decimal digits
LOGISTIC_AT_MARGIN_50 = 1.928749847963917783e-22


def test_logistic_at_origin_is_log2(small_train):
    w = np.zeros(small_train.dim)
    for i in (0, 7, 31):
        assert loss_value("logistic", w, small_train.sample(i)) == pytest.approx(math.log(2))


def test_logistic_large_margin_stable():
    ds = parse_sparse_text("+1 1:1\n")
    w = np.array([50.0])
    v = loss_value("logistic", w, ds.sample(0))
    assert 0.0 < v < 1e-20
    assert v == pytest.approx(LOGISTIC_AT_MARGIN_50, rel=1e-12)
    # the mirrored margin must not overflow either
    big = loss_value("logistic", np.array([-800.0]), ds.sample(0))
    assert big == pytest.approx(800.0, rel=1e-12)


def test_squared_exact_fit_is_zero():
    ds = parse_sparse_text("+1 1:0.5\n")
    assert loss_value("squared", np.array([2.0]), ds.sample(0)) == 0.0


def test_unknown_loss_rejected():
    with pytest.raises(ValueError):
        loss_value("hinge", np.zeros(1), parse_sparse_text("+1 1:1\n").sample(0))


def test_dimension_mismatch():
    ds = parse_sparse_text("+1 3:1\n")
    with pytest.raises(ValueError):
        loss_value("logistic", np.zeros(2), ds.sample(0))
    with pytest.raises(ValueError):
        empirical_loss_and_grad("logistic", np.zeros(2), ds.full_view())


def test_empirical_loss_at_origin(small_train):
    view = small_train.prefix(200)
    w = np.zeros(small_train.dim)
    value, grad = empirical_loss_and_grad("logistic", w, view)
    assert value == pytest.approx(math.log(2))
    expected = -(view.y @ view.x) / (2 * view.count)
    np.testing.assert_allclose(grad, np.asarray(expected).ravel(), rtol=1e-12)


def test_single_sample_view_matches_loss_value(small_train, rng):
    view = small_train.prefix(1)
    w = rng.uniform(-1, 1, small_train.dim)
    value, _ = empirical_loss_and_grad("logistic", w, view)
    assert value == pytest.approx(loss_value("logistic", w, small_train.sample(0)))


def test_gradient_matches_finite_differences(small_train, rng):
    view = small_train.prefix(64)
    for loss in ("logistic", "squared"):
        spec = RiskSpec(loss=loss, c=1.0, alpha=0.5, gamma=1.0, M=1.0)
        w = rng.uniform(-1, 1, small_train.dim)
        _, grad, _ = risk_value_and_grad(spec, w, view)
        h = 1e-6
        for j in rng.choice(small_train.dim, 4, replace=False):
            wp, wm = w.copy(), w.copy()
            wp[j] += h
            wm[j] -= h
            fd = (risk_value(spec, wp, view) - risk_value(spec, wm, view)) / (2 * h)
            assert fd == pytest.approx(grad[j], rel=1e-5, abs=1e-9)


def test_risk_at_origin_equals_loss(spec, small_train):
    view = small_train.prefix(100)
    w = np.zeros(small_train.dim)
    r, g, gnorm = risk_value_and_grad(spec, w, view)
    value, grad = empirical_loss_and_grad(spec.loss, w, view)
    assert r == value
    np.testing.assert_array_equal(g, grad)
    assert gnorm == pytest.approx(float(np.linalg.norm(grad)))


def test_regularizer_weight_matches_protocol(small_train, rng):
    # c=1, alpha=0.5, gamma=2, n=400: the ridge term is (1/sqrt(400)) ||w||^2
    spec = RiskSpec(loss="logistic", c=1.0, alpha=0.5, gamma=2.0, M=1.0)
    view = small_train.prefix(400)
    w = rng.uniform(-1, 1, small_train.dim)
    value, _ = empirical_loss_and_grad(spec.loss, w, view)
    reg = risk_value(spec, w, view) - value
    assert reg == pytest.approx(0.05 * float(w @ w), rel=1e-12)
    # quadratic homogeneity in w
    reg2 = risk_value(spec, 2 * w, view) - empirical_loss_and_grad(spec.loss, 2 * w, view)[0]
    assert reg2 == pytest.approx(4 * reg, rel=1e-12)


def test_smoothness_constant_modes(small_train):
    assert smoothness_constant("logistic", small_train, "paper_conservative") == 1.0
    assert smoothness_constant("logistic", small_train, "tight") == pytest.approx(0.25, rel=1e-12)
    ds = parse_sparse_text("+1 1:2\n-1 1:3\n")
    assert smoothness_constant("squared", ds, "tight") == pytest.approx(9.0)
    with pytest.raises(ValueError):
        smoothness_constant("logistic", small_train, "loose")


def test_strong_convexity_property(spec, small_train, rng):
    view = small_train.prefix(128)
    cv = spec.c * spec.gamma / math.sqrt(view.count)
    for _ in range(25):
        w1 = rng.uniform(-1, 1, small_train.dim)
        w2 = rng.uniform(-1, 1, small_train.dim)
        theta = rng.uniform(0.05, 0.95)
        mid = risk_value(spec, theta * w1 + (1 - theta) * w2, view)
        chord = theta * risk_value(spec, w1, view) + (1 - theta) * risk_value(spec, w2, view)
        gap = 0.5 * cv * theta * (1 - theta) * float(np.sum((w1 - w2) ** 2))
        assert mid <= chord - gap + 1e-9


def test_gradient_smoothness_property(small_train, rng):
    m_tight = smoothness_constant("logistic", small_train, "tight")
    spec = RiskSpec(loss="logistic", c=1.0, alpha=0.5, gamma=1.0, M=m_tight)
    view = small_train.prefix(128)
    lip = m_tight + spec.c * spec.gamma / math.sqrt(view.count)
    for _ in range(25):
        w1 = rng.uniform(-2, 2, small_train.dim)
        w2 = rng.uniform(-2, 2, small_train.dim)
        _, g1, _ = risk_value_and_grad(spec, w1, view)
        _, g2, _ = risk_value_and_grad(spec, w2, view)
        assert np.linalg.norm(g1 - g2) <= lip * np.linalg.norm(w1 - w2) + 1e-9


def test_averaging_consistency(small_train, rng):
    # loss over the first n samples is the sample-count-weighted average of
    # the first m and the next n-m
    w = rng.uniform(-1, 1, small_train.dim)
    m, n = 150, 400
    l_n, _ = empirical_loss_and_grad("logistic", w, small_train.prefix(n))
    l_m, _ = empirical_loss_and_grad("logistic", w, small_train.prefix(m))
    tail = small_train.prefix(n)
    margins = tail.x[m:] @ w
    tail_losses = np.logaddexp(0.0, -small_train.y[m:n] * margins)
    l_tail = float(tail_losses.mean())
    assert l_n == pytest.approx((m / n) * l_m + ((n - m) / n) * l_tail, rel=1e-12)


class TestTestError:
    def test_zero_weights_predict_plus_one(self, small_train):
        err = classification_error("logistic", np.zeros(small_train.dim), small_train)
        assert err == pytest.approx(float(np.mean(small_train.y == -1.0)))

    def test_perfect_classifier(self):
        ds = parse_sparse_text("+1 1:1\n-1 1:-1\n")
        assert classification_error("logistic", np.array([3.0]), ds) == 0.0

    def test_informative_weights_beat_chance(self):
        raw, w_true = generate_synthetic(2000, 10, 1.0, seed=21, margin_scale=2.5)
        # evaluate on the raw features that generated the labels
        assert classification_error("logistic", w_true, raw) < 0.5

    def test_empty_test_set_rejected(self, small_train):
        from adasize.data import shuffle_and_split

        _, empty = shuffle_and_split(small_train, small_train.n_samples, seed=0)
        with pytest.raises(EmptyViewError):
            classification_error("logistic", np.zeros(small_train.dim), empty)
