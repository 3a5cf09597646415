import math

import numpy as np
import pytest

from rangegen.errors import ConfigurationError, TrainingFault, UsageError
from rangegen.netcore import (
    Adam,
    BatchNorm,
    CondBatchNorm,
    Dense,
    effective_learning_rate,
    grad_check,
    selu,
    selu_deriv,
)
from rangegen.netcore.checkpoint import (
    array_from_doc,
    array_to_doc,
    load_document,
    save_document,
)


def naive_linear(x, w, b):
    # independent triple-loop oracle
    n, d_in = x.shape
    d_out = w.shape[0]
    out = np.zeros((n, d_out))
    for i in range(n):
        for o in range(d_out):
            acc = b[o]
            for k in range(d_in):
                acc += w[o, k] * x[i, k]
            out[i, o] = acc
    return out


class TestDense:
    def test_identity_weights(self):
        layer = Dense(2, 2, np.random.default_rng(0))
        layer.params["w"][...] = np.eye(2)
        layer.params["b"][...] = 0.0
        out = layer.forward(np.array([[1.0, 0.0], [0.0, 1.0]]))
        np.testing.assert_array_equal(out, np.eye(2))

    def test_zero_input_passes_bias(self):
        layer = Dense(2, 2, np.random.default_rng(1))
        layer.params["b"][...] = [3.0, -1.0]
        out = layer.forward(np.zeros((1, 2)))
        np.testing.assert_allclose(out, [[3.0, -1.0]])

    def test_matches_naive_multiply(self):
        rng = np.random.default_rng(2)
        layer = Dense(5, 4, rng)
        x = rng.normal(size=(7, 5))
        expected = naive_linear(x, layer.params["w"], layer.params["b"])
        np.testing.assert_allclose(layer.forward(x), expected, atol=1e-12)

    def test_shape_mismatch_rejected(self):
        layer = Dense(3, 2, np.random.default_rng(0))
        with pytest.raises(ConfigurationError):
            layer.forward(np.zeros((4, 5)))


class TestSelu:
    def test_zero_boundary(self):
        assert selu(np.array(0.0)) == 0.0

    def test_positive_scale(self):
        assert math.isclose(float(selu(np.array(1.0))), 1.05070098, rel_tol=1e-9)

    def test_negative_branch_arithmetic(self):
        lam, alpha = 1.05070098, 1.67326324
        expected = lam * alpha * (math.exp(-1.0) - 1.0)
        assert math.isclose(float(selu(np.array(-1.0))), expected, rel_tol=1e-9)
        assert math.isclose(expected, -1.11133, abs_tol=5e-6)

    def test_continuous_and_monotone(self):
        xs = np.linspace(-6, 6, 2001)
        ys = selu(xs)
        assert np.all(np.diff(ys) >= 0)
        assert abs(float(selu(np.array(1e-12))) - float(selu(np.array(-1e-12)))) < 1e-10

    def test_deriv_matches_fd(self):
        xs = np.array([-2.0, -0.5, 0.3, 1.7])
        eps = 1e-6
        fd = (selu(xs + eps) - selu(xs - eps)) / (2 * eps)
        np.testing.assert_allclose(selu_deriv(xs), fd, atol=1e-8)


class TestBatchNorm:
    def test_zero_cbn_weights_reduce_to_plain_bn(self):
        rng = np.random.default_rng(3)
        h = rng.normal(2.0, 3.0, size=(16, 5))
        bn = BatchNorm(5)
        cbn = CondBatchNorm(5, 4)
        cond = rng.uniform(size=4)
        np.testing.assert_allclose(cbn.forward(h, cond, train=True),
                                   bn.forward(h, train=True), atol=1e-12)

    def test_constant_column_is_epsilon_floored(self):
        h = np.ones((8, 3)) * 4.2
        bn = BatchNorm(3)
        out = bn.forward(h, train=True)
        np.testing.assert_allclose(out, np.zeros_like(h), atol=1e-12)

    def test_train_statistics_match_cond_mapping(self):
        rng = np.random.default_rng(4)
        h = rng.normal(1.0, 2.0, size=(512, 6))
        cbn = CondBatchNorm(6, 2)
        cbn.params["wg"][...] = rng.normal(0, 0.3, size=(6, 2))
        cbn.params["wb"][...] = rng.normal(0, 0.3, size=(6, 2))
        cond = np.array([0.3, 0.8])
        out = cbn.forward(h, cond, train=True)
        gamma = cbn.params["wg"] @ cond + 1.0
        beta = cbn.params["wb"] @ cond
        np.testing.assert_allclose(out.mean(axis=0), beta, atol=1e-6)
        np.testing.assert_allclose(out.std(axis=0), np.abs(gamma), atol=1e-3)

    def test_train_mode_needs_two_samples(self):
        bn = BatchNorm(2)
        with pytest.raises(UsageError):
            bn.forward(np.ones((1, 2)), train=True)

    def test_eval_mode_is_per_sample(self):
        rng = np.random.default_rng(5)
        bn = BatchNorm(4)
        for _ in range(3):
            bn.forward(rng.normal(size=(32, 4)), train=True)
        x = rng.normal(size=(10, 4))
        batched = bn.forward(x, train=False)
        single = np.vstack([bn.forward(x[i:i + 1], train=False) for i in range(10)])
        np.testing.assert_allclose(batched, single, atol=1e-12)


class TestAdam:
    def test_initial_effective_lr(self):
        assert effective_learning_rate(1e-4, 0.8, 5000, 0) == 1e-4

    def test_decayed_effective_lr(self):
        assert math.isclose(effective_learning_rate(1e-4, 0.8, 5000, 5000), 0.8e-4)
        assert math.isclose(effective_learning_rate(1e-4, 0.8, 5000, 4999), 1e-4)

    def test_zero_gradients_fixed_point(self):
        p = np.array([1.0, -2.0, 3.0])
        adam = Adam([p], 1e-2)
        adam.step([np.zeros(3)])
        np.testing.assert_array_equal(p, [1.0, -2.0, 3.0])

    def test_nonfinite_gradient_faults(self):
        p = np.zeros(2)
        adam = Adam([p], 1e-3)
        with pytest.raises(TrainingFault):
            adam.step([np.array([1.0, np.nan])])

    def test_matches_reference_update(self):
        # one hand-computed Adam step
        p = np.array([1.0])
        g = np.array([0.5])
        adam = Adam([p], base_lr=0.1, beta1=0.9, beta2=0.999, epsilon=1e-8)
        adam.step([g])
        m_hat = (0.1 * 0.5) / (1 - 0.9)
        v_hat = (0.001 * 0.25) / (1 - 0.999)
        expected = 1.0 - 0.1 * m_hat / (math.sqrt(v_hat) + 1e-8)
        assert math.isclose(p[0], expected, rel_tol=1e-12)

    def test_step_is_reproducible(self):
        def run():
            rng = np.random.default_rng(9)
            p = rng.normal(size=5)
            adam = Adam([p], 1e-3, 0.9, 10)
            for _ in range(25):
                adam.step([rng.normal(size=5)])
            return p
        np.testing.assert_array_equal(run(), run())


class TestGradCheck:
    def test_quadratic_exact(self):
        w = np.array([3.0])

        def loss_and_grads():
            return float(w[0] ** 2), [2.0 * w]

        assert grad_check(loss_and_grads, [w], eps=1e-5) < 1e-8

    def test_detects_wrong_gradient(self):
        w = np.array([3.0])

        def wrong():
            return float(w[0] ** 2), [3.0 * w]

        assert grad_check(wrong, [w], eps=1e-5) > 0.1


class TestCheckpoint:
    def test_array_round_trip_is_lossless(self, tmp_path):
        rng = np.random.default_rng(11)
        a = rng.normal(size=(3, 4)) * np.pi
        doc = array_to_doc(a)
        back = array_from_doc(doc)
        np.testing.assert_array_equal(a, back)

    def test_document_round_trip(self, tmp_path):
        payload = {"arrays": {"w": array_to_doc(np.array([[1.0, 2.0e-17]]))}, "t": 5}
        path = tmp_path / "ckpt.json"
        save_document(path, payload)
        doc = load_document(path)
        np.testing.assert_array_equal(array_from_doc(doc["arrays"]["w"]),
                                      [[1.0, 2.0e-17]])
        assert doc["t"] == 5

    def test_version_check(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"format_version": 99}')
        with pytest.raises(ConfigurationError):
            load_document(path)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ConfigurationError):
            array_from_doc({"shape": [2, 2], "data": [1.0, 2.0, 3.0]})
