import numpy as np
import pytest

from s3fn.errors import ConfigError, DataError, FormatError, ShapeError
from s3fn.nn import (
    AdamState,
    LayerParams,
    adam_step,
    avgpool3d_backward,
    avgpool3d_forward,
    check_tensor4,
    conv3d_forward,
    cross_entropy,
    dense_forward,
    dropout_forward,
    init_adam,
    l2_penalty,
    load_params,
    relu_forward,
    save_params,
    softmax,
)

from oracle_utils import avgpool3d_reference, conv3d_reference


class TestTensorValidation:
    def test_accepts_and_casts(self):
        out = check_tensor4(np.ones((1, 2, 2, 2, 3), dtype=np.float32))
        assert out.dtype == np.float64

    def test_wrong_rank(self):
        with pytest.raises(ShapeError):
            check_tensor4(np.ones((2, 2, 2)))

    def test_non_finite(self):
        bad = np.ones((1, 2, 2, 2, 1))
        bad[0, 0, 0, 0, 0] = np.nan
        with pytest.raises(DataError):
            check_tensor4(bad)


class TestConv3d:
    def test_zero_weights_bias_only(self):
        x = np.random.default_rng(0).standard_normal((2, 4, 4, 3, 2))
        params = LayerParams(np.zeros((3, 3, 3, 2, 5)), np.arange(5.0))
        y, _ = conv3d_forward(x, params)
        assert np.allclose(y, np.arange(5.0))

    def test_delta_kernel_is_identity(self):
        x = np.random.default_rng(1).standard_normal((1, 5, 5, 4, 2))
        w = np.zeros((3, 3, 3, 2, 2))
        w[1, 1, 1, 0, 0] = w[1, 1, 1, 1, 1] = 1.0
        y, _ = conv3d_forward(x, LayerParams(w, np.zeros(2)))
        assert np.allclose(y, x)

    def test_matches_shift_accumulate_oracle(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((2, 6, 5, 4, 3))
        w = rng.standard_normal((3, 3, 3, 3, 4))
        b = rng.standard_normal(4)
        y, _ = conv3d_forward(x, LayerParams(w, b))
        assert np.allclose(y, conv3d_reference(x, w, b), atol=1e-10)

    def test_channel_mismatch(self):
        x = np.zeros((1, 4, 4, 4, 3))
        with pytest.raises(ShapeError):
            conv3d_forward(x, LayerParams(np.zeros((3, 3, 3, 2, 4)), np.zeros(4)))


class TestAvgPool3d:
    def test_block_of_ones(self):
        y, _ = avgpool3d_forward(np.ones((1, 2, 2, 2, 1)), 2)
        assert y.shape == (1, 1, 1, 1, 1)
        assert y.ravel()[0] == 1.0

    def test_mixed_block_mean(self):
        x = np.array([0, 0, 0, 0, 8, 8, 8, 8], dtype=float).reshape(1, 2, 2, 2, 1)
        y, _ = avgpool3d_forward(x, 2)
        assert y.ravel()[0] == 4.0

    def test_backward_distributes_eighth(self):
        x = np.random.default_rng(3).standard_normal((1, 2, 2, 2, 1))
        _, cache = avgpool3d_forward(x, 2)
        dx = avgpool3d_backward(np.ones((1, 1, 1, 1, 1)), cache)
        assert np.allclose(dx, 0.125)

    def test_truncates_remainder(self):
        x = np.random.default_rng(4).standard_normal((1, 5, 5, 3, 2))
        y, cache = avgpool3d_forward(x, 2)
        assert y.shape == (1, 2, 2, 1, 2)
        assert np.allclose(y, avgpool3d_reference(x, 2))
        dx = avgpool3d_backward(np.ones_like(y), cache)
        assert np.allclose(dx[:, 4, :, :, :], 0.0)  # truncated row gets no grad

    def test_window_clamped_to_short_dim(self):
        x = np.random.default_rng(5).standard_normal((1, 4, 4, 1, 2))
        y, _ = avgpool3d_forward(x, 2)
        assert y.shape == (1, 2, 2, 1, 2)
        assert np.allclose(y, avgpool3d_reference(x, 2))

    def test_window_larger_than_every_dim(self):
        with pytest.raises(ShapeError):
            avgpool3d_forward(np.ones((1, 2, 2, 2, 1)), 3)


class TestDense:
    def test_identity(self):
        params = LayerParams(np.eye(3), np.zeros(3))
        y, _ = dense_forward(np.array([1.0, -2.0, 3.0]), params)
        assert np.allclose(y, [1.0, -2.0, 3.0])

    def test_tiny_example(self):
        y, _ = dense_forward(np.array([3.0]), LayerParams([[2.0]], [1.0]))
        assert y[0] == 7.0

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            dense_forward(np.ones(4), LayerParams(np.ones((2, 3)), np.zeros(2)))


class TestActivations:
    def test_relu(self):
        y, _ = relu_forward(np.array([-1.0, 0.0, 2.0]))
        assert np.array_equal(y, [0.0, 0.0, 2.0])

    def test_dropout_eval_is_identity(self):
        x = np.random.default_rng(6).standard_normal(100)
        y, keep = dropout_forward(x, 0.9, training=False)
        assert keep is None
        assert np.array_equal(y, x)

    def test_dropout_preserves_expectation(self):
        # Monte-Carlo: mean over 1e5 seeded draws of a constant-1 vector
        rng = np.random.default_rng(7)
        total = 0.0
        n = 100_000
        x = np.ones(16)
        for _ in range(n // 100):
            y, _ = dropout_forward(np.ones(100 * 16).reshape(100, 16), 0.5, True, rng)
            total += y.mean() * 100
        assert total / n == pytest.approx(1.0, abs=0.02)

    def test_dropout_rate_range(self):
        with pytest.raises(ConfigError):
            dropout_forward(np.ones(3), 1.0, True, np.random.default_rng(0))

    def test_dropout_needs_rng_when_training(self):
        with pytest.raises(ConfigError):
            dropout_forward(np.ones(3), 0.5, True, None)


class TestSoftmaxCrossEntropy:
    def test_symmetric_logits(self):
        assert np.allclose(softmax(np.zeros(2)), [0.5, 0.5])

    def test_shift_invariance(self):
        rng = np.random.default_rng(8)
        s = rng.standard_normal(7)
        assert np.allclose(softmax(s), softmax(s + 123.456), atol=1e-9)

    def test_no_overflow_on_huge_logits(self):
        p = softmax(np.array([1000.0, 0.0]))
        assert p[0] == pytest.approx(1.0)
        assert p[1] == pytest.approx(0.0, abs=1e-300)
        assert np.isfinite(p).all()

    def test_sums_to_one(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            p = softmax(rng.standard_normal((3, 5)) * 100)
            assert np.all(p > 0)
            assert np.allclose(p.sum(axis=-1), 1.0, atol=1e-6)

    def test_uniform_cross_entropy(self):
        assert cross_entropy(np.array([0.5, 0.5]), 0) == pytest.approx(
            np.log(2), abs=1e-9
        )
        assert cross_entropy(np.array([0.5, 0.5]), 1) == pytest.approx(
            np.log(2), abs=1e-9
        )

    def test_perfect_prediction(self):
        assert cross_entropy(np.array([0.0, 1.0]), 1) == 0.0

    def test_label_out_of_range(self):
        with pytest.raises(IndexError):
            cross_entropy(np.array([0.5, 0.5]), 2)

    def test_ce_of_softmax_shift_invariant(self):
        rng = np.random.default_rng(10)
        s = rng.standard_normal(4)
        a = cross_entropy(softmax(s), 2)
        b = cross_entropy(softmax(s + 55.0), 2)
        assert a == pytest.approx(b, abs=1e-9)


class TestL2Penalty:
    def test_single_weight(self):
        layer = LayerParams(np.array([[2.0]]), np.array([5.0]))
        assert l2_penalty([layer], 0.01) == pytest.approx(0.02)

    def test_zero_lambda(self):
        layer = LayerParams(np.ones((3, 3)), np.ones(3))
        assert l2_penalty([layer], 0.0) == 0.0

    def test_biases_excluded_and_matches_accumulation(self):
        rng = np.random.default_rng(11)
        layers = [
            LayerParams(rng.standard_normal((4, 3)), rng.standard_normal(4))
            for _ in range(3)
        ]
        lam = 0.37
        expected = 0.0
        for layer in layers:
            for value in layer.weights.ravel():
                expected += 0.5 * lam * value * value
        assert l2_penalty(layers, lam) == pytest.approx(expected, abs=1e-9)


class TestAdam:
    def test_first_step_is_lr_times_sign(self):
        for g0 in (3.7, -0.002, 123.0):
            p = [np.array([0.5])]
            state = init_adam(p)
            adam_step(p, [np.array([g0])], state, lr=0.01)
            assert p[0][0] - 0.5 == pytest.approx(-0.01 * np.sign(g0), rel=1e-4)

    def test_zero_gradient_never_moves(self):
        p = [np.full((3,), 7.0)]
        state = init_adam(p)
        for _ in range(50):
            adam_step(p, [np.zeros(3)], state, lr=0.1)
        assert np.array_equal(p[0], np.full((3,), 7.0))

    def test_scalar_quadratic_descent(self):
        # frozen from a single oracle run of this exact recurrence
        w = [np.array([1.0])]
        state = init_adam(w)
        for _ in range(100):
            adam_step(w, [2.0 * w[0]], state, lr=0.1)
        assert abs(w[0][0]) < 0.05
        assert w[0][0] == pytest.approx(0.002936675681102549, abs=1e-12)

    def test_shape_mismatch(self):
        p = [np.zeros(3)]
        state = init_adam(p)
        with pytest.raises(ShapeError):
            adam_step(p, [np.zeros(4)], state)

    def test_deterministic(self):
        def run():
            rng = np.random.default_rng(12)
            p = [rng.standard_normal((4, 4))]
            state = init_adam(p)
            for _ in range(20):
                adam_step(p, [0.3 * p[0] + 1.0], state, lr=0.05)
            return p[0]

        assert np.array_equal(run(), run())


class TestCheckpointFormat:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(13)
        sections = {
            "conv1": {"weights": rng.standard_normal((3, 3, 3, 1, 2)),
                      "biases": rng.standard_normal(2)},
            "fc": {"weights": rng.standard_normal((4, 6)),
                   "biases": rng.standard_normal(4)},
        }
        meta = {"kind": "test", "num_classes": "2"}
        path = tmp_path / "params.txt"
        save_params(path, sections, meta)
        loaded, loaded_meta = load_params(path)
        assert loaded_meta == meta
        for name, arrays in sections.items():
            for key, arr in arrays.items():
                assert np.array_equal(loaded[name][key], arr)
        content = path.read_text()
        save_params(path, loaded, loaded_meta)
        assert path.read_text() == content

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("not params\n")
        with pytest.raises(FormatError):
            load_params(path)

    def test_payload_shape_mismatch(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text(
            "s3fn-params v1\n[x]\nweights.shape=2,2\nweights.values=1.0 2.0 3.0\n"
        )
        with pytest.raises(FormatError):
            load_params(path)
