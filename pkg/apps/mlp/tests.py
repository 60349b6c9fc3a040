import numpy as np
from django.test import SimpleTestCase

from apps.core.exceptions import ArgumentError, DimensionMismatchError, DivergenceError
from .network import (
    INFER,
    LINEAR,
    SIGMOID,
    TRAIN,
    MlpConfig,
    MlpModel,
    forward,
    forward_trace,
    grad_check,
    init_mlp,
    loss_and_gradients,
    predict,
    train_mlp,
)


class MlpConfigTests(SimpleTestCase):

    def test_rejects_invalid_values(self):
        invalid = (
            {'layer_sizes': (3,)},
            {'layer_sizes': (3, 0, 1)},
            {'layer_sizes': (3, 1), 'output_activation': 'tanh'},
            {'layer_sizes': (3, 1), 'dropout_rate': 1.0},
            {'layer_sizes': (3, 1), 'learning_rate': 0.0},
            {'layer_sizes': (3, 1), 'batch_size': 0},
            {'layer_sizes': (3, 1), 'epochs': -1},
        )
        for kwargs in invalid:
            with self.assertRaises(ArgumentError):
                MlpConfig(**kwargs)

    def test_dict_round_trip(self):
        config = MlpConfig((4, 8, 2), SIGMOID, 0.1, 0.05, 16, 7, seed=3)
        self.assertEqual(MlpConfig.from_dict(config.to_dict()), config)


class InitTests(SimpleTestCase):

    def setUp(self):
        self.config = MlpConfig((10, 6, 3))

    def test_same_rng_seed_same_model(self):
        first = init_mlp(self.config, np.random.default_rng(4))
        second = init_mlp(self.config, np.random.default_rng(4))
        self.assertEqual(first, second)

    def test_shapes_biases_and_bounds(self):
        model = init_mlp(self.config, np.random.default_rng(0))
        self.assertEqual([w.shape for w in model.weights], [(6, 10), (3, 6)])
        for w, b in zip(model.weights, model.biases):
            fan_out, fan_in = w.shape
            self.assertTrue(np.all(np.abs(w) <= np.sqrt(6.0 / (fan_in + fan_out))))
            self.assertTrue(np.all(b == 0.0))
        self.assertEqual(model.n_parameters, 6 * 10 + 6 + 3 * 6 + 3)

    def test_model_rejects_mismatched_parameters(self):
        with self.assertRaises(ArgumentError):
            MlpModel(weights=(np.zeros((6, 9)), np.zeros((3, 6))), biases=(np.zeros(6), np.zeros(3)),
                     config=self.config)


class ForwardTests(SimpleTestCase):
    """Train/infer forward passes"""

    def setUp(self):
        self.x = np.random.default_rng(1).normal(size=(12, 5))

    def test_without_dropout_train_and_infer_agree(self):
        model = init_mlp(MlpConfig((5, 7, 7, 2), dropout_rate=0.0), np.random.default_rng(0))
        trained_mode = forward(model, self.x, TRAIN, np.random.default_rng(9))
        np.testing.assert_array_equal(trained_mode, forward(model, self.x, INFER))

    def test_zero_weights_with_sigmoid_output(self):
        config = MlpConfig((5, 4, 3), output_activation=SIGMOID)
        model = MlpModel(
            weights=(np.zeros((4, 5)), np.zeros((3, 4))), biases=(np.zeros(4), np.zeros(3)), config=config
        )
        np.testing.assert_array_equal(predict(model, self.x), np.full((12, 3), 0.5))

    def test_single_affine_layer(self):
        w = np.array([[1.0, -2.0, 0.5, 0.0, 3.0], [0.0, 1.0, 1.0, -1.0, 2.0]])
        b = np.array([0.25, -1.0])
        model = MlpModel(weights=(w,), biases=(b,), config=MlpConfig((5, 2), LINEAR))
        np.testing.assert_allclose(predict(model, self.x), self.x @ w.T + b, rtol=1e-14)

    def test_relu_hidden_layer(self):
        w1 = np.array([[1.0], [-1.0]])
        w2 = np.array([[1.0, 1.0]])
        model = MlpModel(weights=(w1, w2), biases=(np.zeros(2), np.zeros(1)), config=MlpConfig((1, 2, 1)))
        np.testing.assert_array_equal(predict(model, np.array([[2.0], [-3.0]])), [[2.0], [3.0]])

    def test_predict_is_pure_and_row_independent(self):
        model = init_mlp(MlpConfig((5, 16, 4)), np.random.default_rng(2))
        batch = predict(model, self.x)
        np.testing.assert_array_equal(batch, predict(model, self.x))
        for i in range(self.x.shape[0]):
            np.testing.assert_allclose(predict(model, self.x[i:i + 1])[0], batch[i], rtol=1e-12, atol=1e-15)

    def test_inverted_dropout_preserves_expectation(self):
        config = MlpConfig((5, 6, 2), dropout_rate=0.2)
        model = init_mlp(config, np.random.default_rng(3))
        repeated = np.repeat(self.x[:1], 10_000, axis=0)
        trace = forward_trace(model, repeated, TRAIN, np.random.default_rng(11))

        clean = trace.hidden_outputs[0][0]
        unit = int(np.argmax(clean))
        self.assertGreater(clean[unit], 0.0)
        masked = trace.layer_inputs[1][:, unit]
        standard_error = masked.std(ddof=1) / np.sqrt(masked.size)
        self.assertLessEqual(abs(masked.mean() - clean[unit]), 3.0 * standard_error)
        self.assertTrue(np.all(np.isin(masked, [0.0, clean[unit] / 0.8])))

    def test_train_mode_needs_an_rng(self):
        model = init_mlp(MlpConfig((5, 2)), np.random.default_rng(0))
        with self.assertRaises(ArgumentError):
            forward(model, self.x, TRAIN)

    def test_input_dimension_mismatch(self):
        model = init_mlp(MlpConfig((4, 2)), np.random.default_rng(0))
        with self.assertRaises(DimensionMismatchError):
            predict(model, self.x)


class GradientTests(SimpleTestCase):

    def test_random_small_networks(self):
        rng = np.random.default_rng(20)
        shapes = [(3, 4, 2), (2, 5, 1), (4, 3, 3, 2), (3, 6, 4), (5, 4, 4, 3)]
        for index, sizes in enumerate(shapes):
            for activation in (LINEAR, SIGMOID):
                config = MlpConfig(sizes, output_activation=activation, dropout_rate=0.5)
                model = init_mlp(config, np.random.default_rng(index))
                x = rng.normal(size=(10, sizes[0]))
                y = rng.random(size=(10, sizes[-1]))
                with self.subTest(sizes=sizes, activation=activation):
                    self.assertLess(grad_check(model, x, y, epsilon=1e-5), 1e-6)

    def test_zero_loss_gives_zero_gradients(self):
        model = init_mlp(MlpConfig((3, 4, 2)), np.random.default_rng(5))
        x = np.random.default_rng(6).normal(size=(7, 3))
        loss, grad_w, grad_b = loss_and_gradients(model, x, predict(model, x))
        self.assertEqual(loss, 0.0)
        for gradient in (*grad_w, *grad_b):
            self.assertTrue(np.all(gradient == 0.0))
        self.assertEqual(grad_check(model, x, predict(model, x)), 0.0)

    def test_linear_layer_closed_form(self):
        rng = np.random.default_rng(7)
        model = init_mlp(MlpConfig((3, 2)), rng)
        x = rng.normal(size=(9, 3))
        y = rng.normal(size=(9, 2))
        _, grad_w, grad_b = loss_and_gradients(model, x, y)
        residual = predict(model, x) - y
        np.testing.assert_allclose(grad_w[0], 2.0 * residual.T @ x / 9, rtol=1e-12)
        np.testing.assert_allclose(grad_b[0], 2.0 * residual.sum(axis=0) / 9, rtol=1e-12)


class TrainingTests(SimpleTestCase):
    """Mini-batch gradient descent"""

    def test_zero_epochs_returns_the_initial_model(self):
        config = MlpConfig((4, 5, 2), epochs=0, seed=12)
        x = np.ones((3, 4))
        model, trace = train_mlp(x, np.zeros((3, 2)), config)
        self.assertEqual(model, init_mlp(config, np.random.default_rng(12)))
        self.assertEqual(trace.epochs, 0)

    def test_same_seed_same_weights(self):
        rng = np.random.default_rng(0)
        x, y = rng.normal(size=(30, 3)), rng.normal(size=(30, 2))
        config = MlpConfig((3, 8, 2), epochs=5, batch_size=7, seed=1)
        first, first_trace = train_mlp(x, y, config)
        second, second_trace = train_mlp(x, y, config)
        self.assertEqual(first, second)
        self.assertEqual(first_trace.epoch_losses, second_trace.epoch_losses)

    def test_learns_xor(self):
        x = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        y = np.array([[0.0], [1.0], [1.0], [0.0]])
        final_losses = []
        for seed in range(5):
            config = MlpConfig(
                (2, 8, 8, 1), output_activation=SIGMOID, dropout_rate=0.0,
                learning_rate=0.3, batch_size=1, epochs=2000, seed=seed,
            )
            model, trace = train_mlp(x, y, config)
            self.assertEqual(trace.epochs, 2000)
            final_losses.append(float(np.mean(np.sum((predict(model, x) - y) ** 2, axis=1))))
        self.assertLess(min(final_losses), 0.05)

    def test_full_batch_loss_decreases(self):
        x = np.linspace(0.0, 1.0, 20).reshape(-1, 1)
        config = MlpConfig((1, 8, 1), dropout_rate=0.0, learning_rate=0.01, batch_size=20, epochs=10, seed=2)
        _, trace = train_mlp(x, 3.0 * x, config)
        self.assertTrue(np.all(np.diff(trace.epoch_losses) < 0.0))

    def test_divergence_names_the_epoch(self):
        x = np.linspace(0.0, 1.0, 20).reshape(-1, 1)
        config = MlpConfig((1, 8, 1), dropout_rate=0.0, learning_rate=1e6, batch_size=1, epochs=200)
        with np.errstate(all='ignore'):
            with self.assertRaises(DivergenceError) as ctx:
                train_mlp(x, 3.0 * x, config)
        self.assertGreaterEqual(ctx.exception.epoch, 1)
        self.assertIn(f"epoch {ctx.exception.epoch}", str(ctx.exception))

    def test_target_shape_mismatch(self):
        config = MlpConfig((2, 3, 2), epochs=1)
        with self.assertRaises(DimensionMismatchError):
            train_mlp(np.zeros((4, 2)), np.zeros((4, 3)), config)
        with self.assertRaises(DimensionMismatchError):
            train_mlp(np.zeros((4, 2)), np.zeros((3, 2)), config)
