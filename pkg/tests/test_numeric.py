#!/usr/bin/env python3
"""
Numeric engine tests for xmd
"""
import math
import unittest
from pathlib import Path
import sys

import numpy as np

# Add the repo root to the path so we can import our modules
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.errors import ConfigurationError, DataError, NumericError, UsageError
from src.numeric import ParamSet, Tape, Tensor, backward, constant, forward, grad_check
from src.optim import OptimizerState, state_dict, step, step_lr


def mlp_graph(tape, inputs, params):
    """Two-layer MLP with a mean-squared loss against a fixed target"""
    x, target = inputs
    h = tape.relu(tape.affine(x, params["fc0.weight"], params["fc0.bias"]))
    y = tape.affine(h, params["fc1.weight"], params["fc1.bias"])
    return tape.mean(tape.sq_l2_mean(y, constant(target)))


def random_mlp(seed, x_dim=4, hidden=6, y_dim=3):
    rng = np.random.default_rng(seed)
    params = ParamSet()
    params.add("fc0.weight", rng.standard_normal((hidden, x_dim)))
    params.add("fc0.bias", rng.standard_normal(hidden) * 0.1)
    params.add("fc1.weight", rng.standard_normal((y_dim, hidden)))
    params.add("fc1.bias", rng.standard_normal(y_dim) * 0.1)
    inputs = (rng.standard_normal((5, x_dim)), rng.standard_normal((5, y_dim)))
    return params, inputs


class TestForward(unittest.TestCase):
    """Test forward evaluation of graphs"""

    def test_identity_graph(self):
        """Test identity graph returns its input"""
        output, _ = forward(lambda tape, x, params: x, constant([1.0, 2.0, 3.0]), ParamSet())
        np.testing.assert_array_equal(output.data, [1.0, 2.0, 3.0])

    def test_affine_identity_weights(self):
        """Test y = Wx with W = I"""
        params = ParamSet()
        params.add("w", np.eye(2))
        output, _ = forward(lambda tape, x, p: tape.affine(x, p["w"]), constant([5.0, 7.0]), params)
        np.testing.assert_array_equal(output.data, [5.0, 7.0])

    def test_zero_weight_mlp_gives_zero_vector(self):
        """Test 2-layer MLP with all-zero weights"""
        params = ParamSet()
        params.add("a", np.zeros((4, 3)))
        params.add("b", np.zeros((2, 4)))

        def graph(tape, x, p):
            return tape.affine(tape.relu(tape.affine(x, p["a"])), p["b"])

        output, _ = forward(graph, constant([0.3, -2.0, 9.0]), params)
        np.testing.assert_array_equal(output.data, np.zeros(2))

    def test_shape_mismatch_names_node(self):
        """Test configuration error names the offending node"""
        params = ParamSet()
        params.add("w", np.ones((2, 3)))
        with self.assertRaises(ConfigurationError) as ctx:
            forward(lambda tape, x, p: tape.affine(x, p["w"]), constant([1.0, 2.0]), params)
        self.assertIn("node #0 (affine)", str(ctx.exception))

    def test_non_finite_intermediate_is_numeric_error(self):
        """Test overflow raises a numeric error carrying the node id"""
        tape = Tape()
        big = tape.scale(constant([1e300]), 1.0)
        with self.assertRaises(NumericError) as ctx:
            tape.mul(big, big)
        self.assertEqual(ctx.exception.node_id, 1)

    def test_cross_entropy_stable_for_huge_logits(self):
        """Test log-sum-exp keeps CE finite"""
        tape = Tape()
        loss = tape.cross_entropy(constant([[1000.0, 0.0]]), [0])
        self.assertEqual(loss.data[0], 0.0)

    def test_cross_entropy_label_out_of_range(self):
        """Test label >= C is a data error"""
        with self.assertRaises(DataError):
            Tape().cross_entropy(constant([[0.0, 1.0]]), [2])

    def test_cosine_zero_norm_is_data_error(self):
        """Test zero-norm vectors have no direction"""
        with self.assertRaises(DataError):
            Tape().cosine_similarity(constant([[0.0, 0.0]]), constant([[1.0, 0.0]]))


class TestBackward(unittest.TestCase):
    """Test reverse-mode gradients"""

    def test_square_gradient(self):
        """Test d(x^2)/dx = 6 at x = 3"""
        params = ParamSet()
        params.add("x", [3.0])
        loss, tape = forward(lambda tape, _, p: tape.mean(tape.mul(p["x"], p["x"])), (), params)
        backward(tape, loss)
        np.testing.assert_array_equal(params["x"].grad, [6.0])

    def test_constant_loss_gives_zero_gradient(self):
        """Test a loss that ignores the parameter"""
        params = ParamSet()
        params.add("x", [1.5, -2.0])

        def graph(tape, _, p):
            return tape.mean(tape.scale(p["x"], 0.0, 4.0))

        loss, tape = forward(graph, (), params)
        backward(tape, loss)
        np.testing.assert_array_equal(params["x"].grad, [0.0, 0.0])
        self.assertEqual(loss.item(), 4.0)

    def test_backward_before_forward(self):
        """Test usage errors for missing or empty tapes"""
        with self.assertRaises(UsageError):
            backward(None, constant(1.0))
        with self.assertRaises(UsageError):
            Tape().backward(constant(1.0))

    def test_backward_needs_scalar(self):
        """Test a vector loss is rejected"""
        params = ParamSet()
        params.add("x", [1.0, 2.0])
        output, tape = forward(lambda tape, _, p: tape.scale(p["x"], 2.0), (), params)
        with self.assertRaises(UsageError):
            backward(tape, output)

    def test_frozen_parameter_receives_no_gradient(self):
        """Test frozen parameters stay without grad"""
        params = ParamSet()
        params.add("frozen", [2.0], trainable=False)
        params.add("live", [3.0])
        loss, tape = forward(lambda tape, _, p: tape.mean(tape.mul(p["frozen"], p["live"])), (), params)
        backward(tape, loss)
        self.assertIsNone(params["frozen"].grad)
        np.testing.assert_array_equal(params["live"].grad, [2.0])

    def test_hinge_inside_margin_has_zero_gradient(self):
        """Test samples with d <= m contribute exactly zero"""
        params = ParamSet()
        params.add("d", [0.05, 0.09, 0.5])
        loss, tape = forward(lambda tape, _, p: tape.mean(tape.hinge(p["d"], 0.09)), (), params)
        backward(tape, loss)
        np.testing.assert_array_equal(params["d"].grad, [0.0, 0.0, 1.0 / 3.0])

    def test_mlp_matches_finite_differences(self):
        """Test random 2-layer MLP gradients against central differences"""
        for seed in range(5):
            params, inputs = random_mlp(seed)
            result = grad_check(mlp_graph, params, inputs, seed=seed)
            self.assertLessEqual(result.max_relative_error, 1e-4, f"seed {seed}")
        print("✅ MLP gradients match finite differences")


class TestGradCheck(unittest.TestCase):
    """Test the finite-difference oracle"""

    def test_linear_graph_is_exact(self):
        """Test linear graph error is at rounding level"""
        rng = np.random.default_rng(0)
        params = ParamSet()
        params.add("w", 0.01 * rng.standard_normal((3, 4)))
        x = np.array([[1.0, 2.0, 3.0, 4.0], [0.5, 1.5, 2.5, 3.5]])
        result = grad_check(lambda tape, inputs, p: tape.mean(tape.affine(inputs, p["w"])), params, x)
        self.assertLessEqual(result.max_relative_error, 1e-10)
        self.assertEqual(result.checked, 12)

    def test_kink_is_skipped_not_failed(self):
        """Test a hinge sitting on its boundary is reported as skipped"""
        params = ParamSet()
        params.add("d", [0.3, 0.8])
        result = grad_check(lambda tape, _, p: tape.mean(tape.hinge(p["d"], 0.3)), params)
        self.assertEqual(result.skipped, [("d", 0)])
        self.assertEqual(result.warnings, 1)
        self.assertLessEqual(result.max_relative_error, 1e-8)

    def test_grad_check_leaves_grads_clear(self):
        """Test grad buffers are cleared afterwards"""
        params, inputs = random_mlp(3)
        grad_check(mlp_graph, params, inputs)
        self.assertTrue(all(p.grad is None for _, p in params.items()))


class TestParamSet(unittest.TestCase):
    """Test named parameter bookkeeping"""

    def test_duplicate_name_rejected(self):
        """Test names are unique"""
        params = ParamSet()
        params.add("w", [1.0])
        with self.assertRaises(ConfigurationError):
            params.add("w", [2.0])

    def test_load_checks_shapes_and_names(self):
        """Test load validates the incoming arrays"""
        params = ParamSet()
        params.add("w", np.zeros((2, 2)))
        with self.assertRaises(ConfigurationError):
            params.load({})
        with self.assertRaises(ConfigurationError):
            params.load({"w": np.zeros(3)})
        params.load({"w": np.ones((2, 2))})
        np.testing.assert_array_equal(params["w"].data, np.ones((2, 2)))

    def test_item_needs_single_value(self):
        """Test Tensor.item on a vector"""
        with self.assertRaises(UsageError):
            Tensor([1.0, 2.0]).item()


class TestOptimizers(unittest.TestCase):
    """Test SGD-momentum and Adam updates"""

    def _param(self, value, grad, trainable=True):
        params = ParamSet()
        params.add("theta", [value], trainable=trainable)
        params["theta"].grad = np.array([grad])
        return params

    def test_one_sgd_step(self):
        """Test lr=0.1, momentum=0, theta=1, grad=2 -> 0.8"""
        params = self._param(1.0, 2.0)
        optimizer = OptimizerState(kind="sgd-momentum", lr=0.1, momentum=0.0)
        step(optimizer, params)
        self.assertAlmostEqual(params["theta"].data[0], 0.8, places=15)
        self.assertIsNone(params["theta"].grad)
        self.assertEqual(optimizer.step_count, 1)

    def test_adam_first_step_magnitude_is_lr(self):
        """Test bias-corrected Adam moves by about lr on step 1"""
        for grad in (3.0, -0.02):
            params = self._param(0.5, grad)
            step(OptimizerState(kind="adam", lr=1e-3), params)
            self.assertAlmostEqual(abs(params["theta"].data[0] - 0.5), 1e-3, places=8)

    def test_frozen_parameter_unchanged(self):
        """Test a stray grad on a frozen parameter is ignored"""
        params = self._param(1.0, 5.0, trainable=False)
        step(OptimizerState(kind="sgd-momentum", lr=0.1), params)
        self.assertEqual(params["theta"].data[0], 1.0)

    def test_missing_grad_is_usage_error(self):
        """Test step without gradients"""
        params = ParamSet()
        params.add("theta", [1.0])
        with self.assertRaises(UsageError):
            step(OptimizerState(), params)

    def test_buffers_match_parameter_shapes(self):
        """Test Adam moment buffers keep parameter shapes"""
        params = ParamSet()
        params.add("w", np.ones((2, 3)))
        params["w"].grad = np.full((2, 3), 0.5)
        optimizer = OptimizerState()
        step(optimizer, params)
        snapshot = state_dict(optimizer)
        self.assertEqual(snapshot["buffers"]["w"]["m"].shape, (2, 3))
        self.assertEqual(snapshot["step_count"], 1)

    def test_step_schedule(self):
        """Test x0.75 every 3 epochs"""
        self.assertEqual(step_lr(1e-3, 2), 1e-3)
        self.assertAlmostEqual(step_lr(1e-3, 3), 0.75e-3)
        self.assertAlmostEqual(step_lr(1e-3, 7), 1e-3 * 0.75 ** 2)

    def test_training_is_deterministic(self):
        """Test identical seeds give bit-identical parameters after N steps"""
        finals = []
        for _ in range(2):
            params, inputs = random_mlp(11)
            optimizer = OptimizerState(kind="adam", lr=1e-2)
            for _ in range(5):
                loss, tape = forward(mlp_graph, inputs, params)
                backward(tape, loss)
                step(optimizer, params)
            finals.append(params.snapshot())
        for name in finals[0]:
            self.assertTrue(np.array_equal(finals[0][name], finals[1][name]))


if __name__ == '__main__':
    unittest.main(verbosity=2)
