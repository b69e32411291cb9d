"""Tests for the proxlib module"""

import unittest

import numpy as np

from aind_network_regression.proxlib import (
    L1Norm,
    SquaredL2Norm,
    ZeroFunction,
    f_lambda,
    get_regularizer,
    project_l2_ball,
    prox,
    soft_threshold,
)


class TestProx(unittest.TestCase):
    """Tests for prox and the registered regularizers"""

    def test_l1(self):
        """Soft-thresholding at t."""
        np.testing.assert_array_equal(
            [2.0, 0.0, 0.0], prox(L1Norm(), 1.0, [3.0, -0.5, 0.0])
        )

    def test_zero_is_identity(self):
        """The zero function leaves v unchanged."""
        v = np.array([1.5, -2.0])
        np.testing.assert_array_equal(v, prox(ZeroFunction(), 7.0, v))

    def test_squared_l2(self):
        """v / (1 + t)"""
        np.testing.assert_array_equal([2.0], prox(SquaredL2Norm(), 1.0, [4.0]))

    def test_nonpositive_scale(self):
        """t must be positive."""
        with self.assertRaises(ValueError):
            prox(L1Norm(), 0.0, [1.0])

    def test_lookup(self):
        """Regularizers are found by name."""
        self.assertIsInstance(get_regularizer("l1"), L1Norm)
        self.assertIsInstance(get_regularizer("sq_l2"), SquaredL2Norm)
        self.assertIsInstance(get_regularizer("zero"), ZeroFunction)
        with self.assertRaises(KeyError):
            get_regularizer("l0")

    def test_evaluation(self):
        """Function values."""
        v = np.array([3.0, -4.0])
        self.assertEqual(7.0, L1Norm()(v))
        self.assertEqual(12.5, SquaredL2Norm()(v))
        self.assertEqual(0.0, ZeroFunction()(v))

    def test_firmly_nonexpansive(self):
        """||Pu - Pv||^2 <= <Pu - Pv, u - v> on random pairs."""
        rng = np.random.default_rng(0)
        for f in (L1Norm(), SquaredL2Norm(), ZeroFunction()):
            for _ in range(1000):
                u, v = rng.normal(scale=3.0, size=(2, 5))
                t = rng.uniform(0.01, 5.0)
                diff = prox(f, t, u) - prox(f, t, v)
                self.assertLessEqual(
                    np.dot(diff, diff), np.dot(diff, u - v) + 1e-9
                )

    def test_optimality(self):
        """No random point improves on the prox objective."""
        rng = np.random.default_rng(1)
        for f in (L1Norm(), SquaredL2Norm(), ZeroFunction()):
            for _ in range(50):
                v = rng.normal(scale=2.0, size=4)
                t = rng.uniform(0.1, 3.0)
                z = prox(f, t, v)
                best = t * f(z) + 0.5 * np.sum((z - v) ** 2)
                for _ in range(20):
                    w = z + rng.normal(scale=0.5, size=4)
                    value = t * f(w) + 0.5 * np.sum((w - v) ** 2)
                    self.assertGreaterEqual(value, best - 1e-12)


class TestFLambda(unittest.TestCase):
    """Tests for f_lambda"""

    def test_l1_examples(self):
        """Small inputs vanish and large ones shrink by lambda."""
        f = L1Norm()
        np.testing.assert_array_equal([0.0], f_lambda(f, 0.02, [0.01]))
        np.testing.assert_allclose([0.98], f_lambda(f, 0.02, [1.0]))

    def test_l1_matches_soft_threshold(self):
        """For the l1 norm the operator is soft-thresholding at lambda."""
        rng = np.random.default_rng(2)
        v = rng.normal(scale=3.0, size=1000)
        for lam in (0.02, 0.5, 2.0):
            np.testing.assert_allclose(
                soft_threshold(v, lam),
                f_lambda(L1Norm(), lam, v),
                rtol=0,
                atol=1e-14,
            )

    def test_zero(self):
        """With f = 0 the operator is the identity."""
        v = np.array([0.3, -7.0])
        np.testing.assert_array_equal(v, f_lambda(ZeroFunction(), 1.0, v))

    def test_bad_lambda(self):
        """lambda must be positive."""
        with self.assertRaises(ValueError):
            f_lambda(L1Norm(), -1.0, [1.0])


class TestProjectL2Ball(unittest.TestCase):
    """Tests for project_l2_ball"""

    def test_outside(self):
        """Points outside are pulled to the sphere."""
        np.testing.assert_allclose(
            [1.5, 2.0], project_l2_ball([0.0, 0.0], 2.5, [3.0, 4.0])
        )

    def test_inside(self):
        """Points inside stay put."""
        np.testing.assert_array_equal(
            [1.0, 1.0], project_l2_ball([1.0, 0.0], 2.0, [1.0, 1.0])
        )

    def test_negative_radius(self):
        """Radius must be nonnegative."""
        with self.assertRaises(ValueError):
            project_l2_ball([0.0], -1.0, [1.0])


if __name__ == "__main__":
    unittest.main()
