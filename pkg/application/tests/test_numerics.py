import math

import numpy as np
import pytest

from utils.errors import ConvergenceError, ValidationError
from utils.numerics import (
    LOG_2PIE,
    ToleranceConfig,
    adaptive_quadrature,
    binary_entropy,
    bisection_root,
    gaussian_entropy,
    golden_section_max,
    log_gamma,
    log_sum_exp,
    log_unit_ball_volume,
    philox_generator,
    power_iteration,
)


class TestToleranceConfig:
    def test_defaults(self):
        tol = ToleranceConfig()
        assert tol.abs_tol == 1e-10
        assert tol.rel_tol == 0.0
        assert tol.max_iterations == 500

    @pytest.mark.parametrize('kwargs', [{'abs_tol': 0}, {'rel_tol': -1e-3}, {'max_iterations': 0}])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValidationError):
            ToleranceConfig(**kwargs)

    def test_from_config_and_overrides(self):
        tol = ToleranceConfig.from_config({'abs_tol': 1e-8, 'max_iterations': 50})
        assert tol.abs_tol == 1e-8
        assert tol.max_iterations == 50
        assert tol.with_overrides(abs_tol=1e-6, rel_tol=None).abs_tol == 1e-6
        assert tol.with_overrides(rel_tol=None).rel_tol == 0.0


class TestSpecialFunctions:
    def test_log_gamma_small_integers(self):
        for k in range(1, 10):
            assert log_gamma(k) == pytest.approx(math.log(math.factorial(k - 1)), abs=1e-12)

    def test_log_gamma_half(self):
        assert log_gamma(0.5) == pytest.approx(0.5 * math.log(math.pi), abs=1e-13)

    def test_log_gamma_rejects_nonpositive(self):
        with pytest.raises(ValidationError):
            log_gamma(0.0)

    def test_log_unit_ball_volume(self):
        assert log_unit_ball_volume(0) == pytest.approx(0.0, abs=1e-15)
        assert log_unit_ball_volume(1) == pytest.approx(math.log(2.0), abs=1e-13)
        assert log_unit_ball_volume(2) == pytest.approx(math.log(math.pi), abs=1e-13)
        assert log_unit_ball_volume(3) == pytest.approx(math.log(4.0 * math.pi / 3.0), abs=1e-13)

    def test_log_unit_ball_volume_vectorised(self):
        values = log_unit_ball_volume(np.arange(4))
        np.testing.assert_allclose(values, np.log([1.0, 2.0, math.pi, 4.0 * math.pi / 3.0]), atol=1e-13)

    def test_log_sum_exp(self):
        assert log_sum_exp([0.0, 0.0]) == pytest.approx(math.log(2.0))
        assert log_sum_exp([1000.0, 1000.0]) == pytest.approx(1000.0 + math.log(2.0))
        assert log_sum_exp([-np.inf, 0.0]) == pytest.approx(0.0)
        assert log_sum_exp([-np.inf, -np.inf]) == -np.inf

    def test_log_unit_ball_volume_recurrence(self):
        # ε_j = ε_{j-2}·2π/j
        j = np.arange(2, 201)
        np.testing.assert_allclose(
            log_unit_ball_volume(j), log_unit_ball_volume(j - 2) + np.log(2.0 * math.pi / j), rtol=1e-12, atol=1e-10
        )

    @pytest.mark.parametrize('shift', [-1000.0, 0.0, 700.0])
    def test_log_sum_exp_shift_invariance(self, shift):
        values = np.random.default_rng(1).normal(0.0, 5.0, 50)
        assert log_sum_exp(values + shift) == pytest.approx(log_sum_exp(values) + shift, abs=1e-9)

    @pytest.mark.parametrize('values', [[], [0.0, np.nan]])
    def test_log_sum_exp_rejects(self, values):
        with pytest.raises(ValidationError):
            log_sum_exp(values)

    def test_binary_entropy(self):
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0
        assert binary_entropy(0.5) == pytest.approx(math.log(2.0))
        with pytest.raises(ValidationError):
            binary_entropy(1.5)

    def test_gaussian_entropy(self):
        assert gaussian_entropy(1.0) == pytest.approx(0.5 * LOG_2PIE)
        with pytest.raises(ValidationError):
            gaussian_entropy(0.0)


class TestRandomStreams:
    def test_same_seed_and_shard_reproduce(self):
        a = philox_generator(7, 3).standard_normal(5)
        b = philox_generator(7, 3).standard_normal(5)
        np.testing.assert_array_equal(a, b)

    def test_shards_differ(self):
        a = philox_generator(7, 0).standard_normal(5)
        b = philox_generator(7, 1).standard_normal(5)
        assert not np.array_equal(a, b)


class TestRootFinding:
    def test_bisection_finds_sqrt2(self, tol):
        root = bisection_root(lambda x: x * x - 2.0, 0.0, 2.0, tol)
        assert root == pytest.approx(math.sqrt(2.0), abs=1e-9)

    def test_bisection_root_plugs_back(self, tol):
        def f(x):
            return x ** 3 - x - 2.0

        root = bisection_root(f, 1.0, 2.0, tol)
        assert abs(f(root)) < 1e-8

    def test_bisection_needs_sign_change(self, tol):
        with pytest.raises(ValidationError):
            bisection_root(lambda x: x * x + 1.0, 0.0, 2.0, tol)

    def test_bisection_budget_exhausted(self):
        with pytest.raises(ConvergenceError):
            bisection_root(lambda x: x - 0.3, 0.0, 1.0, ToleranceConfig(abs_tol=1e-15, max_iterations=3))

    def test_golden_section_interior(self, tol):
        x, fx = golden_section_max(lambda t: -(t - 0.3) ** 2, 0.0, 1.0, tol)
        assert x == pytest.approx(0.3, abs=1e-5)
        assert fx == pytest.approx(0.0, abs=1e-9)

    def test_golden_section_endpoint(self, tol):
        x, fx = golden_section_max(lambda t: t, 0.0, 1.0, tol)
        assert x == 1.0
        assert fx == 1.0

    def test_golden_section_degenerate_interval(self, tol):
        assert golden_section_max(lambda t: 2 * t, 0.5, 0.5, tol) == (0.5, 1.0)


class TestQuadrature:
    def test_finite_interval(self, tol):
        assert adaptive_quadrature(np.sin, 0.0, math.pi, tol) == pytest.approx(2.0, abs=1e-10)

    def test_infinite_upper_limit(self, tol):
        value = adaptive_quadrature(lambda x: math.exp(-x * x), 0.0, math.inf, tol)
        assert value == pytest.approx(0.5 * math.sqrt(math.pi), abs=1e-9)

    def test_breakpoints(self, tol):
        value = adaptive_quadrature(lambda x: abs(x - 0.5), 0.0, 1.0, tol, points=[0.5])
        assert value == pytest.approx(0.25, abs=1e-12)

    def test_exact_on_cubics(self, tol):
        value = adaptive_quadrature(lambda x: x ** 3 - 2.0 * x + 1.0, -1.0, 2.0, tol)
        assert value == pytest.approx(3.75, abs=1e-12)

    def test_rejects_empty_interval(self, tol):
        with pytest.raises(ValidationError):
            adaptive_quadrature(np.sin, 1.0, 1.0, tol)

    def test_non_decaying_integrand(self, tol):
        with pytest.raises(ConvergenceError):
            adaptive_quadrature(lambda x: 1.0, 0.0, math.inf, tol)


class TestPowerIteration:
    def test_symmetric_matrix(self, tol):
        eigenvalue, vector = power_iteration(np.array([[2.0, 1.0], [1.0, 2.0]]), tol)
        assert eigenvalue == pytest.approx(3.0, abs=1e-9)
        np.testing.assert_allclose(vector, np.full(2, 1.0 / math.sqrt(2.0)), atol=1e-6)

    def test_nonnegative_vector(self, tol):
        matrix = np.array([[0.5, 0.2, 0.0], [0.1, 0.4, 0.3], [0.0, 0.6, 0.2]])
        eigenvalue, vector = power_iteration(matrix, tol)
        assert np.all(vector >= 0)
        assert eigenvalue == pytest.approx(max(abs(np.linalg.eigvals(matrix))), abs=1e-8)

    def test_matrix_and_transpose_share_eigenvalue(self, tol):
        matrix = np.random.default_rng(2).uniform(0.0, 1.0, (20, 20))
        forward, _ = power_iteration(matrix, tol)
        backward, _ = power_iteration(matrix.T, tol)
        assert forward == pytest.approx(backward, abs=1e-8)

    @pytest.mark.parametrize('matrix', [np.ones((2, 3)), np.array([[1.0, -1.0], [0.0, 1.0]]), np.zeros((0, 0))])
    def test_rejects_invalid(self, tol, matrix):
        with pytest.raises(ValidationError):
            power_iteration(matrix, tol)

    def test_periodic_matrix_fails_after_restarts(self):
        # eigenvalues ±√2: the Rayleigh quotient alternates instead of settling
        swap = np.array([[0.0, 2.0], [1.0, 0.0]])
        with pytest.raises(ConvergenceError):
            power_iteration(swap, ToleranceConfig(max_iterations=20), restarts=1)
