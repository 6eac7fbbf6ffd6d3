import math

import numpy as np
import pytest

from steiner_cube import ell_cube
from subconvolutive import (
    ConjugateFunction,
    IntrinsicVolumeSequence,
    _log_convolve,
    check_alexandrov_fenchel,
    check_subconvolutive,
    conjugate_on_interval,
    cube_intrinsic_sequence,
    cube_lambda_star,
    degenerate_sequence,
    ell_general,
    ell_general_argmax,
    finite_n_conjugate,
    g_n_eval,
    lambda_sandwich_check,
    lambda_star_estimate,
    ldp_upper_check,
    search_interval,
)
from utils.errors import ValidationError


@pytest.fixture(scope='module')
def cube_512():
    return cube_intrinsic_sequence(1.0, 512)


@pytest.fixture(scope='module')
def cube_lambda_512(cube_512):
    return lambda_star_estimate(cube_512, 129)


def _corrupted_cube(n_max=4):
    rows = [np.array(row) for row in cube_intrinsic_sequence(1.0, n_max).log_mu]
    rows[-1][2] += math.log(10.0)
    return IntrinsicVolumeSequence(n_max, tuple(rows))


class TestSequence:
    def test_cube_rows(self):
        seq = cube_intrinsic_sequence(0.5, 3)
        np.testing.assert_allclose(np.exp(seq.row(3)), [1.0, 3.0, 3.0, 1.0])
        assert seq.alpha_hat == pytest.approx(0.0)
        assert seq.beta_hat == 0.0

    def test_rows_are_read_only(self):
        seq = cube_intrinsic_sequence(1.0, 2)
        with pytest.raises(ValueError):
            seq.row(1)[0] = 1.0

    def test_degenerate_rows(self):
        row = degenerate_sequence(3).row(3)
        assert row[0] == 0.0 and row[-1] == 0.0
        assert np.all(row[1:-1] == -np.inf)

    @pytest.mark.parametrize('rows', [
        ([0.0, 0.0],),
        ([0.0, 0.0], [0.0, 0.0]),
        ([0.0, math.nan], [0.0, 0.0, 0.0]),
        ([0.0, math.inf], [0.0, 0.0, 0.0]),
        ([-math.inf, 0.0], [0.0, 0.0, 0.0]),
    ])
    def test_rejects_malformed(self, rows):
        with pytest.raises(ValidationError):
            IntrinsicVolumeSequence(2, rows)

    def test_row_out_of_range(self):
        with pytest.raises(ValidationError):
            cube_intrinsic_sequence(1.0, 3).row(4)


class TestInequalities:
    def test_cube_is_subconvolutive_with_equality(self):
        seq = cube_intrinsic_sequence(1.0, 64)
        assert check_subconvolutive(seq, 32, 32)
        assert check_subconvolutive(seq, 1, 63)

    def test_all_pairs_small_cube(self):
        seq = cube_intrinsic_sequence(1.5, 12)
        assert all(check_subconvolutive(seq, m, n) for m in range(1, 12) for n in range(1, 13 - m))

    def test_log_convolution_matches_direct_sum(self):
        a = np.array([0.0, math.log(2.0), -np.inf, math.log(3.0)])
        b = np.array([math.log(5.0), 0.0])
        np.testing.assert_allclose(np.exp(_log_convolve(a, b)), [5.0, 11.0, 2.0, 15.0, 3.0], rtol=1e-12)
        np.testing.assert_array_equal(_log_convolve(a, b), _log_convolve(b, a))

    def test_log_convolution_of_empty_support(self):
        assert np.all(_log_convolve(np.array([-np.inf, 0.0]), np.array([-np.inf])) == -np.inf)

    def test_all_pairs_larger_cube(self):
        seq = cube_intrinsic_sequence(1.0, 96)
        assert all(
            check_subconvolutive(seq, m, total - m) for total in range(2, 97) for m in range(1, total // 2 + 1)
        )

    def test_degenerate_is_subconvolutive(self):
        seq = degenerate_sequence(6)
        assert all(check_subconvolutive(seq, m, 6 - m) for m in range(1, 6))

    def test_corrupted_sequence_fails(self):
        assert not check_subconvolutive(_corrupted_cube(), 2, 2)

    def test_pair_out_of_range(self):
        with pytest.raises(ValidationError):
            check_subconvolutive(cube_intrinsic_sequence(1.0, 4), 2, 3)

    def test_alexandrov_fenchel_cube(self):
        seq = cube_intrinsic_sequence(1.0, 4)
        assert check_alexandrov_fenchel(seq, 4)

    def test_alexandrov_fenchel_flat_row_fails(self):
        seq = IntrinsicVolumeSequence(2, ([0.0, 0.0], [0.0, 0.0, 0.0]))
        assert not check_alexandrov_fenchel(seq, 2)

    def test_alexandrov_fenchel_needs_two(self):
        with pytest.raises(ValidationError):
            check_alexandrov_fenchel(cube_intrinsic_sequence(1.0, 4), 1)


class TestGenerating:
    def test_cube_closed_form(self):
        seq = cube_intrinsic_sequence(2.0, 10)
        t = np.linspace(-3.0, 3.0, 13)
        for n in (1, 5, 10):
            np.testing.assert_allclose(g_n_eval(seq, n, t), np.log1p(4.0 * np.exp(t)), atol=1e-12)

    def test_scalar_input(self):
        seq = cube_intrinsic_sequence(1.0, 3)
        assert g_n_eval(seq, 2, 0.0) == pytest.approx(math.log(3.0))

    def test_monotone_and_convex(self):
        rng = np.random.default_rng(0)
        rows = tuple(rng.uniform(-1.0, 1.0, n + 1) for n in range(1, 9))
        seq = IntrinsicVolumeSequence(8, rows)
        values = g_n_eval(seq, 8, np.linspace(-4.0, 4.0, 81))
        assert np.all(np.diff(values) > 0)
        assert np.all(np.diff(values, 2) >= -1e-12)

    @pytest.mark.parametrize('seq', [cube_intrinsic_sequence(1.5, 64), degenerate_sequence(64)], ids=['cube', 'degenerate'])
    def test_doubling_does_not_increase(self, seq):
        t = np.linspace(-4.0, 4.0, 33)
        for n in range(1, 33):
            assert np.all(g_n_eval(seq, 2 * n, t) <= g_n_eval(seq, n, t) + 1e-10)

    def test_degenerate_tends_to_hinge(self):
        seq = degenerate_sequence(200)
        t = np.array([-1.0, 0.0, 1.0])
        np.testing.assert_allclose(g_n_eval(seq, 200, t), [0.0, math.log(2.0) / 200, 1.0], atol=1e-12)

    def test_sandwich(self, cube_512):
        assert lambda_sandwich_check(cube_512, np.linspace(-5.0, 5.0, 41))
        assert lambda_sandwich_check(degenerate_sequence(16), np.linspace(-2.0, 2.0, 21))


class TestConjugate:
    def test_search_interval(self):
        assert search_interval(0.5, 1.0, 0.0, 2.0) == (-4.0, 2.0)

    def test_on_interval_matches_closed_form(self, tol):
        seq = cube_intrinsic_sequence(1.0, 4)
        value = conjugate_on_interval(lambda t: g_n_eval(seq, 4, t), 0.5, math.log(2.0), 0.0, math.log(3.0), tol)
        assert value == pytest.approx(cube_lambda_star(1.0).evaluate(0.5), abs=1e-9)

    def test_on_interval_rejects(self, tol):
        with pytest.raises(ValidationError):
            conjugate_on_interval(lambda t: t, 0.0, 0.0, 0.0, 1.0, tol)
        with pytest.raises(ValidationError):
            conjugate_on_interval(lambda t: t, 0.5, 1.0, 1.0, 0.0, tol)

    def test_finite_n_conjugate_structure(self):
        seq = cube_intrinsic_sequence(1.0, 8)
        conj = finite_n_conjugate(seq, 8, grid_points=17)
        assert conj.provenance == 'finite-n conjugate'
        assert conj.n_max == 8
        assert len(conj.search_intervals) == 15
        assert conj.values[0] == pytest.approx(0.0)
        assert conj.values[-1] == pytest.approx(-math.log(2.0))
        assert conj.is_convex()

    def test_conjugation_reverses_order(self, tol):
        # g_16 <= g_8 pointwise, so g_16* >= g_8*
        seq = degenerate_sequence(16)
        coarse = finite_n_conjugate(seq, 8, 33, tol)
        fine = finite_n_conjugate(seq, 16, 33, tol)
        assert np.all(fine.values >= coarse.values - 1e-9)
        assert fine.values[16] > coarse.values[16]

    def test_grid_too_small(self):
        with pytest.raises(ValidationError):
            finite_n_conjugate(cube_intrinsic_sequence(1.0, 4), 4, grid_points=8)

    def test_estimate_matches_closed_form(self, cube_512):
        estimate = lambda_star_estimate(cube_512, 65)
        exact = cube_lambda_star(1.0, 65)
        assert estimate.provenance == 'lambda-star estimate'
        assert estimate.n_max == 512
        assert np.max(np.abs(estimate.values - exact.values)) < 1e-2

    def test_closed_form_values(self):
        conj = cube_lambda_star(1.0)
        x = 0.3
        expected = x * math.log(x) + (1 - x) * math.log(1 - x) - x * math.log(2.0)
        assert conj.evaluate(x) == pytest.approx(expected)
        assert conj.evaluate(0.0) == 0.0
        assert conj.is_convex()

    def test_biconjugate(self):
        conj = cube_lambda_star(1.0)
        assert conj.conjugate_at(0.0) == pytest.approx(math.log(3.0), abs=1e-4)

    def test_interpolated_evaluation(self):
        conj = ConjugateFunction([0.0, 0.5, 1.0], [0.0, -1.0, 0.0], 'finite-n conjugate')
        assert conj.evaluate(0.25) == pytest.approx(-0.5)
        with pytest.raises(ValidationError):
            conj.evaluate(1.5)

    @pytest.mark.parametrize('grid, values, provenance', [
        ([0.0, 1.0], [0.0, 0.0], 'guess'),
        ([0.5, 0.2], [0.0, 0.0], 'closed-form'),
        ([0.0, 2.0], [0.0, 0.0], 'closed-form'),
        ([0.0], [0.0], 'closed-form'),
    ])
    def test_rejects(self, grid, values, provenance):
        with pytest.raises(ValidationError):
            ConjugateFunction(grid, values, provenance)


class TestLargeDeviations:
    def test_cube_interval(self):
        seq = cube_intrinsic_sequence(1.0, 256)
        conj = cube_lambda_star(1.0)
        lhs, rhs, ok = ldp_upper_check(seq, (0.4, 0.6), 256, conj)
        assert ok
        expected_rhs = -(0.6 * math.log(0.6) + 0.4 * math.log(0.4) - 0.6 * math.log(2.0))
        assert rhs == pytest.approx(expected_rhs, abs=1e-8)
        assert abs(lhs - rhs) <= math.log(257) / 256

    def test_whole_range_is_log_total_mass(self):
        seq = cube_intrinsic_sequence(1.0, 64)
        lhs, rhs, ok = ldp_upper_check(seq, (0.0, 1.0), 64, cube_lambda_star(1.0))
        assert ok
        assert lhs == pytest.approx(math.log(3.0), abs=1e-12)
        assert rhs == pytest.approx(math.log(3.0), abs=1e-8)

    def test_interpolated_lambda_star(self, cube_512, cube_lambda_512):
        _, _, ok = ldp_upper_check(cube_512, (0.2, 0.5), 512, cube_lambda_512)
        assert ok

    def test_rejects(self):
        seq = cube_intrinsic_sequence(1.0, 4)
        with pytest.raises(ValidationError):
            ldp_upper_check(seq, (0.6, 0.4), 4, cube_lambda_star(1.0))
        with pytest.raises(ValidationError):
            ldp_upper_check(seq, (0.3, 0.45), 4, cube_lambda_star(1.0))


class TestEll:
    @pytest.mark.parametrize('nu', [0.01, 0.1, 1.0, 10.0])
    def test_closed_form_matches_cube(self, tol, nu):
        assert ell_general(cube_lambda_star(1.0), nu, tol) == pytest.approx(ell_cube(1.0, nu, tol).ell, abs=1e-3)

    @pytest.mark.parametrize('nu', [0.01, 0.1, 1.0, 10.0])
    def test_estimate_matches_cube(self, tol, cube_lambda_512, nu):
        assert ell_general(cube_lambda_512, nu, tol) == pytest.approx(ell_cube(1.0, nu, tol).ell, abs=1e-2)

    def test_argmax_shrinks_with_noise(self, tol, cube_lambda_512):
        thetas = [ell_general_argmax(cube_lambda_512, nu, tol)[0] for nu in (1.0, 1e-2, 1e-4)]
        assert thetas[0] > thetas[1] > thetas[2] > 0.0

    def test_continuous_at_zero(self, tol):
        assert ell_general(cube_lambda_star(1.0), 1e-10, tol) == pytest.approx(math.log(2.0), abs=5e-3)

    def test_degenerate_lambda_star(self, tol):
        nu = 0.1
        flat = ConjugateFunction(np.linspace(0.0, 1.0, 33), np.zeros(33), 'closed-form', exact=lambda x: 0.0 * x)
        theta, ell = ell_general_argmax(flat, nu, tol)
        assert theta == pytest.approx(2 * math.pi * nu, abs=1e-5)
        assert ell == pytest.approx(math.pi * nu, abs=1e-9)

    @pytest.mark.slow
    def test_degenerate_estimate_is_flat(self):
        estimate = lambda_star_estimate(degenerate_sequence(512), 129)
        assert np.max(np.abs(estimate.values)) <= 2e-2

    def test_rejects(self, tol):
        partial = ConjugateFunction([0.2, 1.0], [0.0, 0.0], 'closed-form')
        with pytest.raises(ValidationError):
            ell_general(partial, 1.0, tol)
        with pytest.raises(ValidationError):
            ell_general(cube_lambda_star(1.0), 0.0, tol)
