"""
Tests for the two pole backends: connection coefficients (exact, via the
Toeplitz symbol) and finite sections of the extended Jacobi operator.
"""
import numpy as np
import pytest

from spectral_spike.errors import JoukowskiDomainError, PoleWeightError, SectionTooSmallError
from spectral_spike.services.jacobi_service.cholesky import ExtendedCholesky
from spectral_spike.services.jacobi_service.continued_fraction import stieltjes_cf
from spectral_spike.services.poles_service.connection import (
    ToeplitzPlusFiniteRank,
    connection_coefficients,
    joukowski_map,
    pole_weights,
    poles_connection,
    symbol_roots,
)
from spectral_spike.services.poles_service.finite_section import (
    finite_section_spectrum,
    poles_finite_section,
    tridiagonal_eigenvalues,
)
from spectral_spike.services.reference_service.oracles import one_spike_pole, one_spike_weight

ELL = 2.2
RATIO = 0.5


def single_bump(d: float) -> ToeplitzPlusFiniteRank:
    """Free Jacobi operator (a=0, b=1/2) with the first diagonal entry set to d."""
    return ToeplitzPlusFiniteRank(diag=[d], offdiag=[0.5], tail_diag=0.0, tail_offdiag=0.5)


def random_extension(rng: np.random.Generator, rank: int, spread: float = 0.3) -> ExtendedCholesky:
    alpha = 1.0 + 0.2 * rng.random()
    beta = np.sqrt(RATIO) * (1.0 + 0.2 * rng.random())
    prefix_alpha = alpha * (1.0 + spread * rng.uniform(-1.0, 1.0, rank))
    prefix_beta = beta * (1.0 + spread * rng.uniform(-1.0, 1.0, rank))
    return ExtendedCholesky(prefix_alpha, prefix_beta, alpha, beta)


class TestConnectionCoefficients:
    def test_zero_rank_is_identity(self):
        jt = ToeplitzPlusFiniteRank(diag=[1.5], offdiag=[0.7], tail_diag=1.5, tail_offdiag=0.7)
        conn = connection_coefficients(jt)
        assert jt.effective_length() == 0
        np.testing.assert_array_equal(conn.coefficients, np.eye(3))
        np.testing.assert_array_equal(conn.symbol, [1.0, 0.0])
        assert symbol_roots(conn.symbol).size == 0

    def test_upper_triangular_with_product_diagonal(self):
        jt = ToeplitzPlusFiniteRank(diag=[2.0, 1.2, 0.9], offdiag=[0.4, 0.6, 0.55], tail_diag=1.0, tail_offdiag=0.5)
        c = connection_coefficients(jt).coefficients
        np.testing.assert_array_equal(c, np.triu(c))
        expected = np.cumprod([1.0] + [0.5 / jt.offdiag_at(j) for j in range(c.shape[1] - 1)])
        np.testing.assert_allclose(np.diag(c), expected, rtol=1e-14)

    def test_effective_length_ignores_trailing_tail_entries(self):
        jt = ToeplitzPlusFiniteRank(diag=[2.0, 1.0, 1.0], offdiag=[0.5, 0.5, 0.5], tail_diag=1.0, tail_offdiag=0.5)
        assert jt.effective_length() == 1
        assert connection_coefficients(jt).symbol.size == 4


class TestSymbolRoots:
    def test_constant(self):
        assert symbol_roots([1.0]).size == 0

    def test_root_outside_disk(self):
        assert symbol_roots([-2.0, 1.0]).size == 0

    def test_root_inside_disk(self):
        np.testing.assert_allclose(symbol_roots([-0.5, 1.0]), [0.5], rtol=1e-14)

    def test_complex_roots_dropped(self):
        # z² + 0.25 has roots ±0.5i
        assert symbol_roots([0.25, 0.0, 1.0]).size == 0


class TestJoukowskiMap:
    def test_identity_interval(self):
        assert joukowski_map(0.5, -1.0, 1.0) == pytest.approx(1.25)

    def test_affine_interval(self):
        assert joukowski_map(-0.5, 0.0, 4.0) == pytest.approx(-0.5)

    def test_array_input(self):
        np.testing.assert_allclose(joukowski_map(np.array([0.5, -0.5]), -1.0, 1.0), [1.25, -1.25])

    @pytest.mark.parametrize("z", [0.0, 1.0, -1.0, 1.5])
    def test_domain(self, z):
        with pytest.raises(JoukowskiDomainError):
            joukowski_map(z, -1.0, 1.0)


class TestSingleBump:
    def test_pole_and_weight(self):
        jt = single_bump(1.0)
        conn = connection_coefficients(jt)
        roots = symbol_roots(conn.symbol)
        np.testing.assert_allclose(roots, [0.5], rtol=1e-12)
        location = joukowski_map(roots, jt.gamma_minus, jt.gamma_plus)
        weights = pole_weights(conn.symbol, roots, jt.gamma_minus, jt.gamma_plus)
        np.testing.assert_allclose(location, [1.25], rtol=1e-12)
        np.testing.assert_allclose(weights, [0.75], rtol=1e-12)

    @pytest.mark.parametrize("d", [0.8, 1.0, 2.0, -1.5])
    def test_matches_dense_eigenpairs(self, d):
        size = 400
        jt = single_bump(d)
        dense = np.diag([d] + [0.0] * (size - 1)) + 0.5 * (np.eye(size, k=1) + np.eye(size, k=-1))
        values, vectors = np.linalg.eigh(dense)
        outside = np.abs(values) > 1.0 + 1e-6
        conn = connection_coefficients(jt)
        roots = symbol_roots(conn.symbol)
        np.testing.assert_allclose(joukowski_map(roots, -1.0, 1.0), values[outside], rtol=1e-10)
        np.testing.assert_allclose(pole_weights(conn.symbol, roots, -1.0, 1.0), vectors[0, outside] ** 2, rtol=1e-8)

    def test_no_pole_for_small_bump(self):
        # |d| ≤ b leaves the spectrum purely continuous
        assert symbol_roots(connection_coefficients(single_bump(0.4)).symbol).size == 0

    def test_no_roots_gives_no_weights(self):
        assert pole_weights([1.0], [], -1.0, 1.0).size == 0

    def test_near_double_root_rejected(self):
        with pytest.raises(PoleWeightError):
            pole_weights([0.25, -1.0, 1.0], [0.5, 0.5 + 1e-12], -1.0, 1.0)


class TestPolesConnection:
    def test_pure_tail(self, mp_tail):
        locations, weights = poles_connection(mp_tail)
        assert locations.size == 0 and weights.size == 0

    def test_one_spike(self, one_spike):
        locations, weights = poles_connection(one_spike)
        np.testing.assert_allclose(locations, [one_spike_pole(ELL, RATIO)], rtol=1e-10)
        np.testing.assert_allclose(weights, [one_spike_weight(ELL, RATIO)], rtol=1e-10)
        assert locations[0] == pytest.approx(3.1166666667, abs=1e-9)
        assert weights[0] == pytest.approx(0.4607843137, abs=1e-9)

    def test_subcritical_spike(self, subcritical_spike):
        assert poles_connection(subcritical_spike)[0].size == 0

    def test_matches_finite_section_weights(self, one_spike):
        locations, weights = poles_connection(one_spike)
        fs_locations, fs_weights = finite_section_spectrum(one_spike, 3000)
        np.testing.assert_allclose(fs_locations, locations, atol=1e-10)
        np.testing.assert_allclose(fs_weights, weights, atol=1e-4)

    def test_random_low_rank_agreement(self):
        rng = np.random.default_rng(2024)
        compared = 0
        for _ in range(400):
            if compared == 50:
                break
            ext = random_extension(rng, rank=int(rng.integers(1, 4)), spread=0.6)
            values = tridiagonal_eigenvalues(*ext.jacobi_section(3000))
            outside = values[(values > ext.gamma_plus) | (values < ext.gamma_minus)]
            points = np.sort(np.concatenate([[ext.gamma_minus, ext.gamma_plus], outside]))
            if np.min(np.diff(points)) < 0.05:
                continue
            locations, weights = poles_connection(ext)
            np.testing.assert_allclose(locations, np.sort(outside), atol=1e-6)
            assert np.all(weights > 0.0)
            above = locations > ext.gamma_plus
            fs_locations, fs_weights = finite_section_spectrum(ext, 3000)
            assert fs_locations.size == np.count_nonzero(above)
            np.testing.assert_allclose(fs_locations, locations[above], atol=1e-6)
            np.testing.assert_allclose(fs_weights, weights[above], atol=1e-4)
            compared += 1
        assert compared == 50


class TestTransformAsymptotics:
    @pytest.mark.parametrize("seed", range(5))
    def test_decays_like_minus_one_over_z(self, seed):
        rng = np.random.default_rng(seed)
        ext = random_extension(rng, rank=3)
        scale = max([ext.gamma_plus, *poles_finite_section(ext)])
        for y in (1e3, 1e4, 1e5):
            z = 1j * y
            assert abs(z * stieltjes_cf(ext, z) + 1.0) <= 10.0 * scale / y


def recurrence_block(jt: ToeplitzPlusFiniteRank, cols: int) -> np.ndarray:
    """c_{i,j} for 0 ≤ i, j < cols, one entry at a time from the five-term recurrence."""
    a, b = jt.tail_diag, jt.tail_offdiag
    c = np.zeros((cols + 1, cols))
    c[0, 0] = 1.0
    for j in range(cols - 1):
        for i in range(j + 2):
            value = b * c[i + 1, j] - (jt.diag_at(j) - a) * c[i, j]
            if i > 0:
                value += b * c[i - 1, j]
            if j > 0:
                value -= jt.offdiag_at(j - 1) * c[i, j - 1]
            c[i, j + 1] = value / jt.offdiag_at(j)
    return c[:cols]


class TestConnectionStructure:
    @pytest.fixture(params=range(20))
    def perturbed(self, request) -> ToeplitzPlusFiniteRank:
        rng = np.random.default_rng(100 + request.param)
        return ToeplitzPlusFiniteRank.from_extension(random_extension(rng, rank=3))

    def test_stored_block_matches_recurrence(self, perturbed):
        c = connection_coefficients(perturbed).coefficients
        np.testing.assert_allclose(recurrence_block(perturbed, c.shape[1]), c, atol=1e-12 * np.abs(c).max())

    def test_toeplitz_wedge(self, perturbed):
        n = connection_coefficients(perturbed).perturbation_length
        c = recurrence_block(perturbed, 4 * n + 4)
        tol = 1e-12 * np.abs(c).max()
        for i in range(1, c.shape[0]):
            for j in range(max(i, 2 * n - i), c.shape[1]):
                assert abs(c[i, j] - c[i - 1, j - 1]) <= tol, (i, j)

    def test_first_row_vanishes_beyond_the_wedge(self, perturbed):
        n = connection_coefficients(perturbed).perturbation_length
        c = recurrence_block(perturbed, 4 * n + 4)
        np.testing.assert_allclose(c[0, 2 * n :], 0.0, atol=1e-12 * np.abs(c).max())
        assert c[0, 0] == 1.0

    def test_symbol_degree(self, perturbed):
        conn = connection_coefficients(perturbed)
        assert conn.symbol.size == 2 * conn.perturbation_length


class TestFiniteSection:
    def test_one_by_one(self):
        np.testing.assert_array_equal(tridiagonal_eigenvalues(np.array([2.5]), np.array([])), [2.5])

    def test_three_by_three(self):
        values = tridiagonal_eigenvalues(np.zeros(3), np.ones(2))
        np.testing.assert_allclose(values, [-np.sqrt(2.0), 0.0, np.sqrt(2.0)], atol=1e-14)

    def test_section_too_small(self, one_spike):
        with pytest.raises(SectionTooSmallError):
            poles_finite_section(one_spike, size=10)

    def test_one_spike(self, one_spike):
        np.testing.assert_allclose(poles_finite_section(one_spike), [one_spike_pole(ELL, RATIO)], rtol=1e-10)

    def test_margin_filters(self, one_spike):
        assert poles_finite_section(one_spike, margin=0.5).size == 0

    def test_section_size_does_not_pollute(self, one_spike):
        small = poles_finite_section(one_spike, 500)
        large = poles_finite_section(one_spike, 1000)
        assert small.size == large.size == 1
        np.testing.assert_allclose(small, large, atol=1e-10)

    def test_pure_tail_has_nothing_above_edge(self, mp_tail):
        assert poles_finite_section(mp_tail).size == 0
