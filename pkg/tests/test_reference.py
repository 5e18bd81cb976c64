"""
Tests for the closed-form reference laws.
"""
import numpy as np
import pytest

from spectral_spike.errors import InvalidSpecError, OracleError
from spectral_spike.services.reference_service.oracles import (
    DeformedMPModel,
    companion_to_covariance,
    density_mass,
    dmp_edges,
    one_spike_pole,
    one_spike_supercritical,
    one_spike_transform,
    one_spike_weight,
    f_dmp,
    m_dmp_solve,
    mp_density,
    mp_edges,
    mp_stieltjes,
    outlier_location,
    weighted_density_error,
)


class TestDeformedMP:
    def test_f_at_i(self):
        model = DeformedMPModel.isotropic(1.0, n=4, m=4)
        assert f_dmp(model, 1j) == pytest.approx(0.5 + 0.5j, abs=1e-15)

    def test_f_conjugate_symmetry(self):
        model = DeformedMPModel(np.array([3.0, 1.0, 1.0, 0.5]), m=8)
        m = np.array([0.3 + 0.7j, -2.0 + 0.1j])
        np.testing.assert_allclose(f_dmp(model, m.conj()), np.conj(f_dmp(model, m)), rtol=1e-15)

    def test_f_poles(self):
        model = DeformedMPModel.isotropic(2.0, n=4, m=8)
        with pytest.raises(OracleError):
            f_dmp(model, 0.0)
        with pytest.raises(OracleError):
            f_dmp(model, -0.5)

    def test_model_bounds(self):
        with pytest.raises(InvalidSpecError):
            DeformedMPModel(np.array([1.0, 5000.0]), m=4)

    def test_solver_matches_mp_law(self):
        c = 0.5
        model = DeformedMPModel.isotropic(1.0, n=50, m=100)
        rng = np.random.default_rng(8)
        for z in rng.uniform(-1.0, 4.0, 20) + 1j * rng.uniform(0.05, 2.0, 20):
            m = m_dmp_solve(model, z)
            assert m.imag > 0.0
            assert companion_to_covariance(m, z, c) == pytest.approx(mp_stieltjes(1.0, c, z), abs=1e-10)

    def test_solver_rejects_real_z(self):
        with pytest.raises(OracleError):
            m_dmp_solve(DeformedMPModel.isotropic(1.0, 4, 8), 1.0)

    @pytest.mark.parametrize("c, n, m", [(0.5, 50, 100), (2.0, 100, 50)])
    def test_isotropic_edges(self, c, n, m):
        edges = dmp_edges(DeformedMPModel.isotropic(1.0, n, m))
        np.testing.assert_allclose([edges.gamma_minus, edges.gamma_plus], mp_edges(1.0, c), rtol=1e-9)
        assert edges.bbp_threshold == pytest.approx(1.0 + np.sqrt(c), rel=1e-9)


class TestOutliers:
    def test_isotropic_bulk(self):
        model = DeformedMPModel.isotropic(1.5, n=100, m=200)
        out = outlier_location(model, 5.0)
        assert out.location == pytest.approx(6.0714285714, abs=1e-9)
        assert out.supercritical
        assert out.threshold == pytest.approx(1.5 * (1.0 + np.sqrt(0.5)), rel=1e-9)

    def test_one_spike_example(self):
        out = outlier_location(DeformedMPModel.isotropic(1.0, 100, 200), 2.2)
        assert out.location == pytest.approx(3.1166666667, abs=1e-9)
        assert out.location == pytest.approx(one_spike_pole(2.2, 0.5), rel=1e-14)

    def test_spike_at_threshold_is_subcritical(self):
        out = outlier_location(DeformedMPModel.isotropic(1.0, 100, 200), 1.0 + np.sqrt(0.5))
        assert not out.supercritical


class TestMarchenkoPastur:
    def test_square_case_value(self):
        assert mp_density(1.0, 1.0, 2.0) == pytest.approx(1.0 / (2.0 * np.pi), rel=1e-14)

    def test_zero_outside(self):
        _, g_plus = mp_edges(1.0, 0.5)
        assert mp_density(1.0, 0.5, g_plus + 1.0) == 0.0
        assert mp_density(1.0, 0.5, 0.01) == 0.0

    def test_unit_mass(self):
        g_minus, g_plus = mp_edges(2.0, 0.3)
        mass = density_mass(lambda x: mp_density(2.0, 0.3, x), g_minus, g_plus)
        assert mass == pytest.approx(1.0, abs=1e-8)

    def test_law_is_not_symmetric(self):
        g_minus, g_plus = mp_edges(1.0, 0.5)
        mid = 0.5 * (g_minus + g_plus)
        assert mp_density(1.0, 0.5, mid - 0.5) != pytest.approx(mp_density(1.0, 0.5, mid + 0.5), rel=1e-3)

    def test_weighted_error_of_exact_law(self):
        g_minus, g_plus = mp_edges(1.0, 0.5)
        err = weighted_density_error(lambda x: mp_density(1.0, 0.5, x), g_minus, g_plus, 1.0, 0.5)
        assert err < 1e-12


class TestOneSpikeExample:
    def test_values(self):
        assert one_spike_supercritical(2.2, 0.5)
        assert one_spike_pole(2.2, 0.5) == pytest.approx(3.1166666667, abs=1e-9)
        assert one_spike_weight(2.2, 0.5) == pytest.approx(0.4607843137, abs=1e-9)

    def test_subcritical(self):
        assert not one_spike_supercritical(1.4, 0.5)
        assert one_spike_weight(1.4, 0.5) == 0.0

    def test_residue(self):
        x0 = one_spike_pole(2.2, 0.5)
        eps = 1e-7
        residue = eps * one_spike_transform(2.2, 0.5, x0 + eps)
        assert residue.real == pytest.approx(-one_spike_weight(2.2, 0.5), abs=1e-6)

    def test_subcritical_transform_is_regular(self):
        x0 = one_spike_pole(1.4, 0.5)
        value = one_spike_transform(1.4, 0.5, x0 + 1e-7)
        assert np.isfinite(value) and abs(value) < 10.0

    def test_rejects_small_spike(self):
        with pytest.raises(InvalidSpecError):
            one_spike_transform(0.9, 0.5, 1j)
