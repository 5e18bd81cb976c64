"""
Statistical acceptance runs at desk scale. Deselect with ``-m "not slow"``.
"""
import time

import numpy as np
import pytest
from scipy.linalg import eigh

import main
from spectral_spike.schemas import AveragingConfig, DetectionConfig, SpikedModelSpec
from spectral_spike.services.estimate_service.pipelines import (
    cholesky_extension,
    detect_spikes,
    detect_trials,
    estimate_asd,
)
from spectral_spike.services.lanczos_service.lanczos import default_rule
from spectral_spike.services.operator_service.covariance import SpikedModelOperator, make_operator
from spectral_spike.services.operator_service.sampling import sample_probe, simulate
from spectral_spike.services.reference_service.oracles import (
    DeformedMPModel,
    mp_edges,
    outlier_location,
    weighted_density_error,
)

pytestmark = pytest.mark.slow

SEEDS = range(20)


def isotropic(n: int, seed: int, sigma2: float = 1.0, spikes=()) -> SpikedModelOperator:
    return SpikedModelOperator(SpikedModelSpec(n=n, m=2 * n, sigma2=sigma2, spikes=list(spikes), seed=seed))


def test_tail_converges_to_mp_entries():
    op = isotropic(2000, seed=21)
    ext, _ = cholesky_extension(op, sample_probe(op.dim, 0), default_rule(op.dim))
    assert ext.tail_alpha == pytest.approx(1.0, abs=0.1)
    assert ext.tail_beta == pytest.approx(np.sqrt(0.5), abs=0.1)


def test_averaged_density_tracks_mp_law():
    op = isotropic(2000, seed=22)
    asd = estimate_asd(op, AveragingConfig(k=5, q=3, seed=0), default_rule(op.dim))
    assert asd.gamma_plus == pytest.approx((1.0 + np.sqrt(0.5)) ** 2, abs=0.1)
    err = weighted_density_error(asd.density, asd.gamma_minus, asd.gamma_plus, 1.0, 0.5)
    assert err < 0.1


def test_support_edges_within_root_n():
    n = 2000
    g_minus, g_plus = mp_edges(1.0, 0.5)
    tol = 5.0 / np.sqrt(n)
    hits = 0
    for seed in SEEDS:
        op = isotropic(n, seed)
        asd = estimate_asd(op, AveragingConfig(k=5, q=3, seed=seed), default_rule(n))
        hits += abs(asd.gamma_minus - g_minus) <= tol and abs(asd.gamma_plus - g_plus) <= tol
    assert hits >= 18


def test_density_error_shrinks_with_dimension():
    medians = []
    for n in (250, 2000):
        errors = []
        for seed in range(10):
            op = isotropic(n, seed)
            asd = estimate_asd(op, AveragingConfig(k=25, q=max(1, int(0.5 * np.log(n))), seed=seed),
                               default_rule(n))
            errors.append(weighted_density_error(asd.density, asd.gamma_minus, asd.gamma_plus, 1.0, 0.5))
        medians.append(float(np.median(errors)))
    assert medians[1] < medians[0]


def test_null_model_rarely_reports_spikes():
    report = detect_trials(lambda seed: isotropic(1000, seed), DetectionConfig(), AveragingConfig(k=1, q=3, seed=100),
                           default_rule, trials=20)
    assert report.r_hats.count(0) >= 18


def test_three_spikes_over_a_flat_bulk():
    n, m = 1000, 2000
    model = DeformedMPModel.isotropic(1.5, n, m)
    expected = np.mean([outlier_location(model, s).location for s in (5.0, 5.0, 4.5)])
    hits = 0
    pole_means = []
    for seed in SEEDS:
        data = simulate(SpikedModelSpec(n=n, m=m, sigma2=1.5, spikes=[5.0, 5.0, 4.5], seed=seed))
        op = make_operator(data, "one_over_m")
        report = detect_spikes(op, DetectionConfig(), AveragingConfig(k=1, q=3, seed=seed), default_rule(n))
        if report.r_hat != 3:
            continue
        hits += 1
        y = data.entries
        top = eigh(y @ y.T / m, eigvals_only=True, subset_by_index=[n - 3, n - 1])
        poles = np.asarray(report.poles[0])
        np.testing.assert_allclose(poles, top, atol=0.15)
        pole_means.append(poles.mean())
    assert hits >= 17
    # poles follow the sample outliers, which scatter around the population locations
    assert np.mean(pole_means) == pytest.approx(expected, abs=0.15)


@pytest.mark.parametrize("third, low, high", [(1.5, 1.9, 2.1), (2.75, 2.8, 3.1)])
def test_third_spike_around_the_bbp_threshold(third, low, high):
    report = detect_trials(lambda seed: isotropic(1000, seed, spikes=(6.0, 5.0, third)), DetectionConfig(),
                           AveragingConfig(k=1, q=3, seed=0), default_rule, trials=20)
    assert low <= report.mean_r_hat <= high


def test_detection_time_scales_with_data_size(capsys):
    def timed(n: int) -> float:
        start = time.perf_counter()
        code = main.main(["detect", "--n", str(n), "--m", str(2 * n), "--sigma2", "1.5", "--spikes", "5,5,4.5"])
        elapsed = time.perf_counter() - start
        assert code == 0
        capsys.readouterr()
        return elapsed

    small = timed(1000)
    assert timed(4000) < 20.0 * small
