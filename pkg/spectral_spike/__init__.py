"""Lanczos-based spectral estimation and spike detection for sample covariance matrices."""
from spectral_spike.errors import SpectralSpikeError
from spectral_spike.schemas import AveragingConfig, DetectionConfig, DetectionReport, SpikedModelSpec
from spectral_spike.services.estimate_service.pipelines import (
    average_cholesky,
    detect_spikes,
    detect_trials,
    estimate_asd,
    estimate_svasd,
)
from spectral_spike.services.jacobi_service.cholesky import ExtendedCholesky, cholesky_tridiag, extend, support_endpoints
from spectral_spike.services.jacobi_service.continued_fraction import density, estimate_spectrum, stieltjes_cf
from spectral_spike.services.lanczos_service.lanczos import JacobiMatrix, StoppingRule, default_rule, lanczos_run
from spectral_spike.services.operator_service.covariance import make_operator
from spectral_spike.services.operator_service.sampling import sample_probe, simulate
from spectral_spike.storage.matrix_store import DataMatrix, load_data, save_data

__all__ = [
    "AveragingConfig",
    "DataMatrix",
    "DetectionConfig",
    "DetectionReport",
    "ExtendedCholesky",
    "JacobiMatrix",
    "SpectralSpikeError",
    "SpikedModelSpec",
    "StoppingRule",
    "average_cholesky",
    "cholesky_tridiag",
    "default_rule",
    "density",
    "detect_spikes",
    "detect_trials",
    "estimate_asd",
    "estimate_spectrum",
    "estimate_svasd",
    "extend",
    "lanczos_run",
    "load_data",
    "make_operator",
    "sample_probe",
    "save_data",
    "simulate",
    "stieltjes_cf",
    "support_endpoints",
]
