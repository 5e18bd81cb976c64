import numpy as np
import pytest

from spectral_spike.schemas import SpikedModelSpec
from spectral_spike.services.jacobi_service.cholesky import ExtendedCholesky
from spectral_spike.services.operator_service.covariance import SpikedModelOperator
from spectral_spike.services.reference_service.oracles import one_spike_extension

ELL = 2.2
RATIO = 0.5


@pytest.fixture
def mp_tail() -> ExtendedCholesky:
    """Pure Toeplitz tail of the MP law with σ² = 1, c = 0.5."""
    return ExtendedCholesky(prefix_alpha=[], prefix_beta=[], tail_alpha=1.0, tail_beta=np.sqrt(RATIO))


@pytest.fixture
def one_spike() -> ExtendedCholesky:
    return one_spike_extension(ELL, RATIO)


@pytest.fixture
def subcritical_spike() -> ExtendedCholesky:
    return one_spike_extension(1.4, RATIO)


@pytest.fixture(scope="session")
def spiked_operator() -> SpikedModelOperator:
    spec = SpikedModelSpec(n=200, m=400, sigma2=1.0, spikes=[6.0, 5.0], seed=11)
    return SpikedModelOperator(spec)


@pytest.fixture(scope="session")
def null_operator() -> SpikedModelOperator:
    return SpikedModelOperator(SpikedModelSpec(n=200, m=400, sigma2=1.0, seed=3))
