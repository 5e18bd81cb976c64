"""
Seeded randomness for the pipelines: probe vectors, population models and
synthetic data.

All draws come from ``numpy.random.Philox`` (64-bit counter-based), so a seed
fixes the output on every platform. Gaussians use Box–Muller on the
generator's uniforms rather than numpy's ziggurat.
"""
import logging
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.optimize import bisect

from spectral_spike.errors import InvalidSpecError
from spectral_spike.schemas import SpikedModelSpec
from spectral_spike.storage.matrix_store import DataMatrix

logger = logging.getLogger(__name__)

QUANTILE_PANELS = 10_000


def make_rng(seed: int) -> np.random.Generator:
    """Philox generator for ``seed`` (any 64-bit unsigned integer)."""
    return np.random.Generator(np.random.Philox(int(seed)))


def standard_normal(rng: np.random.Generator, size: int | tuple[int, ...]) -> np.ndarray:
    """iid N(0, 1) draws via Box–Muller, filled in C order."""
    shape = (size,) if isinstance(size, (int, np.integer)) else tuple(size)
    count = int(np.prod(shape, dtype=np.int64))
    pairs = (count + 1) // 2
    u1 = 1.0 - rng.random(pairs)  # (0, 1]
    u2 = rng.random(pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    z = np.empty(2 * pairs, dtype=np.float64)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)
    return z[:count].reshape(shape)


def sample_probe(n: int, seed: int) -> np.ndarray:
    """
    Uniform unit vector on the sphere S^{n-1}: normalized iid standard normals.

    Args:
        n (int): Dimension, n ≥ 1.
        seed (int): Generator seed.

    Returns:
        np.ndarray: Vector with ‖v‖₂ = 1 up to rounding.
    """
    if n < 1:
        raise InvalidSpecError(f"probe dimension must be positive, got {n}")
    rng = make_rng(seed)
    v = standard_normal(rng, n)
    norm = np.linalg.norm(v)
    while norm == 0.0:  # probability zero, kept for n=1 completeness
        v = standard_normal(rng, n)
        norm = np.linalg.norm(v)
    return v / norm


# ── Population models ─────────────────────────────────────────
def gap_study_density(x: np.ndarray) -> np.ndarray:
    """Unnormalized bulk density on [0.1, 4] used for the deterministic-Σ study."""
    x = np.asarray(x, dtype=np.float64)
    inside = (x > 0.1) & (x < 4.0)
    xs = np.where(inside, x, 1.0)
    vals = (2.0 * (3.5 - xs) ** 3 + xs) / (4.5 - xs) ** 2 * np.sqrt(4.0 - xs) * np.sqrt(xs - 0.1)
    return np.where(inside, vals, 0.0)


GAP_STUDY_SUPPORT = (0.1, 4.0)


def bulk_quantiles(density: Callable[[np.ndarray], np.ndarray], lower: float, upper: float, n: int,
                   panels: int = QUANTILE_PANELS) -> list[float]:
    """
    The (i − 1/2)/n quantiles, i = 1..n, of an unnormalized density on [lower, upper].

    The CDF is the composite Simpson integral on ``panels`` panels; each
    quantile is found by bisection on the tabulated CDF.
    """
    if not upper > lower:
        raise InvalidSpecError(f"empty support [{lower}, {upper}]")
    if n < 1:
        raise InvalidSpecError(f"need at least one quantile, got {n}")
    grid = np.linspace(lower, upper, panels + 1)
    cdf = cumulative_simpson(density(grid), x=grid, initial=0.0)
    total = cdf[-1]
    if not total > 0.0:
        raise InvalidSpecError("density integrates to zero on its support")
    cdf = np.maximum.accumulate(cdf / total)

    def cdf_at(x: float) -> float:
        return float(np.interp(x, grid, cdf))

    levels = (np.arange(1, n + 1) - 0.5) / n
    quantiles = [bisect(lambda x, p=p: cdf_at(x) - p, lower, upper, xtol=1e-14) for p in levels]
    return quantiles


def population_diagonal(spec: SpikedModelSpec) -> np.ndarray:
    """Diagonal of Σ: bulk sorted descending, leading entries replaced by the spikes."""
    if spec.bulk_quantiles is not None:
        bulk = np.sort(np.asarray(spec.bulk_quantiles, dtype=np.float64))[::-1].copy()
    else:
        bulk = np.full(spec.n, float(spec.sigma2))
    r = len(spec.spikes)
    if r:
        bulk[:r] = np.asarray(spec.spikes, dtype=np.float64)
    return bulk


def _entries(rng: np.random.Generator, spec: SpikedModelSpec) -> np.ndarray:
    shape = (spec.n, spec.m)
    if spec.distribution == "gaussian":
        return standard_normal(rng, shape)
    if spec.distribution == "rademacher":
        return rng.integers(0, 2, size=shape).astype(np.float64) * 2.0 - 1.0
    if spec.distribution == "beta":
        # Beta(1/2, 1/2) has mean 1/2 and variance 1/8
        return (rng.beta(0.5, 0.5, size=shape) - 0.5) * np.sqrt(8.0)
    raise InvalidSpecError(f"unknown entry distribution {spec.distribution!r}")


def simulate(spec: SpikedModelSpec) -> DataMatrix:
    """
    Draw Y = Σ^{1/2} X for the given model.

    X has iid mean-0, variance-1 entries, so the matching operator scaling is
    ``one_over_m``. Identical specs give bitwise-identical matrices.
    """
    sigma = population_diagonal(spec)
    rng = make_rng(spec.seed)
    x = _entries(rng, spec)
    y = np.sqrt(sigma)[:, None] * x
    logger.info(f"🎲 Simulated {spec.n}×{spec.m} data ({spec.distribution}, {len(spec.spikes)} spikes, seed={spec.seed})")
    return DataMatrix(y)
