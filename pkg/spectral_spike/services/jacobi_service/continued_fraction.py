"""
Stieltjes transform and density of an extended Cholesky operator.

The Toeplitz tail has a closed-form transform; the prefix is folded in by
the backward continued-fraction recursion

    m_i(z) = 1 / (α_i² − z − α_i²β_i² · m_{i+1}(z) / (1 + β_i² m_{i+1}(z))),

so m₀ is exact for the semi-infinite operator and densities come from the
boundary value on the real axis without any smoothing parameter.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from spectral_spike.errors import NegativeDensityError, PoleHitError, PoleWeightError
from spectral_spike.schemas import PoleBackend
from spectral_spike.services.jacobi_service.cholesky import ExtendedCholesky
from spectral_spike.services.poles_service.connection import poles_connection
from spectral_spike.services.poles_service.finite_section import default_section_size, finite_section_spectrum

logger = logging.getLogger(__name__)

POLE_HIT_TOL = 1e-14
NEGATIVE_DENSITY_TOL = 1e-12
WEIGHT_SUM_TOL = 1e-8


def _as_complex(z) -> tuple[np.ndarray, bool]:
    arr = np.asarray(z, dtype=np.complex128)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr).copy()
    # boundary values are taken from the upper half-plane: force +0.0
    on_axis = arr.imag == 0.0
    arr[on_axis] = arr.real[on_axis] + 0j
    return arr, scalar


def tail_transform(tail_alpha: float, tail_beta: float, z) -> np.ndarray:
    """
    Closed-form transform of the pure Toeplitz tail (ᾱ, β̄):

        m(z) = (ᾱ² − z − β̄² + √(z−γ₊)√(z−γ₋)) / (2zβ̄²),

    with principal square roots; the product is analytic off [γ₋, γ₊] and
    gives the Herglotz branch. A sign flip is applied where the result
    contradicts Im m ≥ 0 on the upper half-plane or m > 0 on the negative axis.
    """
    z, scalar = _as_complex(z)
    a2, b2 = tail_alpha**2, tail_beta**2
    g_minus, g_plus = (tail_alpha - tail_beta) ** 2, (tail_alpha + tail_beta) ** 2
    root = np.sqrt(z - g_plus) * np.sqrt(z - g_minus)
    at_zero = z == 0
    safe_z = np.where(at_zero, 1.0, z)
    m = (a2 - safe_z - b2 + root) / (2.0 * safe_z * b2)
    alt = (a2 - safe_z - b2 - root) / (2.0 * safe_z * b2)
    scale = np.maximum(np.abs(m), 1.0)
    flip = ((z.imag > 0) & (m.imag < -1e-14 * scale)) | ((z.imag == 0) & (z.real < 0) & (m.real < 0))
    m = np.where(flip, alt, m)
    if np.any(at_zero):
        if a2 <= b2:
            raise PoleHitError("tail transform evaluated at the atom z = 0")
        # m(0) = ∫ dμ/x solves m·α² = 1 + β²·m
        m = np.where(at_zero, 1.0 / (a2 - b2) + 0j, m)
    return m[0] if scalar else m


def stieltjes_cf(ext: ExtendedCholesky, z):
    """
    Evaluate m̂₀(z) for the extended operator.

    Args:
        ext (ExtendedCholesky): Prefix plus tail.
        z (complex | array): Points with Im z ≥ 0; real points must avoid the
            support interior and the poles.

    Raises:
        PoleHitError: A denominator vanished (within 1e-14) at a real point.

    Returns:
        complex | np.ndarray: m̂₀ at each point (scalar in, scalar out).
    """
    z, scalar = _as_complex(z)
    m = np.atleast_1d(tail_transform(ext.tail_alpha, ext.tail_beta, z))
    real_points = z.imag == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        for i in range(ext.prefix_length - 1, -1, -1):
            a2 = ext.prefix_alpha[i] ** 2
            b2 = ext.prefix_beta[i] ** 2
            ratio = m / (1.0 + b2 * m)
            denom = a2 - z - a2 * b2 * ratio
            hit = real_points & ~(np.abs(denom) > POLE_HIT_TOL * max(1.0, a2))
            if np.any(hit):
                where = z[hit][0].real
                raise PoleHitError(f"continued fraction hit a pole at λ={where!r} (level {i})")
            m = 1.0 / denom
    return m[0] if scalar else m


def density(ext: ExtendedCholesky, lam):
    """
    Density Im m̂₀(λ + i0⁺)/π on (γ̂₋, γ̂₊), 0 elsewhere.

    Round-off negatives down to −1e-12 are clamped to 0.

    Raises:
        NegativeDensityError: The boundary value is more negative than the clamp.
        PoleHitError: Propagated from ``stieltjes_cf``.
    """
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=np.float64))
    out = np.zeros(lam_arr.shape)
    inside = (lam_arr > ext.gamma_minus) & (lam_arr < ext.gamma_plus)
    if np.any(inside):
        values = np.atleast_1d(stieltjes_cf(ext, lam_arr[inside] + 0j)).imag / np.pi
        if np.any(values < -NEGATIVE_DENSITY_TOL):
            worst = float(values.min())
            raise NegativeDensityError(f"density {worst:.3e} below the round-off clamp")
        out[inside] = np.maximum(values, 0.0)
    return float(out[0]) if np.ndim(lam) == 0 else out


@dataclass(frozen=True)
class SpectralEstimate:
    """Estimated measure: a.c. part on [γ̂₋, γ̂₊] plus atoms at ``poles`` with masses ``weights``."""

    extension: ExtendedCholesky = field(repr=False)
    gamma_minus: float
    gamma_plus: float
    poles: np.ndarray
    weights: np.ndarray
    backend: str = "connection_coefficients"

    def transform(self, z):
        return stieltjes_cf(self.extension, z)

    def density(self, lam):
        return density(self.extension, lam)

    def poles_above(self, threshold: float) -> np.ndarray:
        return self.poles[self.poles > threshold]


def estimate_spectrum(ext: ExtendedCholesky, backend: PoleBackend = "connection_coefficients",
                      section_size: Optional[int] = None) -> SpectralEstimate:
    """
    Bundle the support, the transform and the atoms of an extension.

    The connection-coefficient backend is exact; when its weight check fails
    the finite-section eigenpairs are used instead and a warning is logged.
    """
    used = backend
    if backend == "connection_coefficients":
        try:
            locations, weights = poles_connection(ext)
        except PoleWeightError as e:
            logger.warning(f"⚠️  Connection-coefficient weights rejected ({e}); falling back to finite section")
            used = "finite_section"
    if used == "finite_section":
        size = section_size or default_section_size(ext)
        locations, weights = finite_section_spectrum(ext, size, margin=0.0)

    locations = np.asarray(locations, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.sum() > 1.0 + WEIGHT_SUM_TOL:
        logger.warning(f"⚠️  Pole weights sum to {weights.sum():.6f} > 1")
    locations.setflags(write=False)
    weights.setflags(write=False)
    return SpectralEstimate(
        extension=ext,
        gamma_minus=ext.gamma_minus,
        gamma_plus=ext.gamma_plus,
        poles=locations,
        weights=weights,
        backend=used,
    )
