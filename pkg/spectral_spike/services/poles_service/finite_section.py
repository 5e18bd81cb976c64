"""
Finite-section pole estimates: eigenvalues of the K×K truncation of LLᵀ.

Cross-check and fallback for the connection-coefficient backend. The
truncated Jacobi matrix goes to LAPACK through ``eigh_tridiagonal``
(``stev``: implicit QL/QR with Wilkinson shifts for the full spectrum,
``stebz``/``stein`` when eigenvectors above a threshold are requested).
"""
import logging
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal

from spectral_spike.config import DEFAULT_SECTION_MIN
from spectral_spike.errors import EigensolverError, SectionTooSmallError
from spectral_spike.services.jacobi_service.cholesky import ExtendedCholesky

logger = logging.getLogger(__name__)

SECTION_PER_STEP = 20
SECTION_SLACK = 50


def default_section_size(ext: ExtendedCholesky) -> int:
    """K = max(SECTION_MIN, 20·n) with n the Lanczos length behind ``ext``."""
    return max(DEFAULT_SECTION_MIN, SECTION_PER_STEP * ext.lanczos_length)


def _section(ext: ExtendedCholesky, size: Optional[int]) -> tuple[int, np.ndarray, np.ndarray]:
    size = default_section_size(ext) if size is None else int(size)
    if size < ext.lanczos_length + SECTION_SLACK:
        raise SectionTooSmallError(f"section size {size} is below n + {SECTION_SLACK} = {ext.lanczos_length + SECTION_SLACK}")
    diag, offdiag = ext.jacobi_section(size)
    return size, diag, offdiag


def tridiagonal_eigenvalues(diag: np.ndarray, offdiag: np.ndarray) -> np.ndarray:
    """All eigenvalues of a symmetric tridiagonal matrix, ascending."""
    if len(diag) == 1:
        return np.asarray(diag, dtype=np.float64).copy()
    try:
        return eigh_tridiagonal(np.asarray(diag, dtype=np.float64), np.asarray(offdiag, dtype=np.float64),
                                eigvals_only=True, lapack_driver="stev")
    except LinAlgError as e:
        raise EigensolverError(f"tridiagonal eigensolver failed at size {len(diag)}: {e}") from e


def poles_finite_section(ext: ExtendedCholesky, size: Optional[int] = None, margin: float = 0.0) -> np.ndarray:
    """
    All eigenvalues of the K×K truncation that exceed γ̂₊ + ``margin``, ascending.

    Args:
        ext (ExtendedCholesky): The extended factor.
        size (int | None): Section size K ≥ n + 50; defaults to max(2000, 20·n).
        margin (float): Caller-supplied offset above γ̂₊ (the detection threshold).

    Raises:
        SectionTooSmallError: K < n + 50.
        EigensolverError: LAPACK did not converge.
    """
    size, diag, offdiag = _section(ext, size)
    values = tridiagonal_eigenvalues(diag, offdiag)
    found = np.sort(values[values > ext.gamma_plus + margin])
    logger.debug(f"🔎 Finite section K={size}: {found.size} eigenvalue(s) above γ̂₊+{margin:g}")
    return found


def finite_section_spectrum(ext: ExtendedCholesky, size: Optional[int] = None,
                            margin: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """
    Eigenvalues above γ̂₊ + ``margin`` with their spectral weights, the squared
    first components of the normalized eigenvectors.
    """
    size, diag, offdiag = _section(ext, size)
    lower = ext.gamma_plus + margin
    # Gershgorin bound on the largest eigenvalue
    upper = float(np.max(diag) + 2.0 * np.max(offdiag, initial=0.0)) + 1.0
    if upper <= lower:
        return np.empty(0), np.empty(0)
    try:
        values, vectors = eigh_tridiagonal(diag, offdiag, select="v", select_range=(lower, upper))
    except LinAlgError as e:
        raise EigensolverError(f"tridiagonal eigensolver failed at K={size}: {e}") from e
    order = np.argsort(values)
    return values[order], vectors[0, order] ** 2
