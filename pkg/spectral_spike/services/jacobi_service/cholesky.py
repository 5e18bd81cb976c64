"""
Cholesky factors of Jacobi matrices and their constant (Toeplitz) extension.

A positive-definite Jacobi matrix J = LLᵀ has a lower-bidiagonal factor with
diagonal α and sub-diagonal β:

    J[0, 0] = α₀²,   J[i, i] = αᵢ² + βᵢ₋₁²,   J[i, i+1] = αᵢβᵢ.

Freezing the factor at column n−2 gives a semi-infinite operator whose
spectrum is known in closed form.
"""
import logging
from dataclasses import dataclass

import numpy as np

from spectral_spike.errors import ExtensionTooShortError, InvalidSpecError, NotPositiveDefiniteError
from spectral_spike.services.lanczos_service.lanczos import JacobiMatrix

logger = logging.getLogger(__name__)


def _frozen(x) -> np.ndarray:
    arr = np.array(x, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-bidiagonal L: ``alpha`` (length n) on the diagonal, ``beta`` (length n−1) below it."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        alpha, beta = _frozen(self.alpha), _frozen(self.beta)
        if alpha.ndim != 1 or alpha.size < 1 or beta.shape != (alpha.size - 1,):
            raise InvalidSpecError(f"Cholesky factor needs len(beta) = len(alpha) − 1, got {alpha.size}, {beta.size}")
        if np.any(alpha <= 0.0) or np.any(beta <= 0.0):
            raise InvalidSpecError("Cholesky entries must be positive")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def size(self) -> int:
        return self.alpha.size

    def to_jacobi(self) -> JacobiMatrix:
        diag = self.alpha**2
        diag[1:] += self.beta**2
        return JacobiMatrix(diag, self.alpha[:-1] * self.beta)


@dataclass(frozen=True)
class ExtendedCholesky:
    """
    Semi-infinite lower-bidiagonal factor: ``prefix_length`` free columns
    (α₀..α_{p−1}, β₀..β_{p−1}) followed by the constant tail (ᾱ, β̄) forever.
    """

    prefix_alpha: np.ndarray
    prefix_beta: np.ndarray
    tail_alpha: float
    tail_beta: float

    def __post_init__(self):
        pa, pb = _frozen(self.prefix_alpha), _frozen(self.prefix_beta)
        if pa.ndim != 1 or pa.shape != pb.shape:
            raise InvalidSpecError(f"prefix alpha/beta must have equal length, got {pa.size}, {pb.size}")
        if np.any(pa <= 0.0) or np.any(pb <= 0.0):
            raise InvalidSpecError("prefix entries must be positive")
        if not (self.tail_alpha > 0.0 and self.tail_beta > 0.0):
            raise InvalidSpecError(f"tail entries must be positive, got ({self.tail_alpha}, {self.tail_beta})")
        object.__setattr__(self, "prefix_alpha", pa)
        object.__setattr__(self, "prefix_beta", pb)
        object.__setattr__(self, "tail_alpha", float(self.tail_alpha))
        object.__setattr__(self, "tail_beta", float(self.tail_beta))

    @property
    def prefix_length(self) -> int:
        return self.prefix_alpha.size

    @property
    def lanczos_length(self) -> int:
        """The n of the Lanczos run this extension came from (prefix + tail column + dropped column)."""
        return self.prefix_length + 2

    @property
    def gamma_minus(self) -> float:
        return (self.tail_alpha - self.tail_beta) ** 2

    @property
    def gamma_plus(self) -> float:
        return (self.tail_alpha + self.tail_beta) ** 2

    def columns(self, count: int) -> tuple[np.ndarray, np.ndarray]:
        """First ``count`` entries of α and of β, tail included."""
        p = self.prefix_length
        alpha = np.full(count, self.tail_alpha)
        beta = np.full(count, self.tail_beta)
        head = min(p, count)
        alpha[:head] = self.prefix_alpha[:head]
        beta[:head] = self.prefix_beta[:head]
        return alpha, beta

    def jacobi_section(self, size: int) -> tuple[np.ndarray, np.ndarray]:
        """Diagonal and off-diagonal of the leading size×size block of LLᵀ."""
        if size < 1:
            raise InvalidSpecError(f"section size must be positive, got {size}")
        alpha, beta = self.columns(size)
        diag = alpha**2
        diag[1:] += beta[:-1] ** 2
        return diag, alpha[:-1] * beta[:-1]


def cholesky_tridiag(jacobi: JacobiMatrix) -> CholeskyFactor:
    """
    Factor a positive-definite Jacobi matrix as LLᵀ.

    Raises:
        NotPositiveDefiniteError: A pivot is ≤ 0; reports the failing index.
    """
    a, b = jacobi.diag, jacobi.offdiag
    n = a.size
    alpha = np.empty(n)
    beta = np.empty(n - 1)
    for i in range(n):
        pivot = a[i] - beta[i - 1] ** 2 if i > 0 else a[0]
        if not pivot > 0.0:
            raise NotPositiveDefiniteError(i, float(pivot))
        alpha[i] = np.sqrt(pivot)
        if i < n - 1:
            beta[i] = b[i] / alpha[i]
    return CholeskyFactor(alpha, beta)


def extend(factor: CholeskyFactor) -> ExtendedCholesky:
    """
    Freeze an n-column factor at column n−2: keep columns 0..n−3, repeat
    (α_{n−2}, β_{n−2}) forever and discard α_{n−1}.

    Raises:
        ExtensionTooShortError: n < 2.
    """
    n = factor.size
    if n < 2:
        raise ExtensionTooShortError(f"need at least 2 Cholesky columns to extend, got {n}")
    return ExtendedCholesky(
        prefix_alpha=factor.alpha[: n - 2],
        prefix_beta=factor.beta[: n - 2],
        tail_alpha=float(factor.alpha[n - 2]),
        tail_beta=float(factor.beta[n - 2]),
    )


def support_endpoints(ext: ExtendedCholesky) -> tuple[float, float]:
    """(γ̂₋, γ̂₊) = ((ᾱ − β̄)², (ᾱ + β̄)²)."""
    return ext.gamma_minus, ext.gamma_plus
