"""
Exact discrete spectrum of a Toeplitz-plus-finite-rank Jacobi operator.

The connection coefficients c_{i,j} express the orthonormal polynomials of
the perturbed operator in the basis of the reference Toeplitz operator. They
obey a five-term recurrence and become Toeplitz beyond a finite wedge, so the
whole operator is summarized by a polynomial symbol c(z). Roots of c inside
the unit disk are real and simple; the Joukowski map sends them to the
eigenvalues outside the essential spectrum [γ₋, γ₊].
"""
import logging
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.linalg import LinAlgError, companion, eigvals

from spectral_spike.errors import (
    ConnectionOverflowError,
    DegeneratePolynomialError,
    EigensolverError,
    InvalidSpecError,
    JoukowskiDomainError,
    PoleWeightError,
)
from spectral_spike.services.jacobi_service.cholesky import ExtendedCholesky

logger = logging.getLogger(__name__)

TRIM_RTOL = 1e-12
DISK_MARGIN = 1e-10
IMAG_TOL = 1e-8
ROOT_GAP = 1e-10


@dataclass(frozen=True)
class ToeplitzPlusFiniteRank:
    """
    Jacobi operator equal to the Toeplitz reference (a, b) except for the
    leading ``diag`` (ã_0..ã_{n−1}) and ``offdiag`` (b̃_0..b̃_{n−1}) entries.
    """

    diag: np.ndarray
    offdiag: np.ndarray
    tail_diag: float
    tail_offdiag: float

    def __post_init__(self):
        d = np.array(self.diag, dtype=np.float64)
        o = np.array(self.offdiag, dtype=np.float64)
        if d.ndim != 1 or d.size < 1 or o.shape != d.shape:
            raise InvalidSpecError(f"perturbation needs equal-length diag/offdiag, got {d.size}, {o.size}")
        if np.any(o <= 0.0) or not self.tail_offdiag > 0.0:
            raise InvalidSpecError("off-diagonal entries must be positive")
        d.setflags(write=False)
        o.setflags(write=False)
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "offdiag", o)

    @classmethod
    def from_extension(cls, ext: ExtendedCholesky) -> "ToeplitzPlusFiniteRank":
        """Form J = LLᵀ; rows 0..p differ from the tail (row p mixes β_{p−1} with ᾱ)."""
        p = ext.prefix_length
        diag, offdiag = ext.jacobi_section(p + 2)
        return cls(
            diag=diag[: p + 1],
            offdiag=offdiag[: p + 1],
            tail_diag=ext.tail_alpha**2 + ext.tail_beta**2,
            tail_offdiag=ext.tail_alpha * ext.tail_beta,
        )

    @property
    def length(self) -> int:
        return self.diag.size

    @property
    def gamma_minus(self) -> float:
        return self.tail_diag - 2.0 * self.tail_offdiag

    @property
    def gamma_plus(self) -> float:
        return self.tail_diag + 2.0 * self.tail_offdiag

    def diag_at(self, j: int) -> float:
        return float(self.diag[j]) if j < self.length else self.tail_diag

    def offdiag_at(self, j: int) -> float:
        return float(self.offdiag[j]) if j < self.length else self.tail_offdiag

    def effective_length(self) -> int:
        """Smallest n with ã_j = a and b̃_j = b for every j ≥ n."""
        differs = np.flatnonzero((self.diag != self.tail_diag) | (self.offdiag != self.tail_offdiag))
        return int(differs[-1]) + 1 if differs.size else 0


@dataclass(frozen=True)
class ConnectionMatrix:
    coefficients: np.ndarray  # upper triangular, c_{i,j} for 0 ≤ i ≤ j ≤ 2m
    symbol: np.ndarray  # t_0..t_{2m−1}, ascending powers of z
    perturbation_length: int


def connection_coefficients(jt: ToeplitzPlusFiniteRank) -> ConnectionMatrix:
    """
    Fill c_{i,j} column by column from the five-term recurrence

        b̃_j c_{i,j+1} = b c_{i−1,j} + b c_{i+1,j} − b̃_{j−1} c_{i,j−1} − (ã_j − a) c_{i,j},

    starting from c_{0,0} = 1, then read the symbol t_k = c_{m−⌊k/2⌋, m−⌊k/2⌋+k}.
    The working length m is one more than the effective perturbation length.

    Raises:
        ConnectionOverflowError: Coefficients overflowed.
    """
    a, b = jt.tail_diag, jt.tail_offdiag
    m = jt.effective_length() + 1
    cols = 2 * m + 1
    rows = cols + 1
    c = np.zeros((rows, cols))
    c[0, 0] = 1.0
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(cols - 1):
            col = c[:, j]
            up = np.zeros(rows)
            up[1:] = col[:-1]
            down = np.zeros(rows)
            down[:-1] = col[1:]
            new = b * up + b * down - (jt.diag_at(j) - a) * col
            if j > 0:
                new -= jt.offdiag_at(j - 1) * c[:, j - 1]
            c[:, j + 1] = new / jt.offdiag_at(j)
    if not np.all(np.isfinite(c)):
        raise ConnectionOverflowError(f"connection coefficients overflowed (perturbation length {m})")
    c = np.triu(c[:cols, :])

    symbol = np.array([c[m - k // 2, m - k // 2 + k] for k in range(2 * m)])
    return ConnectionMatrix(coefficients=c, symbol=symbol, perturbation_length=m)


def _trim(sym: np.ndarray) -> np.ndarray:
    scale = float(np.max(np.abs(sym))) if sym.size else 0.0
    if scale == 0.0:
        raise DegeneratePolynomialError("symbol polynomial is identically zero")
    keep = np.flatnonzero(np.abs(sym) > TRIM_RTOL * scale)
    if keep.size == 0:
        raise DegeneratePolynomialError("every symbol coefficient was trimmed")
    # low-order zeros only contribute roots at z = 0, outside the punctured disk
    return sym[keep[0] : keep[-1] + 1]


def symbol_roots(sym) -> np.ndarray:
    """
    Real roots of c(z) = Σ t_k z^k inside the open unit disk, ascending.

    Coefficients with |t| ≤ 1e-12·max|t| are trimmed; the remaining roots are
    the eigenvalues of the companion matrix (LAPACK ``geev``: balancing,
    Hessenberg reduction, double-shift QR).

    Raises:
        DegeneratePolynomialError: All coefficients trimmed.
        EigensolverError: The QR iteration did not converge.
    """
    coeffs = _trim(np.asarray(sym, dtype=np.float64))
    if coeffs.size == 1:
        return np.empty(0)
    try:
        roots = eigvals(companion(coeffs[::-1]))
    except LinAlgError as e:
        raise EigensolverError(f"companion eigenvalues did not converge: {e}") from e
    inside = (np.abs(roots) < 1.0 - DISK_MARGIN) & (np.abs(roots.imag) <= IMAG_TOL)
    return np.sort(roots[inside].real)


def joukowski_map(z, gamma_minus: float, gamma_plus: float):
    """
    M(J(z)) with J(z) = (z + 1/z)/2 and M the affine map of [−1, 1] onto [γ₋, γ₊].

    Raises:
        JoukowskiDomainError: z = 0 or |z| ≥ 1.
    """
    arr = np.asarray(z, dtype=np.float64)
    if np.any(arr == 0.0) or np.any(np.abs(arr) >= 1.0):
        raise JoukowskiDomainError(f"Joukowski map needs 0 < |z| < 1, got {z!r}")
    j = 0.5 * (arr + 1.0 / arr)
    out = 0.5 * (gamma_plus + gamma_minus) + j * 0.5 * (gamma_plus - gamma_minus)
    return float(out) if arr.ndim == 0 else out


def pole_weights(sym, roots, gamma_minus: float, gamma_plus: float) -> np.ndarray:
    """
    Masses of the atoms at the mapped ``roots``:

        w = (z − 1/z)² / (z · c′(z) · c(1/z)).

    Masses are invariant under the affine map M, so the formula is applied in
    the normalized variable. c(1/z) is evaluated as z^{−d}·rev(c)(z) to keep
    high-degree symbols finite.

    Raises:
        PoleWeightError: Two roots closer than 1e-10, a mapped pole inside
            [γ₋, γ₊], or a non-positive weight.
    """
    roots = np.asarray(roots, dtype=np.float64)
    if roots.size == 0:
        return np.empty(0)
    if roots.size > 1 and np.min(np.diff(np.sort(roots))) <= ROOT_GAP:
        raise PoleWeightError("symbol has a near-multiple root")
    locations = joukowski_map(roots, gamma_minus, gamma_plus)
    if np.any((locations >= gamma_minus) & (locations <= gamma_plus)):
        raise PoleWeightError("a mapped pole falls inside the essential spectrum")

    coeffs = _trim(np.asarray(sym, dtype=np.float64))
    d = coeffs.size - 1
    deriv = P.polyval(roots, P.polyder(coeffs))
    reversed_at = P.polyval(roots, coeffs[::-1])
    with np.errstate(over="ignore", under="ignore", divide="ignore", invalid="ignore"):
        weights = (roots - 1.0 / roots) ** 2 * roots ** (d - 1) / (deriv * reversed_at)
    if not np.all(np.isfinite(weights) & (weights > 0.0)):
        raise PoleWeightError(f"non-positive pole weight in {weights.tolist()}")
    return weights


def poles_connection(ext: ExtendedCholesky) -> tuple[np.ndarray, np.ndarray]:
    """
    Poles and weights of m̂₀ via connection coefficients.

    Returns:
        tuple[np.ndarray, np.ndarray]: locations ascending, matching weights.
    """
    jt = ToeplitzPlusFiniteRank.from_extension(ext)
    conn = connection_coefficients(jt)
    roots = symbol_roots(conn.symbol)
    if roots.size == 0:
        return np.empty(0), np.empty(0)
    gamma_minus, gamma_plus = jt.gamma_minus, jt.gamma_plus
    weights = pole_weights(conn.symbol, roots, gamma_minus, gamma_plus)
    locations = joukowski_map(roots, gamma_minus, gamma_plus)
    order = np.argsort(locations)
    logger.debug(f"🎯 {roots.size} pole(s) from a degree-{conn.symbol.size - 1} symbol")
    return locations[order], weights[order]
