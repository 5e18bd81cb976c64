"""
Closed-form laws used to validate the estimators.

Kept apart from the pipelines: nothing in the estimation path calls into
this module. Covers the Marchenko–Pastur law, the deformed MP fixed point
z = f(m) and its outlier map, and the one-spike model whose
transform, pole and weight are explicit.
"""
import logging
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import brentq

from spectral_spike.errors import InvalidSpecError, OracleError
from spectral_spike.services.jacobi_service.cholesky import ExtendedCholesky

logger = logging.getLogger(__name__)

SOLVE_TOL = 1e-12
SOLVE_MAX_ITER = 200
CONTINUATION_STEPS = 40


# ── Deformed Marchenko–Pastur ─────────────────────────────────
@dataclass(frozen=True)
class DeformedMPModel:
    """Population eigenvalues σ_1 ≥ … ≥ σ_N of Σ₀ with M samples; every σ_k ∈ [τ, 1/τ]."""

    sigma: np.ndarray
    m: int
    tau: float = 1e-3

    def __post_init__(self):
        sigma = np.sort(np.asarray(self.sigma, dtype=np.float64))[::-1].copy()
        if sigma.ndim != 1 or sigma.size < 1:
            raise InvalidSpecError("sigma must be a non-empty vector")
        if self.m < 1:
            raise InvalidSpecError(f"sample count must be positive, got {self.m}")
        if not 0.0 < self.tau <= 1.0:
            raise InvalidSpecError(f"tau must lie in (0, 1], got {self.tau}")
        if np.any(sigma < self.tau) or np.any(sigma > 1.0 / self.tau):
            raise InvalidSpecError(f"sigma entries must lie in [{self.tau}, {1.0 / self.tau}]")
        sigma.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)
        levels, counts = np.unique(sigma, return_counts=True)
        object.__setattr__(self, "_levels", levels)
        object.__setattr__(self, "_weights", counts / self.m)

    @classmethod
    def isotropic(cls, sigma2: float, n: int, m: int, tau: float = 1e-3) -> "DeformedMPModel":
        return cls(np.full(n, float(sigma2)), m, tau)

    @property
    def ratio(self) -> float:
        return self.sigma.size / self.m


def f_dmp(model: DeformedMPModel, m):
    """
    f(m) = −1/m + (1/M) Σ_k 1/(m + 1/σ_k).

    Raises:
        OracleError: m = 0 or m = −1/σ_k.
    """
    arr = np.atleast_1d(np.asarray(m, dtype=np.complex128))
    poles = -1.0 / model._levels
    if np.any(arr == 0) or np.any(np.abs(arr[:, None] - poles[None, :]) <= 1e-15 * np.abs(poles)[None, :]):
        raise OracleError(f"f evaluated at one of its poles: m={m!r}")
    value = -1.0 / arr + (model._weights[None, :] / (arr[:, None] + 1.0 / model._levels[None, :])).sum(axis=1)
    return value[0] if np.ndim(m) == 0 else value


def f_dmp_prime(model: DeformedMPModel, m):
    arr = np.atleast_1d(np.asarray(m, dtype=np.complex128))
    value = 1.0 / arr**2 - (model._weights[None, :] / (arr[:, None] + 1.0 / model._levels[None, :]) ** 2).sum(axis=1)
    return value[0] if np.ndim(m) == 0 else value


def _newton(model: DeformedMPModel, z: complex, m: complex) -> tuple[complex, bool]:
    tol = SOLVE_TOL * (1.0 + abs(z))
    for _ in range(SOLVE_MAX_ITER):
        residual = complex(f_dmp(model, m)) - z
        if abs(residual) <= tol:
            return m, True
        step = residual / complex(f_dmp_prime(model, m))
        t = 1.0
        candidate = m - step
        # halve until the iterate stays in the upper half-plane
        while candidate.imag <= 0.0 and t > 1e-12:
            t *= 0.5
            candidate = m - t * step
        if candidate.imag <= 0.0:
            return m, False
        m = candidate
    return m, abs(complex(f_dmp(model, m)) - z) <= tol


def m_dmp_solve(model: DeformedMPModel, z: complex) -> complex:
    """
    Solve z = f(m) with Im m > 0 for Im z > 0.

    Damped Newton from m₀ = −1/z (at most 200 iterations); if that stalls,
    continue from a point high in the upper half-plane down to z.

    Raises:
        OracleError: Im z ≤ 0 or no convergence.
    """
    z = complex(z)
    if not z.imag > 0.0:
        raise OracleError(f"m_dMP needs Im z > 0, got {z!r}")
    m, ok = _newton(model, z, -1.0 / z)
    if ok:
        return m
    lift = max(1.0, abs(z))
    path = z.imag + lift * np.geomspace(1.0, 1e-6, CONTINUATION_STEPS)
    m = -1.0 / complex(z.real, path[0])
    for height in list(path) + [z.imag]:
        m, ok = _newton(model, complex(z.real, height), m)
        if not ok:
            break
    if not ok:
        raise OracleError(f"m_dMP did not converge at z={z!r}")
    return m


@dataclass(frozen=True)
class DmpEdges:
    gamma_minus: float
    gamma_plus: float
    bbp_threshold: float


def dmp_edges(model: DeformedMPModel) -> DmpEdges:
    """
    Support edges of the deformed MP law and the BBP threshold, from the real
    critical points of f. The right one x* ∈ (−1/σ_1, 0) gives γ₊ = f(x*) and
    the threshold −1/x*.
    """

    def fp(x: float) -> float:
        return float(f_dmp_prime(model, x).real)

    def f(x: float) -> float:
        return float(f_dmp(model, x).real)

    top = -1.0 / float(model.sigma[0])
    eps = 1e-12 * abs(top)
    x_right = brentq(fp, top + eps, -eps, xtol=1e-15, maxiter=500)

    c = model.ratio
    bottom = -1.0 / float(model.sigma[-1])
    if c < 1.0:
        lo = 2.0 * bottom
        for _ in range(200):
            if fp(lo) > 0.0:
                break
            lo *= 2.0
        x_left = brentq(fp, lo, bottom - 1e-12 * abs(bottom), xtol=1e-15, maxiter=500)
        gamma_minus = f(x_left)
    elif c > 1.0:
        hi = 1.0
        for _ in range(200):
            if fp(hi) < 0.0:
                break
            hi *= 2.0
        x_left = brentq(fp, 1e-12, hi, xtol=1e-15, maxiter=500)
        gamma_minus = f(x_left)
    else:
        gamma_minus = 0.0
    return DmpEdges(gamma_minus=gamma_minus, gamma_plus=f(x_right), bbp_threshold=-1.0 / x_right)


@dataclass(frozen=True)
class OutlierLocation:
    location: float
    supercritical: bool
    threshold: float


def outlier_location(model: DeformedMPModel, spike: float) -> OutlierLocation:
    """
    f(−1/σ̃): where a spike σ̃ above the BBP threshold sends its sample eigenvalue.
    Spikes at or below the threshold are returned with ``supercritical=False``.
    """
    if not spike > 0.0:
        raise InvalidSpecError(f"spike must be positive, got {spike}")
    threshold = dmp_edges(model).bbp_threshold
    location = float(f_dmp(model, -1.0 / spike).real)
    supercritical = spike > threshold * (1.0 + 1e-12)
    if not supercritical:
        logger.info(f"ℹ️ Spike {spike} is sub-critical (threshold {threshold:.6f})")
    return OutlierLocation(location=location, supercritical=supercritical, threshold=threshold)


def companion_to_covariance(m_companion, z, c: float):
    """N×N transform from the M×M companion transform: (m + (1−c)/z)/c."""
    return (m_companion + (1.0 - c) / z) / c


# ── Marchenko–Pastur ──────────────────────────────────────────
def mp_edges(sigma2: float, c: float) -> tuple[float, float]:
    root = np.sqrt(c)
    return sigma2 * (1.0 - root) ** 2, sigma2 * (1.0 + root) ** 2


def mp_density(sigma2: float, c: float, lam):
    """√(γ₊−λ)√(λ−γ₋)/(2πcσ²λ) on [γ₋, γ₊], 0 elsewhere."""
    g_minus, g_plus = mp_edges(sigma2, c)
    x = np.asarray(lam, dtype=np.float64)
    inside = (x > g_minus) & (x < g_plus) & (x > 0.0)
    xs = np.where(inside, x, 1.0)
    values = np.sqrt(np.abs(g_plus - xs)) * np.sqrt(np.abs(xs - g_minus)) / (2.0 * np.pi * c * sigma2 * xs)
    out = np.where(inside, values, 0.0)
    return float(out) if out.ndim == 0 else out


def mp_stieltjes(sigma2: float, c: float, z):
    """(σ²(1−c) − z + √(z−γ₊)√(z−γ₋)) / (2cσ²z), principal roots (Herglotz off the support)."""
    g_minus, g_plus = mp_edges(sigma2, c)
    z = np.asarray(z, dtype=np.complex128)
    root = np.sqrt(z - g_plus) * np.sqrt(z - g_minus)
    return (sigma2 * (1.0 - c) - z + root) / (2.0 * c * sigma2 * z)


def density_mass(density_fn, gamma_minus: float, gamma_plus: float, nodes: int = 200) -> float:
    """∫ρ over [γ₋, γ₊] by Gauss–Legendre after λ = γ₋ + (γ₊−γ₋)(1−cos θ)/2 (removes the √ edges)."""
    t, w = leggauss(nodes)
    theta = 0.5 * np.pi * (t + 1.0)
    half = 0.5 * (gamma_plus - gamma_minus)
    lam = gamma_minus + half * (1.0 - np.cos(theta))
    jac = half * np.sin(theta) * 0.5 * np.pi
    return float(np.sum(w * jac * np.asarray(density_fn(lam), dtype=np.float64)))


def weighted_density_error(density_fn, gamma_minus_hat: float, gamma_plus_hat: float, sigma2: float, c: float,
                           margin: float = 0.2, points: int = 400) -> float:
    """
    sup over [γ̂₋+margin, γ̂₊−margin] of
    |ρ̂(x)/(√(γ̂₊−x)√(x−γ̂₋)) − ρ(x)/(√(γ₊−x)√(x−γ₋))|, ρ the MP density.
    Dividing out the square-root edges compares the smooth parts of the two laws.
    """
    lo, hi = gamma_minus_hat + margin, gamma_plus_hat - margin
    if not hi > lo:
        raise OracleError(f"empty comparison window [{lo}, {hi}]")
    x = np.linspace(lo, hi, points)
    g_minus, g_plus = mp_edges(sigma2, c)
    est = np.asarray(density_fn(x), dtype=np.float64) / (np.sqrt(gamma_plus_hat - x) * np.sqrt(x - gamma_minus_hat))
    true_edges = np.sqrt(np.clip(g_plus - x, 0.0, None)) * np.sqrt(np.clip(x - g_minus, 0.0, None))
    ref = np.divide(mp_density(sigma2, c, x), true_edges, out=np.zeros_like(x), where=true_edges > 0.0)
    return float(np.max(np.abs(est - ref)))


# ── One-spike model ───────────────────────────────────────────
def one_spike_extension(ell: float, c: float) -> ExtendedCholesky:
    """Σ = diag(ℓ, 1, 1, …), b = e₁: one prefix column (√ℓ, √c), tail (1, √c)."""
    return ExtendedCholesky(prefix_alpha=[np.sqrt(ell)], prefix_beta=[np.sqrt(c)], tail_alpha=1.0, tail_beta=np.sqrt(c))


def one_spike_transform(ell: float, c: float, z):
    """
    m₀(z) = (ℓ(1−c) + (ℓ−2)z + ℓ√(z−c₊)√(z−c₋)) / (2z(ℓ(ℓ−1+c) − (ℓ−1)z)),
    c_± = (1 ± √c)². The denominator vanishes exactly at ℓ + ℓc/(ℓ−1).
    """
    if not ell > 1.0:
        raise InvalidSpecError(f"spike ℓ must exceed 1, got {ell}")
    c_minus, c_plus = mp_edges(1.0, c)
    z = np.asarray(z, dtype=np.complex128)
    root = np.sqrt(z - c_plus) * np.sqrt(z - c_minus)
    num = ell * (1.0 - c) + (ell - 2.0) * z + ell * root
    den = 2.0 * z * (ell * (ell - 1.0 + c) - (ell - 1.0) * z)
    return num / den


def one_spike_supercritical(ell: float, c: float) -> bool:
    return ell > 1.0 + np.sqrt(c)


def one_spike_pole(ell: float, c: float) -> float:
    return ell + ell * c / (ell - 1.0)


def one_spike_weight(ell: float, c: float) -> float:
    """((ℓ−1)² − c)/((ℓ−1)(ℓ−1+c)) above the BBP threshold, 0 below."""
    if not one_spike_supercritical(ell, c):
        return 0.0
    return ((ell - 1.0) ** 2 - c) / ((ell - 1.0) * (ell - 1.0 + c))
