"""
Lanczos tridiagonalization with full reorthogonalization.

Given W and a unit vector b, builds the Jacobi matrix J_n whose spectral
measure is the truncated VESD of (W, b). Every new Lanczos vector is
re-orthogonalized against the whole stored basis (two classical Gram–Schmidt
passes); n stays logarithmic in N, so the O(n²N) cost is negligible next to
the matrix–vector products.
"""
import logging
import math
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

from spectral_spike.errors import DimensionMismatchError, InvalidSpecError, NonUnitProbeError
from spectral_spike.services.operator_service.covariance import CovarianceOperator

logger = logging.getLogger(__name__)

BREAKDOWN_RTOL = 1e-13
UNIT_TOL = 1e-12

StopKind = Literal["fixed_steps", "tail_stddev", "two_window"]


@dataclass(frozen=True)
class JacobiMatrix:
    """Symmetric tridiagonal matrix with diagonal ``diag`` (a) and positive off-diagonal ``offdiag`` (b)."""

    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.diag, dtype=np.float64).copy()
        b = np.asarray(self.offdiag, dtype=np.float64).copy()
        if a.ndim != 1 or a.size < 1:
            raise InvalidSpecError("Jacobi diagonal must be a non-empty vector")
        if b.shape != (a.size - 1,):
            raise InvalidSpecError(f"Jacobi off-diagonal must have length {a.size - 1}, got {b.size}")
        if np.any(b <= 0.0):
            raise InvalidSpecError("Jacobi off-diagonal entries must be positive")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "diag", a)
        object.__setattr__(self, "offdiag", b)

    @property
    def size(self) -> int:
        return self.diag.size

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)


@dataclass(frozen=True)
class StoppingRule:
    """
    When to stop the Lanczos iteration.

    ``fixed_steps``  stop once n = ``steps`` entries exist.
    ``tail_stddev``  stop once the last q entries of a and of b have sample stddev < ``tol``.
    ``two_window``   compare two q-windows of a and of b separated by ``gap`` entries: stop when
                     their means differ by < ``mean_tol`` and all four stddevs are < ``tol``.

    The stopping tolerance is unrelated to the detection exponent δ.
    """

    kind: StopKind
    max_steps: int
    steps: int = 0
    q: int = 1
    gap: int = 0
    tol: float = 0.0
    mean_tol: float = 0.0

    def __post_init__(self):
        if self.max_steps < 1:
            raise InvalidSpecError(f"max_steps must be positive, got {self.max_steps}")
        if self.kind == "fixed_steps":
            if self.steps < 1:
                raise InvalidSpecError(f"fixed_steps needs n ≥ 1, got {self.steps}")
        elif self.kind in ("tail_stddev", "two_window"):
            if self.q < 1:
                raise InvalidSpecError(f"window length q must be ≥ 1, got {self.q}")
            if not self.tol > 0.0:
                raise InvalidSpecError(f"tolerance must be positive, got {self.tol}")
            if self.kind == "two_window":
                if self.gap < 0:
                    raise InvalidSpecError(f"window gap must be ≥ 0, got {self.gap}")
                if not self.mean_tol > 0.0:
                    raise InvalidSpecError(f"mean tolerance must be positive, got {self.mean_tol}")
        else:
            raise InvalidSpecError(f"unknown stopping rule {self.kind!r}")

    @classmethod
    def fixed(cls, n: int, max_steps: Optional[int] = None) -> "StoppingRule":
        return cls(kind="fixed_steps", steps=n, max_steps=max_steps if max_steps is not None else n)

    @classmethod
    def tail(cls, q: int, tol: float, max_steps: int) -> "StoppingRule":
        return cls(kind="tail_stddev", q=q, tol=tol, max_steps=max_steps)

    @classmethod
    def windows(cls, q: int, gap: int, mean_tol: float, tol: float, max_steps: int) -> "StoppingRule":
        return cls(kind="two_window", q=q, gap=gap, mean_tol=mean_tol, tol=tol, max_steps=max_steps)


@dataclass(frozen=True)
class LanczosResult:
    jacobi: JacobiMatrix
    steps_taken: int
    breakdown: bool
    residual_offdiag: float
    stop_reason: str
    basis: Optional[np.ndarray] = None  # n×N, rows are q_1..q_n


def _sample_std(x: np.ndarray) -> float:
    # one entry has no spread
    return float(np.std(x, ddof=1)) if x.size > 1 else 0.0


def stopping_check(a: Sequence[float], b: Sequence[float], rule: StoppingRule) -> bool:
    """Return True when ``rule`` fires on the Jacobi entries computed so far."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if rule.kind == "fixed_steps":
        return a.size >= rule.steps

    length = min(a.size, b.size)
    q = rule.q
    if rule.kind == "tail_stddev":
        if length < q:
            return False
        return all(_sample_std(seq[-q:]) < rule.tol for seq in (a, b))

    # two_window
    span = 2 * q + rule.gap
    if length < span:
        return False
    for seq in (a, b):
        seq = seq[-length:]
        late = seq[length - q:]
        early = seq[length - span:length - span + q]
        if abs(float(np.mean(late)) - float(np.mean(early))) >= rule.mean_tol:
            return False
        if _sample_std(late) >= rule.tol or _sample_std(early) >= rule.tol:
            return False
    return True


def default_rule(n: int) -> StoppingRule:
    """
    Operating point used for the simulations: two windows with
    q = max(1, ⌊½ ln N⌋), gap = q, δ₁ = δ₂ = 3/√N and at most
    ⌈max(6 ln N + 24, √N)⌉ steps (clamped to N).
    """
    if n < 2:
        raise InvalidSpecError(f"default stopping rule needs N ≥ 2, got {n}")
    q = max(1, math.floor(0.5 * math.log(n)))
    tol = 3.0 / math.sqrt(n)
    cap = math.ceil(max(6.0 * math.log(n) + 24.0, math.sqrt(n)))
    return StoppingRule.windows(q=q, gap=q, mean_tol=tol, tol=tol, max_steps=min(cap, n))


def lanczos_run(op: CovarianceOperator, b: np.ndarray, rule: StoppingRule, keep_basis: bool = False) -> LanczosResult:
    """
    Run Lanczos on (W, b) until ``rule`` fires, ``rule.max_steps`` is reached, or breakdown.

    Args:
        op (CovarianceOperator): The operator W.
        b (np.ndarray): Unit start vector.
        rule (StoppingRule): Stopping criterion.
        keep_basis (bool): Return the orthonormal basis Q_n as well.

    Raises:
        DimensionMismatchError: ``b`` does not have length N.
        NonUnitProbeError: ‖b‖ differs from 1 by more than 1e-12.
        InvalidSpecError: ``rule.max_steps`` exceeds N.

    Returns:
        LanczosResult: J_n, the step count and the stop diagnostics.
    """
    n_dim = op.dim
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (n_dim,):
        raise DimensionMismatchError(f"probe has shape {b.shape}, operator dimension is {n_dim}")
    norm_b = float(np.linalg.norm(b))
    if abs(norm_b - 1.0) > UNIT_TOL:
        raise NonUnitProbeError(f"probe norm is {norm_b!r}, expected 1")
    if rule.max_steps > n_dim:
        raise InvalidSpecError(f"max_steps={rule.max_steps} exceeds the dimension {n_dim}")

    basis = np.empty((rule.max_steps, n_dim), dtype=np.float64)
    diag: list[float] = []
    offdiag: list[float] = []

    q = b.copy()
    q_prev = np.zeros(n_dim)
    b_prev = 0.0
    breakdown = False
    reason = "max_steps"

    for j in range(rule.max_steps):
        basis[j] = q
        w = op.apply(q)
        if j > 0:
            w = w - b_prev * q_prev
        a_j = float(w @ q)
        w = w - a_j * q
        # two passes of classical Gram–Schmidt against every stored vector
        stored = basis[: j + 1]
        for _ in range(2):
            w = w - stored.T @ (stored @ w)
        b_j = float(np.linalg.norm(w))
        diag.append(a_j)
        offdiag.append(b_j)

        norm_est = abs(diag[0]) + 2.0 * max(offdiag)
        if b_j <= BREAKDOWN_RTOL * norm_est:
            breakdown = True
            reason = "breakdown"
            break
        if stopping_check(diag, offdiag, rule):
            reason = rule.kind
            break
        q_prev, q, b_prev = q, w / b_j, b_j

    steps = len(diag)
    jacobi = JacobiMatrix(np.array(diag), np.array(offdiag[: steps - 1]))
    logger.info(f"🔁 Lanczos stopped after {steps} steps ({reason})")
    return LanczosResult(
        jacobi=jacobi,
        steps_taken=steps,
        breakdown=breakdown,
        residual_offdiag=offdiag[-1],
        stop_reason=reason,
        basis=basis[:steps].copy() if keep_basis else None,
    )
