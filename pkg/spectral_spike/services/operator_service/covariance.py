"""
Matrix-free sample covariance operators v ↦ Wv.
"""
import logging
from abc import ABC, abstractmethod
from typing import Literal

import numpy as np

from spectral_spike.errors import DimensionMismatchError, InvalidSpecError
from spectral_spike.schemas import SpikedModelSpec
from spectral_spike.services.operator_service.sampling import simulate
from spectral_spike.storage.matrix_store import DataMatrix

logger = logging.getLogger(__name__)

Scale = Literal["raw", "one_over_m"]


class CovarianceOperator(ABC):
    """Read-only symmetric PSD operator of dimension N. Immutable after construction."""

    def __init__(self, dim: int):
        if dim < 1:
            raise InvalidSpecError(f"operator dimension must be positive, got {dim}")
        self._dim = int(dim)

    @property
    def dim(self) -> int:
        return self._dim

    def _check(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.ndim not in (1, 2) or v.shape[0] != self._dim:
            raise DimensionMismatchError(f"expected a vector of length {self._dim}, got shape {v.shape}")
        return v

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Return Wv. Accepts a vector or an N×k block of column vectors."""
        return self._apply(self._check(v))

    @abstractmethod
    def _apply(self, v: np.ndarray) -> np.ndarray:
        ...


class DenseDataOperator(CovarianceOperator):
    """W = s·YYᵀ with s = 1 (``raw``) or s = 1/M (``one_over_m``); W is never formed."""

    def __init__(self, data: DataMatrix, scale: Scale = "raw"):
        super().__init__(data.rows)
        if scale == "raw":
            self._scale = 1.0
        elif scale == "one_over_m":
            self._scale = 1.0 / data.cols
        else:
            raise InvalidSpecError(f"unknown scale {scale!r}")
        self._y = data.entries
        self.scale = scale
        self.samples = data.cols

    @property
    def ratio(self) -> float:
        return self._dim / self.samples

    def _apply(self, v: np.ndarray) -> np.ndarray:
        t = self._y.T @ v
        out = self._y @ t
        if self._scale != 1.0:
            out = out * self._scale
        return out


class ExplicitMatrixOperator(CovarianceOperator):
    """Wraps an explicit symmetric matrix W (small problems and oracles)."""

    def __init__(self, w: np.ndarray):
        w = np.array(w, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise InvalidSpecError(f"W must be square, got shape {w.shape}")
        if not np.allclose(w, w.T, rtol=0.0, atol=1e-12 * max(1.0, float(np.abs(w).max(initial=0.0)))):
            raise InvalidSpecError("W must be symmetric")
        super().__init__(w.shape[0])
        w.setflags(write=False)
        self._w = w

    def _apply(self, v: np.ndarray) -> np.ndarray:
        return self._w @ v


class SpikedModelOperator(DenseDataOperator):
    """Simulated data from a ``SpikedModelSpec`` with the 1/M scaling it is paired with."""

    def __init__(self, spec: SpikedModelSpec):
        super().__init__(simulate(spec), scale="one_over_m")
        self.spec = spec


def make_operator(data: DataMatrix, scale: Scale = "raw") -> CovarianceOperator:
    """
    Build the matrix-free covariance operator for ``data``.

    Args:
        data (DataMatrix): N×M data Y.
        scale (str): ``raw`` for W = YYᵀ, ``one_over_m`` for W = (1/M)YYᵀ.

    Returns:
        CovarianceOperator: apply(v) = s·Y(Yᵀv).
    """
    logger.info(f"🧮 Covariance operator N={data.rows}, M={data.cols}, scale={scale}")
    return DenseDataOperator(data, scale)
