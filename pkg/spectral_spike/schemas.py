"""
Validated configuration and report models.

Numeric kernels pass numpy arrays around in frozen dataclasses; everything
that crosses the CLI boundary or is serialized to JSON is a pydantic model.
"""
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

# ── Model specs ───────────────────────────────────────────────
EntryDistribution = Literal["gaussian", "rademacher", "beta"]
Aggregation = Literal["mode", "rounded_mean"]
PoleBackend = Literal["connection_coefficients", "finite_section"]

_U64_MAX = 2**64 - 1


class SpikedModelSpec(BaseModel):
    """
    Population model Y = Σ^{1/2} X with diagonal Σ.

    The bulk is either a constant variance ``sigma2`` or a table of ``n``
    positive quantiles; the spikes replace the largest bulk entries in the
    leading positions of Σ.
    """

    model_config = ConfigDict(frozen=True)

    n: int = Field(gt=0, description="dimension N")
    m: int = Field(gt=0, description="number of samples M")
    sigma2: Optional[float] = Field(default=None, gt=0.0)
    bulk_quantiles: Optional[List[float]] = None
    spikes: List[float] = Field(default_factory=list)
    distribution: EntryDistribution = "gaussian"
    seed: int = Field(default=0, ge=0, le=_U64_MAX)

    @model_validator(mode="after")
    def _check_bulk_and_spikes(self) -> "SpikedModelSpec":
        if (self.sigma2 is None) == (self.bulk_quantiles is None):
            raise ValueError("exactly one of sigma2 / bulk_quantiles must be given")
        if self.bulk_quantiles is not None:
            q = self.bulk_quantiles
            if len(q) != self.n:
                raise ValueError(f"bulk_quantiles has length {len(q)}, expected n={self.n}")
            if any(v <= 0.0 for v in q):
                raise ValueError("bulk_quantiles must be positive")
            if any(b < a for a, b in zip(q, q[1:])):
                raise ValueError("bulk_quantiles must be sorted ascending")
        if len(self.spikes) > self.n:
            raise ValueError(f"{len(self.spikes)} spikes do not fit in dimension {self.n}")
        top = self.bulk_max
        for s in self.spikes:
            if not s > top:
                raise ValueError(f"spike {s} does not exceed the largest bulk value {top}")
        return self

    @property
    def bulk_max(self) -> float:
        return float(self.sigma2) if self.sigma2 is not None else float(max(self.bulk_quantiles))

    @property
    def ratio(self) -> float:
        """c_N = N / M."""
        return self.n / self.m


# ── Pipeline configs ──────────────────────────────────────────
class AveragingConfig(BaseModel):
    """Multi-probe averaging: k probes, tail window q, base seed."""

    model_config = ConfigDict(frozen=True)

    k: int = Field(default=1, ge=1)
    q: int = Field(default=2, ge=1)
    seed: int = Field(default=0, ge=0, le=_U64_MAX)


class DetectionConfig(BaseModel):
    """Pole threshold γ̂₊ + C·N^{-δ} and how per-probe counts are combined."""

    model_config = ConfigDict(frozen=True)

    c_thresh: float = Field(default=1.0, gt=0.0)
    delta: float = Field(default=0.25, gt=0.0, lt=0.5)
    aggregation: Aggregation = "mode"
    backend: PoleBackend = "connection_coefficients"
    section_size: Optional[int] = Field(default=None, gt=0)


# ── Reports ───────────────────────────────────────────────────
class DetectionReport(BaseModel):
    """Outcome of spike detection; serializes to the documented JSON keys."""

    model_config = ConfigDict(populate_by_name=True)

    r_hat: int = Field(ge=0)
    per_probe_counts: List[int]
    poles: List[List[float]]
    gamma_minus: float
    gamma_plus: float
    threshold: float
    steps: List[int]
    k: int
    c_thresh: float = Field(serialization_alias="C", validation_alias="C")
    delta: float
    seed: int
    wall_time_ms: float = 0.0

    def to_json_dict(self) -> dict:
        return self.model_dump(mode="json", by_alias=True)


class TrialsReport(BaseModel):
    """Detection repeated over consecutive seeds."""

    trials: int
    seeds: List[int]
    r_hats: List[int]
    mean_r_hat: float
    probabilities: dict[int, float]
    wall_time_ms: float = 0.0


class AsdSummary(BaseModel):
    """Pooled ASD estimate: shared support and the atoms of the pooled measure."""

    gamma_minus: float
    gamma_plus: float
    poles: List[float]
    weights: List[float]
    k: int


class PoleComparison(BaseModel):
    """Both pole backends run on the same extension."""

    backend: PoleBackend
    section_size: int
    gamma_minus: float
    gamma_plus: float
    threshold: float
    connection_locations: List[float]
    connection_weights: List[float]
    finite_locations: List[float]
    count_match: bool
    max_discrepancy: Optional[float] = None
    connection_fallback: bool = False


# ── CLI ───────────────────────────────────────────────────────
Subcommand = Literal["simulate", "detect", "asd", "poles"]
StopFlag = Literal["fixed", "tail", "two-window"]


class RunConfig(BaseModel):
    """Every CLI flag, validated before any work starts."""

    model_config = ConfigDict(frozen=True, extra="ignore")

    command: Subcommand
    input: Optional[str] = None
    out: Optional[str] = None
    csv: Optional[str] = None
    format: Literal["csv", "binary"] = "binary"
    scale: Literal["raw", "1/m"] = "raw"

    # simulated data
    n: Optional[int] = Field(default=None, gt=0)
    m: Optional[int] = Field(default=None, gt=0)
    sigma2: float = Field(default=1.0, gt=0.0)
    spikes: List[float] = Field(default_factory=list)
    dist: EntryDistribution = "gaussian"
    bulk: Literal["constant", "deterministic"] = "constant"

    # pipelines
    k: int = Field(default=1, ge=1)
    c_thresh: float = Field(default=1.0, gt=0.0)
    delta: float = Field(default=0.25, gt=0.0, lt=0.5)
    aggregation: Aggregation = "mode"
    seed: int = Field(default=0, ge=0, le=_U64_MAX)
    probe_seed: Optional[int] = Field(default=None, ge=0, le=_U64_MAX)
    grid: int = Field(default=200, ge=2)
    backend: Literal["cc", "finite"] = "cc"
    section_size: Optional[int] = Field(default=None, gt=0)
    trials: int = Field(default=1, ge=1)
    threads: int = Field(default=1, ge=1)
    max_steps: Optional[int] = Field(default=None, ge=1)
    stop: StopFlag = "two-window"
    q: Optional[int] = Field(default=None, ge=1)
    tol: Optional[float] = Field(default=None, gt=0.0)

    @property
    def pole_backend(self) -> PoleBackend:
        return "connection_coefficients" if self.backend == "cc" else "finite_section"

    @property
    def simulated(self) -> bool:
        return self.input is None

    @model_validator(mode="after")
    def _check_sources(self) -> "RunConfig":
        if self.command == "simulate":
            if self.n is None or self.m is None or self.out is None:
                raise ValueError("simulate needs --n, --m and --out")
        elif self.input is None and (self.n is None or self.m is None):
            raise ValueError(f"{self.command} needs --input or the simulation flags --n and --m")
        if self.command == "asd" and self.out is None:
            raise ValueError("asd needs --out for the density CSV")
        return self
