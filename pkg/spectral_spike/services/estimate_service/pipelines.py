"""
Estimation pipelines built from the Lanczos / Cholesky / pole pieces.

  estimate_svasd   one probe: Lanczos → Cholesky → extension → spectrum
  estimate_asd     k probes, shared averaged tail, pooled transform
  detect_spikes    poles above γ̂₊ + C·N^{-δ}, counted per probe and aggregated
  detect_trials    detection repeated over consecutive seeds
"""
import logging
import math
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from spectral_spike.config import THREADS
from spectral_spike.errors import (
    InvalidSpecError,
    LanczosBreakdownError,
    ProbeFailedError,
    SpectralSpikeError,
    WindowTooLongError,
)
from spectral_spike.schemas import (
    Aggregation,
    AsdSummary,
    AveragingConfig,
    DetectionConfig,
    DetectionReport,
    PoleBackend,
    TrialsReport,
)
from spectral_spike.services.jacobi_service.cholesky import ExtendedCholesky, cholesky_tridiag, extend
from spectral_spike.services.jacobi_service.continued_fraction import SpectralEstimate, estimate_spectrum
from spectral_spike.services.lanczos_service.lanczos import StoppingRule, lanczos_run
from spectral_spike.services.operator_service.covariance import CovarianceOperator
from spectral_spike.services.operator_service.sampling import sample_probe

logger = logging.getLogger(__name__)

MIN_STEPS = 3
MAX_RESAMPLES = 8


@dataclass(frozen=True)
class ProbeRun:
    index: int
    seed: int
    extension: ExtendedCholesky
    steps: int


# ── Single probe ──────────────────────────────────────────────
def cholesky_extension(op: CovarianceOperator, b: np.ndarray, rule: StoppingRule) -> tuple[ExtendedCholesky, int]:
    """
    Lanczos on (W, b), Cholesky-factor J_n and freeze the tail.

    Raises:
        LanczosBreakdownError: Fewer than 3 Lanczos steps.
    """
    result = lanczos_run(op, b, rule)
    if result.steps_taken < MIN_STEPS:
        raise LanczosBreakdownError(
            f"Lanczos broke down after {result.steps_taken} step(s); at least {MIN_STEPS} are needed"
        )
    return extend(cholesky_tridiag(result.jacobi)), result.steps_taken


def estimate_svasd(op: CovarianceOperator, b: np.ndarray, rule: StoppingRule,
                   backend: PoleBackend = "connection_coefficients",
                   section_size: Optional[int] = None) -> tuple[ExtendedCholesky, SpectralEstimate]:
    """
    Estimate the spiked VASD of (W, b).

    Args:
        op (CovarianceOperator): W.
        b (np.ndarray): Unit probe.
        rule (StoppingRule): Lanczos stopping rule.
        backend (str): Pole backend for the estimate.
        section_size (int | None): K for the finite-section backend.

    Returns:
        tuple[ExtendedCholesky, SpectralEstimate]: The extension and its spectrum.
    """
    ext, _ = cholesky_extension(op, b, rule)
    return ext, estimate_spectrum(ext, backend, section_size)


def probe_seed(base: int, index: int, k: int, attempt: int = 0) -> int:
    """Seed of probe ``index``; resample ``attempt`` shifts by k per attempt."""
    return base + index + k * attempt


def _run_probe(op: CovarianceOperator, rule: StoppingRule, index: int, k: int, base_seed: int) -> ProbeRun:
    seed = probe_seed(base_seed, index, k)
    try:
        for attempt in range(MAX_RESAMPLES + 1):
            seed = probe_seed(base_seed, index, k, attempt)
            try:
                ext, steps = cholesky_extension(op, sample_probe(op.dim, seed), rule)
                return ProbeRun(index=index, seed=seed, extension=ext, steps=steps)
            except LanczosBreakdownError as e:
                logger.warning(f"⚠️ Probe {index} (seed {seed}): {e}; resampling")
        raise LanczosBreakdownError(f"no usable probe after {MAX_RESAMPLES} resamples")
    except SpectralSpikeError as e:
        raise ProbeFailedError(index, seed, e) from e


def _fan_out(fn: Callable[[int], object], count: int, threads: int) -> list:
    if threads <= 1 or count == 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=min(threads, count)) as executor:
        return list(executor.map(fn, range(count)))


# ── Averaging ─────────────────────────────────────────────────
def average_cholesky(exts: Sequence[ExtendedCholesky], q: int) -> list[ExtendedCholesky]:
    """
    Share one tail across probes.

    For each probe the window is α̂_{n−q−1}..α̂_{n−2}: the last q−1 prefix
    entries plus the tail. ᾱ* (and β̄*) is the mean over all windows, summed
    in ascending probe order; each window is then overwritten with it.

    Raises:
        WindowTooLongError: Some probe has n < q + 2.
    """
    if q < 1:
        raise WindowTooLongError(f"window length must be ≥ 1, got {q}")
    if not exts:
        return []
    total_alpha = 0.0
    total_beta = 0.0
    for j, ext in enumerate(exts):
        if ext.lanczos_length < q + 2:
            raise WindowTooLongError(f"probe {j} has n={ext.lanczos_length} < q + 2 = {q + 2}")
        p = ext.prefix_length
        for value in ext.prefix_alpha[p - q + 1 :]:
            total_alpha += float(value)
        total_alpha += ext.tail_alpha
        for value in ext.prefix_beta[p - q + 1 :]:
            total_beta += float(value)
        total_beta += ext.tail_beta
    alpha_star = total_alpha / (len(exts) * q)
    beta_star = total_beta / (len(exts) * q)

    averaged = []
    for ext in exts:
        p = ext.prefix_length
        prefix_alpha = ext.prefix_alpha.copy()
        prefix_beta = ext.prefix_beta.copy()
        prefix_alpha[p - q + 1 :] = alpha_star
        prefix_beta[p - q + 1 :] = beta_star
        averaged.append(ExtendedCholesky(prefix_alpha, prefix_beta, alpha_star, beta_star))
    logger.info(f"📐 Averaged tail over {len(exts)} probe(s), q={q}: ᾱ*={alpha_star:.6f}, β̄*={beta_star:.6f}")
    return averaged


# ── Multi-probe ASD ───────────────────────────────────────────
@dataclass(frozen=True)
class AsdEstimate:
    """Per-probe estimates sharing one support; pooled quantities average them in probe order."""

    gamma_minus: float
    gamma_plus: float
    estimates: tuple[SpectralEstimate, ...]
    probes: tuple[ProbeRun, ...]

    @property
    def k(self) -> int:
        return len(self.estimates)

    @property
    def steps(self) -> list[int]:
        return [p.steps for p in self.probes]

    @property
    def seeds(self) -> list[int]:
        return [p.seed for p in self.probes]

    def transform(self, z):
        total = self.estimates[0].transform(z)
        for est in self.estimates[1:]:
            total = total + est.transform(z)
        return total / self.k

    def density(self, lam):
        total = self.estimates[0].density(lam)
        for est in self.estimates[1:]:
            total = total + est.density(lam)
        return total / self.k

    def pooled_atoms(self) -> tuple[np.ndarray, np.ndarray]:
        """Atoms of the pooled measure: every probe's poles with weight/k."""
        locations = np.concatenate([est.poles for est in self.estimates])
        weights = np.concatenate([est.weights for est in self.estimates]) / self.k
        order = np.argsort(locations, kind="stable")
        return locations[order], weights[order]

    def summary(self) -> AsdSummary:
        locations, weights = self.pooled_atoms()
        return AsdSummary(
            gamma_minus=self.gamma_minus,
            gamma_plus=self.gamma_plus,
            poles=locations.tolist(),
            weights=weights.tolist(),
            k=self.k,
        )


def estimate_asd(op: CovarianceOperator, cfg: AveragingConfig, rule: StoppingRule,
                 backend: PoleBackend = "connection_coefficients", section_size: Optional[int] = None,
                 threads: Optional[int] = None) -> AsdEstimate:
    """
    Run k probes, average their tails and estimate each averaged extension.

    Probes are independent and fan out over ``threads`` workers; results are
    gathered by probe index, so the output does not depend on the worker count.

    Raises:
        ProbeFailedError: A probe failed; carries its index and seed.
        WindowTooLongError: q does not fit some probe.
    """
    threads = THREADS if threads is None else max(1, int(threads))
    probes = _fan_out(lambda j: _run_probe(op, rule, j, cfg.k, cfg.seed), cfg.k, threads)
    averaged = average_cholesky([p.extension for p in probes], cfg.q)
    estimates = _fan_out(lambda j: estimate_spectrum(averaged[j], backend, section_size), cfg.k, threads)
    logger.info(f"📊 ASD from {cfg.k} probe(s), steps={[p.steps for p in probes]}")
    return AsdEstimate(
        gamma_minus=averaged[0].gamma_minus,
        gamma_plus=averaged[0].gamma_plus,
        estimates=tuple(estimates),
        probes=tuple(probes),
    )


# ── Spike detection ───────────────────────────────────────────
def aggregate_counts(counts: Sequence[int], rule: Aggregation = "mode") -> int:
    """Mode with ties broken toward the smaller count, or the mean rounded half up."""
    if not counts:
        raise InvalidSpecError("no counts to aggregate")
    if rule == "mode":
        tally = Counter(int(c) for c in counts)
        best = max(tally.values())
        return min(value for value, n in tally.items() if n == best)
    if rule == "rounded_mean":
        return int(math.floor(sum(counts) / len(counts) + 0.5))
    raise InvalidSpecError(f"unknown aggregation {rule!r}")


def detection_threshold(gamma_plus: float, n: int, c_thresh: float, delta: float) -> float:
    return gamma_plus + c_thresh * n ** (-delta)


def detect_spikes(op: CovarianceOperator, cfg: DetectionConfig, avg: AveragingConfig, rule: StoppingRule,
                  threads: Optional[int] = None) -> DetectionReport:
    """
    Estimate the number of spikes from the poles of each probe's transform.

    Args:
        op (CovarianceOperator): W, of dimension N.
        cfg (DetectionConfig): C, δ, aggregation and pole backend.
        avg (AveragingConfig): k, q and the base seed.
        rule (StoppingRule): Lanczos stopping rule.
        threads (int | None): Worker cap, defaults to ``config.THREADS``.

    Returns:
        DetectionReport: r̂, per-probe counts and poles above the threshold.
    """
    start = time.perf_counter()
    asd = estimate_asd(op, avg, rule, backend=cfg.backend, section_size=cfg.section_size, threads=threads)
    threshold = detection_threshold(asd.gamma_plus, op.dim, cfg.c_thresh, cfg.delta)
    poles = [est.poles_above(threshold) for est in asd.estimates]
    counts = [int(p.size) for p in poles]
    r_hat = aggregate_counts(counts, cfg.aggregation)
    logger.info(f"🎯 Detected r̂={r_hat} (counts={counts}, threshold={threshold:.6f})")
    return DetectionReport(
        r_hat=r_hat,
        per_probe_counts=counts,
        poles=[p.tolist() for p in poles],
        gamma_minus=asd.gamma_minus,
        gamma_plus=asd.gamma_plus,
        threshold=threshold,
        steps=asd.steps,
        k=avg.k,
        c_thresh=cfg.c_thresh,
        delta=cfg.delta,
        seed=avg.seed,
        wall_time_ms=(time.perf_counter() - start) * 1000.0,
    )


def detect_trials(make_operator: Callable[[int], CovarianceOperator], cfg: DetectionConfig, avg: AveragingConfig,
                  rule_for: Callable[[int], StoppingRule], trials: int,
                  threads: Optional[int] = None) -> TrialsReport:
    """
    Repeat detection for seeds avg.seed .. avg.seed + trials − 1.

    ``make_operator(seed)`` supplies the operator of each trial (fixed data or
    a fresh simulation); ``rule_for(N)`` the stopping rule for its dimension.
    """
    if trials < 1:
        raise InvalidSpecError(f"trials must be ≥ 1, got {trials}")
    start = time.perf_counter()
    seeds = [avg.seed + t for t in range(trials)]
    r_hats = []
    for seed in seeds:
        op = make_operator(seed)
        report = detect_spikes(op, cfg, avg.model_copy(update={"seed": seed}), rule_for(op.dim), threads)
        r_hats.append(report.r_hat)
    tally = Counter(r_hats)
    probabilities = {r: tally[r] / trials for r in sorted(tally)}
    logger.info(f"🧪 {trials} trial(s): P(r̂) = {probabilities}")
    return TrialsReport(
        trials=trials,
        seeds=seeds,
        r_hats=r_hats,
        mean_r_hat=sum(r_hats) / trials,
        probabilities=probabilities,
        wall_time_ms=(time.perf_counter() - start) * 1000.0,
    )
