import argparse
import csv
import json
import logging
import sys
from typing import Optional, Sequence

import numpy as np
from pydantic import ValidationError

from spectral_spike.config import (
    DEFAULT_C_THRESH,
    DEFAULT_DELTA,
    DEFAULT_GRID_POINTS,
    LOG_LEVEL,
    env_threads,
)
from spectral_spike.errors import InvalidSpecError, SpectralSpikeError
from spectral_spike.schemas import (
    AveragingConfig,
    DetectionConfig,
    PoleComparison,
    RunConfig,
    SpikedModelSpec,
)
from spectral_spike.services.estimate_service.pipelines import (
    cholesky_extension,
    detect_spikes,
    detect_trials,
    detection_threshold,
    estimate_asd,
)
from spectral_spike.services.jacobi_service.continued_fraction import estimate_spectrum
from spectral_spike.services.lanczos_service.lanczos import StoppingRule, default_rule
from spectral_spike.services.operator_service.covariance import CovarianceOperator, SpikedModelOperator, make_operator
from spectral_spike.services.operator_service.sampling import (
    GAP_STUDY_SUPPORT,
    bulk_quantiles,
    gap_study_density,
    sample_probe,
    simulate,
)
from spectral_spike.services.poles_service.finite_section import default_section_size, poles_finite_section
from spectral_spike.storage.matrix_store import load_data, save_data

logger = logging.getLogger("spectral_spike.cli")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


# -------------------- Parser --------------------
def _spikes(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _model_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("simulated data")
    g.add_argument("--n", type=int, help="dimension N")
    g.add_argument("--m", type=int, help="sample count M")
    g.add_argument("--sigma2", type=float, help="bulk variance (constant bulk)")
    g.add_argument("--bulk", choices=["constant", "deterministic"], help="bulk population law")
    g.add_argument("--spikes", type=_spikes, help="comma-separated spike variances")
    g.add_argument("--dist", choices=["gaussian", "rademacher", "beta"], help="entry distribution")


def _input_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", help="data file (otherwise simulate from --n/--m/...)")
    p.add_argument("--format", choices=["csv", "binary"], help="data file format")
    p.add_argument("--scale", choices=["raw", "1/m"], help="W = YYᵀ (raw) or (1/M)YYᵀ")


def _pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, help="number of probe vectors")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--threads", type=int, help="worker cap (env SPECTRAL_SPIKE_THREADS)")
    p.add_argument("--max-steps", dest="max_steps", type=int, help="Lanczos step cap (or n for --stop fixed)")
    p.add_argument("--stop", choices=["fixed", "tail", "two-window"], help="Lanczos stopping rule")
    p.add_argument("--q", type=int, help="stopping/averaging window length")
    p.add_argument("--tol", type=float, help="stopping tolerance")
    p.add_argument("--backend", choices=["cc", "finite"], help="pole backend")
    p.add_argument("--section-size", dest="section_size", type=int, help="finite-section size K")
    p.add_argument("--c-thresh", dest="c_thresh", type=float, help="threshold constant C")
    p.add_argument("--delta", type=float, help="threshold exponent δ")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spectral-spike", description="Spectral estimation and spike detection for sample covariance matrices")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw Y = Σ^{1/2}X and write it to disk")
    _model_flags(p)
    p.add_argument("--seed", type=int, help="data seed")
    p.add_argument("--out", required=True, help="output file")
    p.add_argument("--format", choices=["csv", "binary"], help="output format")

    p = sub.add_parser("detect", help="estimate the number of spikes")
    _input_flags(p)
    _model_flags(p)
    _pipeline_flags(p)
    p.add_argument("--aggregation", choices=["mode", "rounded_mean"], help="combine per-probe counts")
    p.add_argument("--trials", type=int, help="repeat over seeds seed..seed+T−1")
    p.add_argument("--csv", help="write per-probe poles as CSV")

    p = sub.add_parser("asd", help="estimate the limiting density on a grid")
    _input_flags(p)
    _model_flags(p)
    _pipeline_flags(p)
    p.add_argument("--grid", type=int, help="number of grid points")
    p.add_argument("--out", required=True, help="density CSV")

    p = sub.add_parser("poles", help="compare both pole backends on one probe")
    _input_flags(p)
    _model_flags(p)
    _pipeline_flags(p)
    p.add_argument("--probe-seed", dest="probe_seed", type=int, help="probe seed (defaults to --seed)")
    return parser


def _run_config(args: argparse.Namespace) -> RunConfig:
    given = {k: v for k, v in vars(args).items() if v is not None}
    given.setdefault("threads", env_threads())
    given.setdefault("c_thresh", DEFAULT_C_THRESH)
    given.setdefault("delta", DEFAULT_DELTA)
    given.setdefault("grid", DEFAULT_GRID_POINTS)
    return RunConfig(**given)


# -------------------- Helpers --------------------
def _model_spec(cfg: RunConfig, seed: int) -> SpikedModelSpec:
    if cfg.bulk == "deterministic":
        quantiles = bulk_quantiles(gap_study_density, *GAP_STUDY_SUPPORT, cfg.n)
        return SpikedModelSpec(n=cfg.n, m=cfg.m, bulk_quantiles=quantiles, spikes=cfg.spikes,
                               distribution=cfg.dist, seed=seed)
    return SpikedModelSpec(n=cfg.n, m=cfg.m, sigma2=cfg.sigma2, spikes=cfg.spikes, distribution=cfg.dist, seed=seed)


def _operator_factory(cfg: RunConfig):
    """Seed → operator: fixed data from --input, or a fresh simulation per seed."""
    if cfg.simulated:
        def simulated(seed: int) -> CovarianceOperator:
            return SpikedModelOperator(_model_spec(cfg, seed))

        # validate the model flags up front
        _model_spec(cfg, cfg.seed)
        return simulated

    data = load_data(cfg.input, cfg.format)
    op = make_operator(data, "raw" if cfg.scale == "raw" else "one_over_m")
    return lambda seed: op


def _rule(cfg: RunConfig, n: int) -> StoppingRule:
    base = default_rule(n)
    max_steps = cfg.max_steps or base.max_steps
    if max_steps > n:
        raise InvalidSpecError(f"--max-steps {max_steps} exceeds the dimension N={n}")
    q = cfg.q or base.q
    tol = cfg.tol or base.tol
    if cfg.stop == "fixed":
        return StoppingRule.fixed(max_steps)
    if cfg.stop == "tail":
        return StoppingRule.tail(q=q, tol=tol, max_steps=max_steps)
    return StoppingRule.windows(q=q, gap=q, mean_tol=tol, tol=tol, max_steps=max_steps)


def _averaging(cfg: RunConfig, n: int) -> AveragingConfig:
    return AveragingConfig(k=cfg.k, q=cfg.q or default_rule(n).q, seed=cfg.seed)


def _detection(cfg: RunConfig) -> DetectionConfig:
    return DetectionConfig(c_thresh=cfg.c_thresh, delta=cfg.delta, aggregation=cfg.aggregation,
                           backend=cfg.pole_backend, section_size=cfg.section_size)


def _emit(payload: dict) -> None:
    print(json.dumps(payload))


# -------------------- Commands --------------------
def cmd_simulate(cfg: RunConfig) -> int:
    spec = _model_spec(cfg, cfg.seed)
    path = save_data(simulate(spec), cfg.out, cfg.format)
    echo = spec.model_dump(mode="json", exclude={"bulk_quantiles"})
    echo.update(out=str(path), format=cfg.format, bulk=cfg.bulk)
    _emit(echo)
    return EXIT_OK


def cmd_detect(cfg: RunConfig) -> int:
    factory = _operator_factory(cfg)
    if cfg.trials > 1:
        n_dim = cfg.n if cfg.simulated else factory(cfg.seed).dim
        report = detect_trials(factory, _detection(cfg), _averaging(cfg, n_dim),
                               lambda n: _rule(cfg, n), cfg.trials, cfg.threads)
        _emit(report.model_dump(mode="json"))
        return EXIT_OK

    op = factory(cfg.seed)
    report = detect_spikes(op, _detection(cfg), _averaging(cfg, op.dim), _rule(cfg, op.dim), cfg.threads)
    if cfg.csv:
        with open(cfg.csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["probe", "location"])
            for j, poles in enumerate(report.poles):
                for location in poles:
                    writer.writerow([j, repr(location)])
        logger.info(f"💾 Wrote per-probe poles to {cfg.csv}")
    _emit(report.to_json_dict())
    return EXIT_OK


def cmd_asd(cfg: RunConfig) -> int:
    op = _operator_factory(cfg)(cfg.seed)
    asd = estimate_asd(op, _averaging(cfg, op.dim), _rule(cfg, op.dim), backend=cfg.pole_backend,
                       section_size=cfg.section_size, threads=cfg.threads)
    h = (asd.gamma_plus - asd.gamma_minus) / cfg.grid
    grid = asd.gamma_minus + h * (np.arange(cfg.grid) + 0.5)
    values = asd.density(grid)
    with open(cfg.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda", "density"])
        for lam, rho in zip(grid, values):
            writer.writerow([repr(float(lam)), repr(float(rho))])
    logger.info(f"💾 Wrote {cfg.grid} density points to {cfg.out}")
    _emit(asd.summary().model_dump(mode="json"))
    return EXIT_OK


def cmd_poles(cfg: RunConfig) -> int:
    op = _operator_factory(cfg)(cfg.seed)
    seed = cfg.seed if cfg.probe_seed is None else cfg.probe_seed
    ext, _ = cholesky_extension(op, sample_probe(op.dim, seed), _rule(cfg, op.dim))
    threshold = detection_threshold(ext.gamma_plus, op.dim, cfg.c_thresh, cfg.delta)
    size = cfg.section_size or default_section_size(ext)

    est = estimate_spectrum(ext, "connection_coefficients", size)
    keep = est.poles > threshold
    cc_locations, cc_weights = est.poles[keep], est.weights[keep]
    finite = poles_finite_section(ext, size, margin=threshold - ext.gamma_plus)

    count_match = cc_locations.size == finite.size
    discrepancy = None
    if count_match:
        discrepancy = float(np.max(np.abs(cc_locations - finite))) if finite.size else 0.0
    comparison = PoleComparison(
        backend=cfg.pole_backend,
        section_size=size,
        gamma_minus=ext.gamma_minus,
        gamma_plus=ext.gamma_plus,
        threshold=threshold,
        connection_locations=cc_locations.tolist(),
        connection_weights=cc_weights.tolist(),
        finite_locations=finite.tolist(),
        count_match=count_match,
        max_discrepancy=discrepancy,
        connection_fallback=est.backend != "connection_coefficients",
    )
    _emit(comparison.model_dump(mode="json"))
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "detect": cmd_detect, "asd": cmd_asd, "poles": cmd_poles}


# -------------------- Entry point --------------------
def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=LOG_LEVEL, format="%(asctime)s %(levelname)s: %(message)s", stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        cfg = _run_config(args)
        return COMMANDS[cfg.command](cfg)
    except (ValidationError, InvalidSpecError) as e:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (SpectralSpikeError, OSError) as e:
        logger.error(f"❌ {args.command} failed: {e}")
        _emit({"error": str(e)})
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
