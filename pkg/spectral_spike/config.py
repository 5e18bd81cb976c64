import os
import logging
from dotenv import load_dotenv

# Load environment variables from .env file
_ = load_dotenv(override=True)

logger = logging.getLogger(__name__)


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name, "")
    if not raw.strip():
        return default
    try:
        return int(raw)
    except ValueError:
        logger.warning(f"⚠️  {name}={raw!r} is not an integer; using {default}")
        return default


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name, "")
    if not raw.strip():
        return default
    try:
        return float(raw)
    except ValueError:
        logger.warning(f"⚠️  {name}={raw!r} is not a number; using {default}")
        return default


def env_threads() -> int:
    """Worker cap from SPECTRAL_SPIKE_THREADS, read at call time."""
    return max(1, _env_int("SPECTRAL_SPIKE_THREADS", 1))


## Worker pool (fallback for --threads)
THREADS = env_threads()

## Logging
LOG_LEVEL = os.getenv("SPECTRAL_SPIKE_LOG_LEVEL", "WARNING").upper()

## Detection threshold  γ̂₊ + C·N^{-δ}
DEFAULT_C_THRESH = _env_float("SPECTRAL_SPIKE_C_THRESH", 1.0)
DEFAULT_DELTA = _env_float("SPECTRAL_SPIKE_DELTA", 0.25)

## Finite-section backend: K = max(SECTION_MIN, 20·n)
DEFAULT_SECTION_MIN = _env_int("SPECTRAL_SPIKE_SECTION_MIN", 2000)

## Density grid for the asd command
DEFAULT_GRID_POINTS = _env_int("SPECTRAL_SPIKE_GRID", 200)
