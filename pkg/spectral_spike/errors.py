"""Exception hierarchy shared by the library and the CLI."""


class SpectralSpikeError(Exception):
    """Base class for every error raised by spectral_spike."""


class DataIOError(SpectralSpikeError):
    """A data file could not be opened, read or written."""


class MalformedDataError(SpectralSpikeError):
    """A data file does not parse under its declared format."""

    def __init__(self, message: str, row: int | None = None, column: int | None = None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.row = row
        self.column = column


class InvalidSpecError(SpectralSpikeError):
    """A model spec, configuration or CLI flag violates its constraints."""


class DimensionMismatchError(SpectralSpikeError):
    """A vector does not match the operator dimension."""


class NonUnitProbeError(SpectralSpikeError):
    """The Lanczos start vector is not normalized."""


class LanczosBreakdownError(SpectralSpikeError):
    """Lanczos stopped before producing enough entries for an extension."""


class NotPositiveDefiniteError(SpectralSpikeError):
    """A Cholesky pivot was not strictly positive."""

    def __init__(self, index: int, pivot: float):
        super().__init__(f"Jacobi matrix is not positive definite: pivot {pivot:.3e} at index {index}")
        self.index = index
        self.pivot = pivot


class ExtensionTooShortError(SpectralSpikeError):
    """A Cholesky factor has fewer than two columns and cannot be extended."""


class PoleHitError(SpectralSpikeError):
    """A continued-fraction denominator vanished at a real evaluation point."""


class NegativeDensityError(SpectralSpikeError):
    """A recovered density came out below the round-off clamp."""


class WindowTooLongError(SpectralSpikeError):
    """The averaging window does not fit inside a probe's Cholesky factor."""


class ConnectionOverflowError(SpectralSpikeError):
    """Connection coefficients overflowed to non-finite values."""


class DegeneratePolynomialError(SpectralSpikeError):
    """Every symbol coefficient was trimmed away."""


class JoukowskiDomainError(SpectralSpikeError):
    """The Joukowski map was evaluated outside the punctured open unit disk."""


class PoleWeightError(SpectralSpikeError):
    """A pole weight came out non-positive, or two symbol roots nearly coincide."""


class SectionTooSmallError(SpectralSpikeError):
    """A finite section does not reach past the Lanczos prefix by the required slack."""


class EigensolverError(SpectralSpikeError):
    """An eigenvalue iteration did not converge."""


class OracleError(SpectralSpikeError):
    """A closed-form oracle was evaluated at a singular point or did not converge."""


class ProbeFailedError(SpectralSpikeError):
    """One probe of a multi-probe pipeline failed."""

    def __init__(self, probe_index: int, seed: int, cause: Exception):
        super().__init__(f"probe {probe_index} (seed {seed}) failed: {cause}")
        self.probe_index = probe_index
        self.seed = seed
        self.cause = cause
