"""Exception taxonomy for the simulator.

Every error raised by the library derives from :class:`CaIsacError` so callers
can catch one base class at the CLI boundary.
"""


class CaIsacError(Exception):
    """Base class for all library errors."""


class InvalidConfigError(CaIsacError):
    """A numerology, array, or scenario value violates its invariants."""


class UnsupportedNumerologyError(CaIsacError):
    """The two bands' subcarrier spacings are not an integer multiple apart."""


class InconsistentConfigError(CaIsacError):
    """Carrier frequencies and spacings disagree (fractional part outside [0, 1))."""


class CpTooShortError(CaIsacError):
    """A cyclic prefix does not cover the scene's maximum round-trip delay."""


class OverloadedSpatialLayersError(CaIsacError):
    """More spatial layers requested than transmit antennas."""


class DimensionMismatchError(CaIsacError):
    """Array shapes are inconsistent with the configured numerology."""


class InvalidInputError(CaIsacError):
    """A numeric argument is outside its documented domain."""


class DegenerateFrameError(CaIsacError):
    """Transmit-data removal hit a zero-energy sensing vector."""


class InsufficientPeaksError(CaIsacError):
    """Fewer spectrum peaks than the requested model order.

    The partial result (peaks that were found) is attached as ``partial``.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class BandsNotAlignedError(CaIsacError):
    """Doppler fusion requested but the carrier-duration products differ."""


class PairingError(CaIsacError):
    """Per-band estimate lists cannot be paired one-to-one."""


class DegenerateGeometryError(CaIsacError):
    """Fisher information is singular; no finite bound for some parameter."""


class ScenarioError(CaIsacError):
    """Scenario file is malformed; message carries file and line context."""


class PlotError(CaIsacError):
    """Plot request cannot be satisfied (empty CSV or unknown column)."""


class PipelineStageError(CaIsacError):
    """A pipeline stage failed; message carries the stage tag."""
