"""Exception taxonomy shared by all specnet modules."""


class SpecnetError(Exception):
    """Base class for all errors raised by specnet."""


# --- quadratic differential construction / evaluation ---------------------

class NonSimpleZero(SpecnetError):
    """Two numerator roots cluster within tolerance: the zero is not simple."""


class CommonFactor(SpecnetError):
    """Numerator and denominator share a root within clustering tolerance."""


class NotGMN(SpecnetError):
    """The differential has no pole or no finite zero."""


class NotComplete(SpecnetError):
    """The differential has a pole of order 1."""


class PoleEvaluation(SpecnetError):
    """Evaluation requested at (or too close to) a pole."""


class RootFindingFailure(SpecnetError):
    """Newton polish of a polynomial root did not converge."""


class DegenerateZero(SpecnetError):
    """The local leading coefficient at a zero is numerically zero."""


# --- analytic continuation --------------------------------------------------

class PathTooCloseToCriticalPoint(SpecnetError):
    """A continuation path passes inside the safety radius of a critical point."""


class SubdivisionCapExceeded(SpecnetError):
    """Segment refinement hit the subdivision cap without taming sqrt variation."""


# --- trajectory integration -------------------------------------------------

class StepUnderflow(SpecnetError):
    """Adaptive step fell below 1e-14 without an event firing."""


class DegenerateLiftPair(SpecnetError):
    """A flow line was requested for two equal lifts (zero driving field)."""


# --- network assembly ---------------------------------------------------------

class SaddleAmbiguity(SpecnetError):
    """A wall ends too close to two zeroes, or in the near-saddle gray zone."""


class NoSaddleFreePhaseFound(SpecnetError):
    """Phase search exhausted its cap without finding a saddle-free network."""


class TangentialCrossing(SpecnetError):
    """A path meets a wall at an angle too shallow to classify the crossing."""


class EndpointOnWall(SpecnetError):
    """A path endpoint lies on the spectral network."""


# --- charges ------------------------------------------------------------------

class NotASaddle(SpecnetError):
    """The trajectory does not join two zeroes."""


class OnVerticalNetwork(SpecnetError):
    """The queried point lies on the vertical network; sheets cannot be ordered."""


class RealExactnessRequired(SpecnetError):
    """An operation valid only for real-exact differentials detected a violation."""


# --- groupoid -------------------------------------------------------------------

class ClearanceTooSmall(SpecnetError):
    """Chart parameters T/eta are incompatible with the wall geometry."""


# --- non-abelianization ----------------------------------------------------------

class MissingGenerator(SpecnetError):
    """The cochain lacks a value on a required generator lift."""


class ZeroValue(SpecnetError):
    """A cochain value is zero; local-system transports must be invertible."""


class CochainConvention(SpecnetError):
    """A cochain value violates the trivialized-short-path convention."""


class UnliftablePath(SpecnetError):
    """A transport path passes through (or too close to) a branch point."""


# --- configuration ---------------------------------------------------------------

class ConfigError(SpecnetError):
    """A run configuration failed to parse or validate."""
