"""Exceptions that callers (and the CLI's exit codes) distinguish."""


class EstimationError(ValueError):
    """An estimator could not produce a number from the data it was given."""


class DegenerateEnsembleError(EstimationError):
    """Every replicate gave the same value, so fluctuation statistics are void."""


class FlatWithinNoiseError(EstimationError):
    """All shape differences are indistinguishable from zero."""


class UnboundedDistributionError(EstimationError):
    """A bound-dependent diagnostic was requested for an unbounded weight law."""


class ResourceCapError(RuntimeError):
    """A computation would exceed the configured size cap."""
