"""Exception hierarchy shared across the package."""


class HybridILError(Exception):
    """Base class for all package errors."""


class ValidationError(HybridILError):
    """Input or invariant violation (bad shapes, ranges, schemas)."""


class PersistenceError(HybridILError):
    """Dataset or checkpoint could not be written/read."""


class NotFoundError(HybridILError):
    """A referenced file, demo id, or artifact does not exist."""


class NumericError(HybridILError):
    """Non-finite values encountered where finite ones are required."""


class EpisodeDoneError(HybridILError):
    """An environment was stepped after its episode terminated."""


class GenerationError(HybridILError):
    """Scripted demonstration could not be produced for a sampled scene."""
