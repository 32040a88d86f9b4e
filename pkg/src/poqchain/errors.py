"""Exception hierarchy shared by all modules."""


class PoqError(Exception):
    """Base class for every error raised by poqchain."""


class DomainError(PoqError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ShapeError(PoqError, ValueError):
    """Array or vector dimensions do not match."""


class ConfigError(PoqError, ValueError):
    """Unknown names or inconsistent parameters in a configuration."""


class ResourceError(PoqError, RuntimeError):
    """A resource guard tripped (qubit cap, enumeration blow-up, budget)."""


class ContractError(PoqError, ValueError):
    """Inputs were produced under incompatible assumptions."""


class OrphanError(PoqError, KeyError):
    """A block references a parent the tree does not (yet) contain."""


class TableError(PoqError, ValueError):
    """A calibration table carries invalid entries."""


class IntegrityError(PoqError):
    """A persisted chain failed hash-link or invariant checks."""

    def __init__(self, message, block_id=None):
        super().__init__(message)
        self.block_id = block_id
