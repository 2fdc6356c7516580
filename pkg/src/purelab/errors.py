"""Exception types shared across the package."""


class InvariantViolation(Exception):
    """A structural contract was broken (bad weights, bounds, shapes)."""


class CapabilityError(InvariantViolation):
    """An attack asked for access its threat scenario does not grant."""


class DatasetFormatError(ValueError):
    """A dataset file does not follow the sparse text format."""
