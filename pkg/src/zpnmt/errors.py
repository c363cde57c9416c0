"""Exception types shared across the package."""


class ZpnmtError(Exception):
    """Base class for all package errors."""


class ContractError(ZpnmtError):
    """A caller violated a documented precondition."""


class DimensionError(ContractError):
    """Array shapes are incompatible for the requested operation."""


class NumericError(ZpnmtError):
    """Non-finite values or numerically invalid input."""


class FormatError(ZpnmtError):
    """A corpus or model file does not parse; message carries the location."""


class EmptyDatasetError(ZpnmtError):
    """No usable examples remain after filtering."""


class AnnotationError(ZpnmtError):
    """A sentence pair cannot be annotated."""


class DivergenceError(ZpnmtError):
    """Training produced a non-finite loss; message carries the coordinates."""
