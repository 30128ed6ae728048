"""Exception types raised across the package."""


class QVolterraError(Exception):
    """Base class for all package errors."""


class NumericalError(QVolterraError):
    """A numerical routine could not deliver a trustworthy result."""


class TruncationOverflow(NumericalError):
    """The moment basis grew past the configured size cap."""


class DefectiveDrift(NumericalError):
    """Drift matrix is (numerically) not diagonalizable."""


class NonDecayingKernel(NumericalError):
    """A kernel term has a rate with non-positive real part."""


class ExpmOverflow(NumericalError):
    """``||A t||`` exceeds the bound for which ``expm_action`` is accurate."""


class SingularResolvent(NumericalError):
    """``s`` coincides with an eigenvalue of the drift matrix."""


class TruncationLeak(NumericalError):
    """Fock-space population reached the truncation edge."""


class UnphysicalCovariance(NumericalError):
    """Second moments violate the uncertainty bound."""


class GridTooLarge(QVolterraError):
    """Brute-force quadrature requested on a grid above the cost cap."""


class SegmentTooShort(QVolterraError):
    """Spectrum segment has fewer samples than required."""


class PortMismatch(QVolterraError):
    """Port counts do not agree at a series junction."""


class NotLinear(QVolterraError):
    """A component expected to be linear carries higher-order entries."""


class UnknownComponent(QVolterraError):
    """A network expression references an undefined component."""


class SpecParseError(QVolterraError):
    """Malformed network spec file."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class UnknownComponentType(SpecParseError):
    pass


class MissingParameter(SpecParseError):
    pass


class DuplicateName(SpecParseError):
    pass
