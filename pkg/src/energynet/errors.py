class EnergyNetError(Exception):
    """Base class for library errors."""


class NetworkError(EnergyNetError, ValueError):
    """Bad network construction or an unknown vertex."""


class ParseError(NetworkError):
    """Malformed network document."""


class DomainError(EnergyNetError, ValueError):
    """Vertex function or operation used on the wrong truncation / mode."""


class NumericalError(EnergyNetError, ArithmeticError):
    """Singular system, failed eigensolve or unacceptable conditioning."""
