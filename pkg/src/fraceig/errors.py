"""Exception types raised across the package."""


class FracEigError(Exception):
    """Base class for all errors raised by fraceig."""


class ValidationError(FracEigError, ValueError):
    """Invalid input: bad domain, bad config, malformed weight, ..."""


class NotInClassM(FracEigError):
    """The weight has non-negative integral or a trivial positive part."""


class NoPositivePrincipalEigenvalue(FracEigError):
    """The truncated pencil has no positive eigenvalue."""


class NoSecondEigenvalue(FracEigError):
    """The truncated pencil has no negative eigenvalue (no lambda_{-1})."""


class CertificateRejected(FracEigError):
    """A ball certificate (x0, rho, delta, M) failed verification."""


class RearrangementDegenerate(FracEigError):
    """psi is constant on the grid, so its superlevel sets carry no information."""


class UnknownPreset(FracEigError, KeyError):
    """Requested preset environment does not exist."""


class BlowUp(FracEigError):
    """Simulation mass exploded; the time step is too large."""
