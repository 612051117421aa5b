"""Exception types shared across the package.

Every validation failure raises a subclass of ``PslabError`` so the CLI can
map domain errors to exit status 2 and genuine compute failures to status 1.
"""


class PslabError(Exception):
    """Base class for all package-level errors."""


class InvalidDomainError(PslabError):
    """Domain specification violates its invariants (orientation, simplicity, ...)."""


class InvalidFieldError(PslabError):
    """Vector field unusable in the requested context (e.g. |X| = 0)."""


class GeometryError(PslabError):
    """Geometric precondition failed (point off boundary, flow leaves domain, ...)."""


class NoQuasimodeError(PslabError):
    """Spectral point outside the instability region or on its boundary parabola."""


class ExceptionalPointError(PslabError):
    """Spectral point at the excluded value where the normal momentum degenerates."""


class WrongSideError(PslabError):
    """Base point is not on the illuminated part of the boundary."""


class SeedRestrictionError(PslabError):
    """One-dimensional restriction: real z at or above the quarter-field threshold."""


class CutoffError(PslabError):
    """Cutoff collar too wide: Im(phase) fails to stay positive on the boundary."""


class ResolutionError(PslabError):
    """Grid or quadrature too coarse for the requested scales."""


class OracleUnavailableError(PslabError):
    """Closed-form spectrum oracle not defined for this domain."""


class OutOfChartError(PslabError):
    """Characteristic chart inversion left its validity neighborhood."""


class SupercriticalError(PslabError):
    """Exit-time MGF exponent at or above b^2/4: the moment may be infinite."""


class UnreliableTailError(PslabError):
    """Too many truncated paths for a trustworthy tail estimate."""


class ConfigError(PslabError):
    """Run configuration failed validation; carries the offending key."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"config key '{key}': {message}")
