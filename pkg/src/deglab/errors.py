"""Exception types shared across the laboratory.

Every failure mode that a caller is expected to branch on gets its own
class; plain ValueError is reserved for programming errors (bad argument
types, malformed arrays).
"""


class LabError(Exception):
    """Base class for all laboratory-specific failures."""


class GridTooCoarse(LabError):
    """Grid has too few nodes for the requested stencil or norm order."""


class WeightSingularOnSupport(LabError):
    """A norm weight is infinite/undefined somewhere the field is nonzero."""


class NonpositiveField(LabError):
    """A quantity that must be strictly positive (a background profile,
    a Jacobian) is zero or negative on the grid."""


class NonrealPower(LabError):
    """A fractional power of a negative number was requested (X < 0 with
    non-integer exponent in the principal symbol)."""


class OutsideDomainOfValidity(LabError):
    """A closed-form expression was evaluated past the time where its
    defining bracket stays positive."""


class NoDoubling(LabError):
    """The frequency magnitude does not grow from this initial point, so
    no doubling time exists."""


class PrincipalVanishes(LabError):
    """The principal coefficient a(x) vanishes inside the sampling window,
    so the ratio b/a is undefined there."""


class UnderResolved(LabError):
    """The grid does not resolve the requested oscillation (too few nodes
    per wavelength, or too much spectral mass in the top octave)."""


class DegenerateOnPath(LabError):
    """The background profile vanishes somewhere on the integration path
    of a coordinate transform."""


class BetaBlowup(LabError):
    """The cubic-background amplitude ODE leaves its interval of existence
    before the requested time."""


class X1ConditionViolated(LabError):
    """The background fails the flatness condition that the packet
    construction needs on (0, x1]."""


class UnstableGrowth(LabError):
    """The discrete evolution produced values beyond the blowup guard."""


class DegenerateFit(LabError):
    """A rate fit was requested on data with no usable variation."""


class ConfigError(LabError):
    """A run configuration failed schema validation."""

    def __init__(self, message, line=None, field=None):
        if line is not None:
            message = "line %d: %s" % (line, message)
        if field is not None:
            message = "[%s] %s" % (field, message)
        super().__init__(message)
        self.line = line
        self.field = field
