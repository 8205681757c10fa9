"""Error taxonomy for the whole toolkit.

Every raised condition names the violated precondition so callers can map
failures to exit codes without string matching.
"""


class QtlabError(Exception):
    """Base class for all toolkit errors."""


class DisconnectedPair(QtlabError):
    """Distance query between vertices with no connecting path."""


class RadiusExceeded(QtlabError):
    """An operation needs vertices beyond the configured window radius."""


class IndexClash(QtlabError):
    """Two family members were registered under the same index."""


class BudgetExceeded(QtlabError):
    """An enumeration hit its configured budget before finishing."""


class LipschitzViolation(QtlabError):
    """A pushforward map stretched some edge beyond the declared constant."""


class EmptyFamily(QtlabError):
    """A projection family operation needs at least one member."""


class ConfigInvalid(QtlabError):
    """A scenario or gluing config violates a structural invariant."""


class WindowExceeded(QtlabError):
    """A requested point or plane coordinate lies outside the window."""


class FiberParallel(QtlabError):
    """A gluing matrix maps fiber direction to fiber direction (m12 = 0)."""


class NotLoxodromic(QtlabError):
    """A word fails the linear-displacement check on the coned space."""


class BallCapExceeded(QtlabError):
    """A word ball grew past the configured element cap."""


class InsufficientRange(QtlabError):
    """A profile has too few rows in the fitting range."""


class InsufficientSample(QtlabError):
    """Too few usable sample pairs survive the window policy."""


class UnsupportedFormat(QtlabError):
    """An emitter was asked for a format it does not implement."""
