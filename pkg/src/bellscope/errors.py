"""Shared exception types.

Every refusal the library makes on purpose gets its own class so callers
(and the CLI exit-code mapping) can tell a resource cap from a modulus
restriction from a plain usage error.
"""


class BellscopeError(Exception):
    """Base class for library-specific failures."""


class ResourceCapError(BellscopeError):
    """A computation exceeded an explicit size cap.

    Carries ``progress`` (how far the computation got, in units named by
    ``unit``) so callers can report partial progress instead of a bare abort.
    """

    def __init__(self, message, progress=None, unit=None):
        super().__init__(message)
        self.progress = progress
        self.unit = unit


class CompositeModulusError(BellscopeError):
    """An operation whose supporting theory needs prime d got composite d."""


class ScenarioMismatchError(BellscopeError):
    """Two objects from different (n, c, d) scenarios were combined."""


class CatalogError(BellscopeError):
    """Unknown catalog id or parameter outside the supported range."""


class EigenConvergenceError(BellscopeError):
    """The Jacobi eigen-solver failed to converge within its sweep cap."""


class UnboundedPolytopeError(BellscopeError):
    """Vertex enumeration found a recession direction; input was not a polytope."""
