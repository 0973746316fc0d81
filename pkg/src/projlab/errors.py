"""Exception types shared across the package."""


class DomainError(ValueError):
    """Parameter lies outside a curve or lattice domain."""


class NonDegeneracyError(ValueError):
    """A frame determinant fell below the non-degeneracy floor."""


class DegenerateInputError(ValueError):
    """Input admits no unique answer (e.g. nearest point from the origin)."""


class SingularTorsionError(ValueError):
    """Torsion too close to zero for a reparametrization."""


class ResolutionError(ValueError):
    """Grid too coarse to represent the requested object."""


class InvalidSpecError(ValueError):
    """Malformed construction parameters."""


class PreconditionError(ValueError):
    """A measured precondition failed before the main computation."""
