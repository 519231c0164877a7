"""Exception types shared across the package."""


class CylBilliardsError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(CylBilliardsError):
    """Inputs do not share a common ambient dimension."""


class DependentBasis(CylBilliardsError):
    """Integer basis vectors are linearly dependent over the rationals."""


class BaseDimTooSmall(CylBilliardsError):
    """Cylinder base space would have dimension < 2."""


class RadiusTooLarge(CylBilliardsError):
    """Cylinder radius reaches the injectivity bound of its projected lattice."""


class StartsInsideScatterer(CylBilliardsError):
    """Phase point lies strictly inside a scatterer."""


class OutwardVelocity(CylBilliardsError):
    """Reflection requested with non-incoming velocity."""


class TangentialEvent(CylBilliardsError):
    """Collision too close to grazing for the linearized operators."""


class SingularSegment(CylBilliardsError):
    """Segment carries a singularity flag and cannot be analyzed."""


class EmptySequence(CylBilliardsError):
    """Operation requires at least one collision event."""


class NotNeutralError(CylBilliardsError):
    """Translation vector is inconsistent with the per-collision constraints."""

    def __init__(self, event_index: int, residual: float):
        self.event_index = event_index
        self.residual = residual
        super().__init__(
            f"translation not neutral at event {event_index} (residual {residual:.3e})"
        )


class UnknownCylinderIndex(CylBilliardsError):
    """Symbolic sequence references a cylinder index outside 1..k."""


class SingularityEncountered(CylBilliardsError):
    """Long-run computation aborted by a singularity flag; carries a partial report."""

    def __init__(self, message: str, partial_report=None):
        self.partial_report = partial_report
        super().__init__(message)


class BudgetExceeded(CylBilliardsError):
    """Enumeration exceeded its configured work budget."""


class TableFormatError(CylBilliardsError):
    """Malformed table or scenario document; names the offending field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
