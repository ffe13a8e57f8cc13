"""Exception types raised across privcalc."""


class PrivCalcError(Exception):
    """Base class for all privcalc errors."""


class IncompatibleMetric(PrivCalcError, ValueError):
    pass


class InvalidPrivacyMap(PrivCalcError, ValueError):
    pass


class NegativeDistance(PrivCalcError, ValueError):
    pass


class DomainMismatch(PrivCalcError, ValueError):
    pass


class IncomparableLoss(PrivCalcError, TypeError):
    pass


class SchemaError(PrivCalcError, ValueError):
    pass


class DataSchemaMismatch(PrivCalcError, ValueError):
    """A CSV cell or record does not conform to the declared schema."""


class BoundsInverted(PrivCalcError, ValueError):
    pass


class UnclampedDomain(PrivCalcError, ValueError):
    pass


class OverlappingPieces(PrivCalcError, ValueError):
    """A record matched more than one (or zero) partition pieces."""


class InvalidArity(PrivCalcError, ValueError):
    pass


class NonpositiveScale(PrivCalcError, ValueError):
    pass


class InvalidProbability(PrivCalcError, ValueError):
    pass


class NonpositiveEpsilon(PrivCalcError, ValueError):
    pass


class HeterogeneousMeasures(PrivCalcError, ValueError):
    pass


class ArityMismatch(PrivCalcError, ValueError):
    pass


class BudgetExceeded(PrivCalcError):
    """A budget request was rejected; no state was changed."""


class NegativeBudget(PrivCalcError, ValueError):
    pass


class TooFewBlocks(PrivCalcError, ValueError):
    pass


class InvalidBeta(PrivCalcError, ValueError):
    pass


class NonpositiveAlpha(PrivCalcError, ValueError):
    pass


class NotEnumerable(PrivCalcError, TypeError):
    pass


class InsufficientSamples(PrivCalcError, ValueError):
    pass


class PlanInvalid(PrivCalcError, ValueError):
    pass


class BudgetViolation(PrivCalcError):
    pass
