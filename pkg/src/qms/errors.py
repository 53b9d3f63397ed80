"""Exception hierarchy.

Every error raised on purpose by the library derives from :class:`QMSError`.
Errors that signal a violated numerical precondition (as opposed to malformed
input) derive from :class:`NumericalPreconditionError`; the CLI maps those to
exit code 2.
"""


class QMSError(Exception):
    pass


class InvalidInput(QMSError, ValueError):
    pass


class DimensionMismatch(InvalidInput):
    pass


class NumericalPreconditionError(QMSError):
    pass


class NonFaithfulState(NumericalPreconditionError):
    pass


class NonFaithfulReference(NonFaithfulState):
    pass


class NonCommuting(NumericalPreconditionError):
    pass


class NonStationary(NonCommuting):
    pass


class ClusterNotIsolated(NumericalPreconditionError):
    pass


class DegenerateTop(NumericalPreconditionError):
    pass


class NoFixedPoint(NumericalPreconditionError):
    pass


class ConditionAViolated(NumericalPreconditionError):
    pass


class NotAProbability(NumericalPreconditionError):
    pass


class NonSimpleEigenvalue(NumericalPreconditionError):
    pass


class ZeroOverlap(NumericalPreconditionError):
    pass


class NonUniqueLeadingEigenvalue(NumericalPreconditionError):
    pass


class EmptyExposedSet(NumericalPreconditionError):
    pass


class DegenerateHistory(NumericalPreconditionError):
    pass


class ZeroProbabilityBranch(NumericalPreconditionError):
    pass


class TooManyProbes(InvalidInput):
    pass
