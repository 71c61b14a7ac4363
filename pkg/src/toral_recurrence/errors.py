"""Exception hierarchy.

Each error carries the process exit code the CLI maps it to.
"""


class ToralRecurrenceError(Exception):
    exit_code = 1


class SingularMatrix(ToralRecurrenceError):
    pass


class InvalidSpectrum(ToralRecurrenceError):
    exit_code = 2


class HypothesisViolated(ToralRecurrenceError):
    exit_code = 2


class RootOfUnity(HypothesisViolated):
    pass


class NotDiagonalizableOverQ(HypothesisViolated):
    pass


class NonIntegerEigenvalues(HypothesisViolated):
    pass


class Infeasible(HypothesisViolated):
    pass


class EmptyLevel(ToralRecurrenceError):
    """A parent node has no admissible children; the level condition should prevent this."""


class CapExceeded(ToralRecurrenceError):
    exit_code = 3

    def __init__(self, size, cap=None):
        self.size = size
        self.cap = cap
        msg = f"size {size} exceeds cap {cap}" if cap is not None else f"size {size} exceeds cap"
        super().__init__(msg)


class ScaleTooFine(CapExceeded):
    pass


class PrecisionFailure(ToralRecurrenceError):
    exit_code = 4


class AmbiguousComparison(PrecisionFailure):
    pass
