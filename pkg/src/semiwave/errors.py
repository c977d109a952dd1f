"""Exception hierarchy.

Every error carries the exit code the CLI maps it to: 2 for configuration
problems, 3 for numerical failures and 4 for violated model hypotheses.
"""


class SemiwaveError(Exception):
    exit_code = 3

    @property
    def name(self) -> str:
        return type(self).__name__


class ConfigError(SemiwaveError):
    exit_code = 2


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class NumericalError(SemiwaveError):
    exit_code = 3


class OutOfStrip(NumericalError):
    pass


class StripTooNarrow(NumericalError):
    pass


class NoRoot(NumericalError):
    pass


class BracketFailure(NumericalError):
    pass


class ZeroSpeed(NumericalError):
    pass


class GapSpeed(NumericalError):
    pass


class NonConvergent(NumericalError):
    pass


class WindowTooShort(NumericalError):
    pass


class DichotomyViolation(NumericalError):
    pass


class NoZeta1(NumericalError):
    pass


class NoCrossing(NumericalError):
    pass


class StabilityViolation(NumericalError):
    pass


class DomainTooNarrow(NumericalError):
    pass


class HypothesisError(SemiwaveError):
    exit_code = 4


class NotMonostable(HypothesisError):
    pass


class NoZeta2(HypothesisError):
    pass


class ThetaNotIncreasing(HypothesisError):
    pass
