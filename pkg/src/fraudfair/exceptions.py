"""Exception hierarchy shared across the package."""

from dataclasses import dataclass


class FraudFairError(Exception):
    """Base class for every error raised by fraudfair."""


@dataclass(frozen=True)
class RecordError:
    """One row-level validation problem. ``row`` is 0-based over data rows."""

    row: int
    kind: str
    message: str

    def __str__(self):
        return f"row {self.row}: {self.kind}: {self.message}"


class ValidationError(FraudFairError, ValueError):
    """Input records failed validation; ``errors`` lists every violation found."""

    def __init__(self, errors):
        self.errors = list(errors)
        shown = "; ".join(str(e) for e in self.errors[:10])
        more = f" (+{len(self.errors) - 10} more)" if len(self.errors) > 10 else ""
        super().__init__(f"{len(self.errors)} invalid record(s): {shown}{more}")

    @property
    def kinds(self):
        return {e.kind for e in self.errors}


class EmptyInputError(ValidationError):
    def __init__(self, message="input contains no records"):
        super().__init__([RecordError(-1, "EmptyInput", message)])


class NoPositivesError(FraudFairError, ValueError):
    """A threshold search was asked for on data with no fraud labels."""


class TargetUnreachableError(FraudFairError, ValueError):
    pass


class SingleClassError(FraudFairError, ValueError):
    pass


class NonFiniteLossError(FraudFairError, FloatingPointError):
    pass


class ArityMismatchError(FraudFairError, ValueError):
    pass


class InvalidConfigError(FraudFairError, ValueError):
    pass


class UnsortedInputError(FraudFairError, ValueError):
    pass


class EmptyTrainingError(FraudFairError, ValueError):
    pass


class EmptyGroupError(FraudFairError, ValueError):
    pass


class UnknownMetricError(FraudFairError, KeyError):
    pass


class MismatchedConfigsError(FraudFairError, ValueError):
    pass
