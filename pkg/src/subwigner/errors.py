"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A parameter lies outside its allowed domain."""


class ConfigError(ValueError):
    """An experiment or ensemble configuration failed validation."""


class NoClosedFormError(LookupError):
    """No closed-form overlap profile is registered for a pair of sequence kinds."""


class LabelMismatchError(KeyError):
    """Theory and simulation tables do not describe the same statistics."""

    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__(f"unmatched labels: {self.missing}")


class NumericalContractError(ArithmeticError):
    """A numerical invariant (e.g. a Hermitian trace residue) was violated."""
