class UnknownStateError(KeyError):
    """A state id that the transition system does not declare."""


class UnknownActionError(KeyError):
    """An action id that the transition system does not declare."""


class SingularSystemError(ArithmeticError):
    """The absorbing-chain system had no unique solution."""


class EnumerationLimitExceeded(RuntimeError):
    """A brute-force enumeration would exceed its configured cap."""


class StateLimitExceeded(RuntimeError):
    """A builder produced more states than allowed."""
