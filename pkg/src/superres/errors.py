"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input object violates one of its declared invariants."""


class DomainError(ValueError):
    """A parameter vector lies outside the domain a family declares."""


class SingularSpacingError(ValueError):
    """Pulse spacing puts omega*tau at an odd multiple of pi, where the
    accumulated phase cannot be nullified."""


class SingularityError(ValueError):
    """Fisher information requested at a probability of exactly 0 or 1
    without the analytic-limit form."""


class ScanFailedError(RuntimeError):
    """A detuning scan did not cover the resonance dip."""
