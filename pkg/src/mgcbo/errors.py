"""Exception types shared across the library."""


class NumericalError(RuntimeError):
    """A linear-algebra step failed (e.g. a Gram factorization that stays
    indefinite after jitter escalation). Carries condition diagnostics in
    the message when available."""


class TooFewSamplesError(ValueError):
    """A dependence statistic was asked for fewer paired samples than its
    definition supports."""


class StateError(RuntimeError):
    """An acquisition was evaluated against a state missing a required
    ingredient (e.g. MES without max-value samples)."""


class ObjectiveError(RuntimeError):
    """An external objective process failed: timeout, malformed response,
    or premature exit. The offending payload is kept in the message."""
