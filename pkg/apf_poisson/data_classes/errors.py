"""Named failures raised by the library.

Every error subclasses ``ValueError`` so callers that only care about bad input can
keep catching that.
"""


class NonFiniteError(ValueError):
    """A regularity integral grows without bound as the range widens."""


class EmptyDatasetError(ValueError):
    """The dataset holds no events, so the likelihood has no interior maximum."""


class NonConvergenceError(ValueError):
    """The optimizer ran out of iterations before meeting its tolerances."""


class SingularFisherError(ValueError):
    """The Fisher matrix of the base model is numerically singular."""


class InvalidEpsilonError(ValueError):
    """A test level outside the open interval (0, 1) was requested."""


class ModelMismatchError(ValueError):
    """A threshold table was calibrated for a different base model."""


class MissingEpsilonError(ValueError):
    """The requested test level is not present in the threshold table."""


class UnknownModelError(ValueError):
    """No bundled or registered base model has the requested identifier."""
