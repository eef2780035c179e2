"""Exception and warning types shared across the toolkit."""


class GraphTVError(Exception):
    """Base class for every error raised by this package."""


class IsolatedNodeError(GraphTVError):
    """A node ended up with zero degree; the normalization needs d_i > 0."""

    def __init__(self, node):
        self.node = int(node)
        super().__init__(f"node {self.node} is isolated (zero degree)")


class DegenerateFeaturesError(GraphTVError):
    """Feature rows unusable for the requested metric (e.g. zero norm with cosine)."""


class DimensionMismatchError(GraphTVError):
    """An array does not have the shape the operator or graph expects."""


class NoConvergenceError(GraphTVError):
    """An iterative routine hit its iteration cap before reaching tolerance.

    Carries the last estimate (scalar routines) or iterate (vector routines)
    so callers can inspect how far the run got.
    """

    def __init__(self, message, last_estimate=None, last_iterate=None):
        self.last_estimate = last_estimate
        self.last_iterate = last_iterate
        super().__init__(message)


class ShapeMismatchError(GraphTVError):
    """Two inputs that must agree in size do not."""


class EmptyClassError(GraphTVError):
    """A class has no seed node."""

    def __init__(self, label):
        self.label = int(label)
        super().__init__(f"class {self.label} has no seeds")


class NonFiniteError(GraphTVError):
    """NaN or Inf appeared in an iterate."""

    def __init__(self, message, iteration=None):
        self.iteration = iteration
        super().__init__(message)


class DegenerateStateError(GraphTVError):
    """The solver state collapsed to (numerically) zero and cannot be normalized."""


class GenerationFailedError(GraphTVError):
    """A random generator could not produce a valid instance within its retry budget."""


class FractionTooSmallError(GraphTVError):
    """The labeled fraction is too small to give every class at least one seed."""


class ParseError(GraphTVError):
    """A file could not be parsed.  ``line`` is 1-based when applicable."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NonFiniteValueError(GraphTVError):
    """A parsed file contains NaN or Inf.  ``line`` is 1-based."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DegenerateClassError(GraphTVError):
    """A ranking metric got all-positive or all-negative ground truth."""


class InvalidExperimentError(GraphTVError):
    """An experiment grid is empty or otherwise unrunnable."""


class DegenerateClassWarning(UserWarning):
    """A class had no positives (or no negatives) in the evaluation set."""


class NoProgressWarning(UserWarning):
    """The outer loop stagnated on its first iteration."""
