"""Exception types shared across the package."""


class ArgumentError(ValueError):
    """A caller-supplied argument violates a documented precondition."""


class ConstructionError(RuntimeError):
    """A constructive procedure (e.g. a moment linear solve) failed."""


class DomainError(ValueError):
    """An evaluation point lies outside an expression's declared domain."""


class EvaluationError(RuntimeError):
    """A non-finite intermediate or failed sub-quadrature during evaluation."""

    def __init__(self, message, path=()):
        super().__init__(message)
        self.path = tuple(path)

    def with_frame(self, frame):
        err = EvaluationError(self.args[0], (frame, *self.path))
        return err

    def __str__(self):
        base = self.args[0]
        if self.path:
            return f"{base} [at {' -> '.join(self.path)}]"
        return base


class InsufficientDataError(RuntimeError):
    """Not enough usable samples for an asymptotic fit."""
