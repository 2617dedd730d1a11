"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid input: parameter constraints or data-format checks failed."""


class SolverError(RuntimeError):
    """Base class for failures of the finite-difference solver."""


class InstabilityError(SolverError):
    """Time march produced a non-finite value or broke a monotone bound.

    Carries the pseudo-time and node index where the violation occurred.
    """

    def __init__(self, message: str, t: float | None = None, node: int | None = None):
        if t is not None or node is not None:
            message = f"{message} (t={t!r}, node={node!r})"
        super().__init__(message)
        self.t = t
        self.node = node


class ConvergenceError(SolverError):
    """An iteration cap was hit before the stopping rules were satisfied."""

    def __init__(self, message: str, loop: str | None = None,
                 rel_gap: float | None = None, abs_gap: float | None = None):
        if loop is not None:
            message = (f"{message} [loop={loop}, last rel gap={rel_gap!r}, "
                       f"last abs gap={abs_gap!r}]")
        super().__init__(message)
        self.loop = loop
        self.rel_gap = rel_gap
        self.abs_gap = abs_gap
