"""Exception types shared across the package."""


class NonConvergenceError(RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message: str, iterations: int = 0, ratio: float = float("nan")):
        super().__init__(message)
        self.iterations = iterations
        self.ratio = ratio
