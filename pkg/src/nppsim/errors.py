class SolverError(RuntimeError):
    """A numerical solve failed; ``history`` holds the residual/update trace."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])
