"""Exception types shared across the simulator."""


class ParameterError(ValueError):
    """A physical parameter is outside its valid domain."""


class ConfigError(ValueError):
    """A configuration file or value is invalid."""


class FitConvergenceError(RuntimeError):
    """PSD parameter fit did not converge within the iteration cap.

    Carries the best parameters seen so far in ``best_params`` and the
    accepted residual history in ``residual_history``.
    """

    def __init__(self, message, best_params, residual_history):
        super().__init__(message)
        self.best_params = best_params
        self.residual_history = residual_history
