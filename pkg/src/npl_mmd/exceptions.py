class SimulationError(ValueError):
    """A simulator produced an invalid state; ``step`` is the time index."""

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class DivergedOptimisationError(RuntimeError):
    """Loss or gradient became non-finite at optimiser step ``step``."""

    def __init__(self, step, message="non-finite loss or gradient"):
        super().__init__(f"{message} at step {step}")
        self.step = step
