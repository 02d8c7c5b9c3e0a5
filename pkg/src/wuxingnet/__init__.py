"""Five-element symmetric ODE neurons with correlation-driven training."""

__version__ = "0.1.0"
