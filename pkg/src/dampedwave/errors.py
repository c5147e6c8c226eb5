"""Shared error types mapped to CLI exit codes."""


class ConfigError(ValueError):
    """Invalid experiment configuration (exit code 2)."""


class HorizonError(RuntimeError):
    """Requested times violate the no-wraparound horizon of the box (exit code 3)."""


class DivergenceError(RuntimeError):
    """A numerical quantity diverged or failed to converge (exit code 4)."""


class QuadratureError(DivergenceError):
    """Composite quadrature did not reach the requested tolerance."""
