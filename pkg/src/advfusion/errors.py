"""Exception types mapped to CLI exit codes."""


class ConfigError(ValueError):
    """Invalid configuration or usage (CLI exit code 2)."""


class CheckpointError(ConfigError):
    """Checkpoint missing, corrupt, or incompatible with the requested run."""


class NumericalError(ArithmeticError):
    """Non-finite values or a numerically infeasible computation (exit code 4)."""
