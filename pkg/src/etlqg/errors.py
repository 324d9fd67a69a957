"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Bad scenario/model configuration: wrong shapes, invalid matrices,
    unknown or malformed config keys. Maps to CLI exit code 2."""


class NumericalError(RuntimeError):
    """Numerical failure during filtering or gain synthesis (singular
    innovation covariance, ill-conditioned Riccati step). Maps to CLI
    exit code 3."""
