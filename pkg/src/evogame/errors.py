"""Exception types shared across the package.

Two failure families matter to callers (and to the CLI exit codes):
bad inputs/configuration vs. numerical procedures that ran but failed.
"""


class ConfigError(ValueError):
    """Invalid input, configuration, or precondition violation."""


class NumericFailure(RuntimeError):
    """A numerical routine ran but could not produce a valid result."""
