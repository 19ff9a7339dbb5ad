from typing import Optional


class SimulationError(Exception):
    """Base class for every error raised by the simulator."""
    exit_code = 1


class ConfigError(SimulationError, ValueError):
    """
    Invalid configuration or invalid operation input.
    `line` is the 1-based scenario-file line of the offending key, when known.
    """
    exit_code = 2

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}" if line is not None else message)


class GridMismatchError(ConfigError):
    """Two inputs that must share a grid do not."""


class GuardViolation(SimulationError):
    """An engine refused a request outside its cost or dimension guard."""
    exit_code = 3
