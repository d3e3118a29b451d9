"""Exception hierarchy shared across the package.

Every domain error raised by petrank derives from PetrankError so the CLI
can map failures to exit codes without enumerating module-level classes.
"""


class PetrankError(Exception):
    """Base class for all petrank domain errors."""


class ConfigError(PetrankError):
    """Invalid or incomplete pipeline configuration."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"config field '{field}': {message}")


class UpstreamMissing(PetrankError):
    """A pipeline command was run before the command it depends on."""

    def __init__(self, command: str):
        self.command = command
        super().__init__(f"required upstream command has not been run: '{command}'")
