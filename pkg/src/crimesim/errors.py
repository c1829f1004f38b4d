"""Exception hierarchy shared across the simulator."""


class CrimesimError(Exception):
    """Base class for all crimesim errors."""


class InputError(CrimesimError):
    """Bad user input: malformed files, invalid coordinates, bad config."""


class LoadError(InputError):
    """City or record ingestion failed; message names the offending row/field."""


class ConfigError(InputError):
    """Run configuration violates an invariant; message names the key."""


class MetricError(CrimesimError):
    """Metric preconditions violated (support mismatch, degenerate input)."""


class ParseFailure(CrimesimError):
    """No parsable decision object found in a model completion."""

    def __init__(self, message, raw_text=""):
        super().__init__(message)
        self.raw_text = raw_text


class InvalidTarget(CrimesimError):
    """Decision names a target outside the offered target set."""

    def __init__(self, message, target_id=None, reasoning=""):
        super().__init__(message)
        self.target_id = target_id
        self.reasoning = reasoning


class RenderError(CrimesimError):
    """Prompt rendering failed; message names the unbound placeholder."""


class TransportError(CrimesimError):
    """A single transport attempt failed (connection, timeout)."""


class TransportExhausted(CrimesimError):
    """All transport retries failed; carries the last observed status."""

    def __init__(self, message, last_status=None):
        super().__init__(message)
        self.last_status = last_status


class PermanentRejection(CrimesimError):
    """Endpoint rejected the request with a non-retryable status."""

    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status


class EngineUnavailable(CrimesimError):
    """Decision engine could not produce a decision (transport exhausted)."""
