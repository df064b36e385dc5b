"""Exception hierarchy.

Every fatal error maps to a CLI exit code: input/parse problems exit 2,
configuration and consistency problems exit 3.
"""

from __future__ import annotations


class JackupAisError(Exception):
    exit_code = 1


class InputError(JackupAisError):
    """Malformed or unusable input data."""

    exit_code = 2


class ConfigurationError(JackupAisError):
    exit_code = 3


class InconsistencyError(JackupAisError):
    """Derived quantities contradict each other (e.g. negative transit time)."""

    exit_code = 3


class InsufficientDataError(JackupAisError):
    exit_code = 3


class InfeasibleError(ConfigurationError):
    """Clustering asked for more clusters than there are points."""


# --- NMEA / AIVDM -----------------------------------------------------------


class NmeaError(InputError):
    pass


class FramingError(NmeaError):
    """Sentence lacks the '!' ... '*hh' framing."""


class ChecksumError(NmeaError):
    pass


class DecodeError(NmeaError):
    pass


class IncompleteMessageError(NmeaError):
    pass


class DuplicateFragmentError(NmeaError):
    pass


class TruncationError(NmeaError):
    pass


class SchemaError(InputError):
    """A mapped CSV column is missing."""
