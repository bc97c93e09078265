"""Exception hierarchy.

Every error carries the CLI exit code it maps to: 2 for configuration
problems, 3 for bad input data, 4 for violated internal invariants.
"""


class AisGraphError(Exception):
    exit_code = 4


class ConfigError(AisGraphError):
    exit_code = 2


class InputError(AisGraphError):
    exit_code = 3


class InvariantViolation(AisGraphError):
    exit_code = 4


# ingest
class MalformedRow(InputError):
    pass


class OutOfRange(InputError):
    pass


class UnknownVesselType(InputError):
    pass


class TooShort(InputError):
    pass


# kinematics
class InsufficientSamples(AisGraphError):
    pass


class PoleProximity(AisGraphError):
    pass


# injector
class DegenerateSigma(AisGraphError):
    pass


class SchemaViolation(ConfigError):
    pass


class UnresolvableTarget(ConfigError):
    pass


# graph builder
class IncompleteCoverage(InvariantViolation):
    pass


class DanglingLabel(InvariantViolation):
    pass


# dataset io
class CorruptDataset(InputError):
    pass


class IoError(AisGraphError):
    exit_code = 3
