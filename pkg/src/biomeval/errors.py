"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures onto its
stable contract: 1 usage/config/input parsing, 2 referential integrity,
3 empty/degenerate protocol, 4 protocol violation.
"""


class BiometricError(Exception):
    exit_code = 1


# -- usage / input parsing (exit 1) -----------------------------------------

class ConfigError(BiometricError, ValueError):
    pass


class MixedDimensions(BiometricError, ValueError):
    pass


class EmptySet(BiometricError, ValueError):
    pass


class BadWeights(BiometricError, ValueError):
    pass


class DuplicateName(BiometricError, KeyError):
    pass


class ReservedName(BiometricError, KeyError):
    pass


class ZeroNorm(BiometricError, ValueError):
    pass


class MixedKinds(BiometricError, ValueError):
    pass


class EmptyInput(BiometricError, ValueError):
    pass


class FormatError(BiometricError, ValueError):
    """Base for malformed files; messages always carry a location."""


class BadMagic(FormatError):
    pass


class UnsupportedVersion(FormatError):
    pass


class TruncatedFile(FormatError):
    def __init__(self, offset, message=None):
        self.offset = offset
        super().__init__(message or f"file truncated at byte offset {offset}")


class DimMismatch(FormatError):
    pass


class RaggedRow(FormatError):
    def __init__(self, line, message=None):
        self.line = line
        super().__init__(message or f"ragged row at line {line}")


class NonNumeric(FormatError):
    def __init__(self, line, column, value=None):
        self.line = line
        self.column = column
        super().__init__(f"non-numeric value {value!r} at line {line}, column {column}")


class EmptyFile(FormatError):
    pass


class SchemaMismatch(FormatError):
    pass


class BadValue(FormatError):
    def __init__(self, line, column, reason):
        self.line = line
        self.column = column
        self.reason = reason
        super().__init__(f"bad value at line {line}, column {column}: {reason}")


class IoFailure(BiometricError, OSError):
    pass


class EmptySeries(BiometricError, ValueError):
    pass


class NonPositiveXOnLogScale(BiometricError, ValueError):
    pass


# -- referential integrity (exit 2) -----------------------------------------

class MissingTemplate(BiometricError, KeyError):
    exit_code = 2

    def __init__(self, template_id, index=None):
        self.template_id = template_id
        self.index = index
        where = "" if index is None else f" (record {index})"
        super().__init__(f"missing template {template_id!r}{where}")

    def __str__(self):
        return self.args[0]


class IntegrityError(BiometricError, ValueError):
    exit_code = 2


# -- empty / degenerate protocol (exit 3) -----------------------------------

class EmptyClass(BiometricError, ValueError):
    exit_code = 3


class EmptyFold(BiometricError, ValueError):
    exit_code = 3


class TooFewFolds(BiometricError, ValueError):
    exit_code = 3


class NoMatedProbes(BiometricError, ValueError):
    exit_code = 3


class NoNonMatedProbes(BiometricError, ValueError):
    exit_code = 3


# -- protocol violation (exit 4) --------------------------------------------

class ClosedSetViolation(BiometricError, ValueError):
    exit_code = 4

    def __init__(self, subjects):
        self.subjects = sorted(set(subjects))
        super().__init__(
            "closed-set protocol has probes whose subjects are not enrolled: "
            + ", ".join(self.subjects)
        )
