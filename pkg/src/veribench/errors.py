"""Exception types shared across the toolkit."""


class VeribenchError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(VeribenchError):
    """Invalid evaluation configuration (overlapping token sets, bad preset, ...)."""


class TableParseError(VeribenchError):
    """Malformed CSV content (ragged rows, missing header)."""


class TableSchemaError(VeribenchError):
    """Table structure violates its data-model spec (duplicate or missing columns)."""


class ColumnLookupError(VeribenchError):
    """Requested column is not present in the table."""


class ShapeError(VeribenchError):
    """Operands have incompatible lengths."""


class BundleError(VeribenchError):
    """Benchmark bundle is missing required artifacts or is internally inconsistent."""


class LogFormatError(VeribenchError):
    """Evaluation log cannot be parsed (unknown schema version, malformed record)."""


class UsageError(VeribenchError):
    """Operation invoked with arguments that make no sense."""


class InputError(VeribenchError):
    """Caller-supplied data violates a precondition (duplicate ids, bad labels)."""


class SamplingError(VeribenchError):
    """Requested sample cannot be drawn (quota exceeds stratum size)."""


class UndefinedKappaError(VeribenchError):
    """Fleiss' kappa is undefined because expected agreement equals 1."""


class LedgerReferenceError(VeribenchError):
    """Classification refers to a column that is not part of the audit scope."""


class PolicyError(VeribenchError):
    """Correction would violate a safety rule (e.g. emptying a data model)."""


class ConsistencyError(VeribenchError):
    """Artifacts derived from different ledger snapshots were combined."""


class ProtocolError(VeribenchError):
    """External analyst endpoint returned a non-conforming payload."""

    def __init__(self, message: str, payload: bytes | str | None = None):
        super().__init__(message)
        self.payload = payload


class AnalysisDispatchError(VeribenchError):
    """One or more tasks failed during analysis dispatch; others completed."""

    def __init__(self, failures: dict, reports: list):
        names = ", ".join(sorted(failures))
        super().__init__(f"analysis failed for tasks: {names}")
        self.failures = failures
        self.reports = reports
