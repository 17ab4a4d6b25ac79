"""
Exception hierarchy for the shift audit toolkit
"""

from typing import List, Optional


class ShiftAuditError(Exception):
    """Base class for every error raised by the toolkit"""


class ConfigError(ShiftAuditError):
    """Invalid or unreadable experiment configuration"""


class EmptyPartition(ShiftAuditError):
    """A partition with a positive fraction received no examples"""


class StratumTooSmall(ShiftAuditError):
    """A class has fewer examples than there are partitions to cover"""


class ParseError(ShiftAuditError):
    """A CSV cell could not be parsed"""

    def __init__(self, row: int, column: str, value: Optional[str] = None):
        self.row = row
        self.column = column
        self.value = value
        detail = f": {value!r}" if value is not None else ""
        super().__init__(f"cannot parse row {row}, column {column!r}{detail}")


class SchemaMismatch(ShiftAuditError):
    """The CSV header does not match the declared column roles"""


class DimensionMismatch(ShiftAuditError):
    """Feature vectors of incompatible dimensionality were combined"""


class IncompatibleTask(ShiftAuditError):
    """A learner or operation does not support the dataset's task"""


class UnsupportedAlgorithm(ShiftAuditError):
    """The algorithm id is recognised but not implemented"""


class NotEnoughQueries(ShiftAuditError):
    """Too few query points to form the requested bundles"""


class SingleClass(ShiftAuditError):
    """Only one of the target/shadow classes is present"""


class MissingGroup(ShiftAuditError):
    """A protected group has no bundles"""


class EmptySample(ShiftAuditError):
    """A score sample is empty"""


class DegenerateGrid(ShiftAuditError):
    """A sweep grid cannot support the requested fit"""


class PoolExhausted(ShiftAuditError):
    """A finite data pool cannot satisfy a draw"""


class RunFailed(ShiftAuditError):
    """An audit run failed; carries the setting tag and run index"""

    def __init__(self, setting: str, run_index: int, cause: BaseException):
        self.setting = setting
        self.run_index = run_index
        self.cause = cause
        super().__init__(f"{setting} run {run_index} failed: {type(cause).__name__}: {cause}")


class AuditFailed(ShiftAuditError):
    """One or more audit runs failed"""

    def __init__(self, failures: List[RunFailed]):
        self.failures = failures
        listing = "; ".join(str(f) for f in failures[:5])
        more = f" (+{len(failures) - 5} more)" if len(failures) > 5 else ""
        super().__init__(f"{len(failures)} run(s) failed: {listing}{more}")
