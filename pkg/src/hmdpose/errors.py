"""Exception hierarchy.

Input problems map to CLI exit code 2, degenerate data to exit code 3.
Non-fatal per-window conditions (empty or too-short windows) are raised by
the low-level functions and recorded by the batch callers.
"""


class HMDError(Exception):
    exit_code = 4


class InputError(HMDError):
    exit_code = 2


class MissingColumn(InputError):
    def __init__(self, column, path=None):
        self.column = column
        where = f" in {path}" if path else ""
        super().__init__(f"missing required column {column!r}{where}")


class MalformedRow(InputError):
    def __init__(self, line, reason, path=None):
        self.line = line
        self.reason = reason
        where = f"{path}:" if path else "line "
        super().__init__(f"{where}{line}: {reason}")


class MultiPersonFrame(MalformedRow):
    pass


class NonMonotonicTime(InputError):
    def __init__(self, line, path=None):
        self.line = line
        where = f"{path}:" if path else "line "
        super().__init__(f"{where}{line}: timestamp decreases")


class OutOfRange(InputError, ValueError):
    pass


class DegenerateData(HMDError):
    exit_code = 3


class DegenerateDataset(DegenerateData):
    pass


class TooFewSubjects(DegenerateData):
    pass


class SubjectExcluded(DegenerateData):
    pass


class EmptyWindow(HMDError):
    pass


class SkippedWindow(HMDError):
    pass


class SingleClass(HMDError, ValueError):
    pass


class NoPositives(SingleClass):
    pass


class NoFeasibleThreshold(HMDError):
    pass


class CalibrationInfeasible(HMDError):
    pass
