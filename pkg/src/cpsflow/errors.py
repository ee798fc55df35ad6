class CpsError(RuntimeError):
    """ Base class of every error raised by cpsflow. """


class PreconditionError(CpsError):
    """ Argument outside of its documented domain. """


################################ Framework / dataset ################################
class UnknownIndicatorError(CpsError):
    def __init__(self, code: str):
        super().__init__(f"Unknown indicator code \"{code}\"")
        self.code = code


class OrphanStudentError(CpsError):
    pass


class DatasetValidationError(CpsError):
    def __init__(self, report):
        super().__init__(f"Dataset failed validation with {len(report.violations)} violation(s)")
        self.report = report


class NonMonotonePhaseError(DatasetValidationError):
    """ Validation failed and the first violation is a phase log that goes backwards. """


class MixedConditionTriadError(DatasetValidationError):
    """ Validation failed and the first violation is a triad spanning both conditions. """


################################ Ingest ################################
class MalformedRowError(CpsError):
    def __init__(self, file_name: str, line_number: int, reason: str):
        super().__init__(f"{file_name}:{line_number}: {reason}")
        self.file_name = file_name
        self.line_number = line_number
        self.reason = reason


class DuplicatePhaseEntryError(CpsError):
    pass


class UnalignedUtteranceError(CpsError):
    pass


################################ Networks ################################
class EmptyConditionError(CpsError):
    pass


class ZeroGlobalMaxError(CpsError):
    pass


class DegenerateNetworkError(CpsError):
    pass


class UnknownNodeError(CpsError):
    pass


################################ Pattern mining ################################
class EmptyDatabaseError(CpsError):
    pass


class NoQualifyingSupportError(CpsError):
    pass


################################ Statistics ################################
class EmptySampleError(CpsError):
    pass


class OutOfRangeUError(CpsError):
    pass


class LengthMismatchError(CpsError):
    pass


################################ Synthetic data ################################
class InvalidSpecError(CpsError):
    pass
