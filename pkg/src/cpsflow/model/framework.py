import csv
import io
import re
from dataclasses import dataclass
from enum import Enum
from functools import cache
from pathlib import Path
from typing import Any

from cpsflow.errors import UnknownIndicatorError


class Dimension(str, Enum):
    PROBLEM_SOLVING = "ProblemSolving"
    SCRIPTING = "Scripting"
    OTHER = "Other"


class Subskill(str, Enum):
    SS1 = "SS1"
    SS2 = "SS2"
    SS3 = "SS3"
    SS4 = "SS4"
    SS5 = "SS5"
    SS6 = "SS6"
    SS7 = "SS7"
    SS8 = "SS8"
    SS9 = "SS9"
    SS10 = "SS10"
    SC11 = "SC11"
    SC12 = "SC12"
    OTHER = "Other"

    @property
    def label(self) -> str:
        return _SUBSKILL_LABELS[self]


_SUBSKILL_LABELS = {
    Subskill.SS1: "Sense-making",
    Subskill.SS2: "Building shared understanding",
    Subskill.SS3: "Formulating a solution",
    Subskill.SS4: "Defining roles and responsibilities",
    Subskill.SS5: "Reaching a solution",
    Subskill.SS6: "Maintaining roles and responsibilities",
    Subskill.SS7: "Maintaining shared understanding",
    Subskill.SS8: "Evaluating the solution",
    Subskill.SS9: "Reflecting",
    Subskill.SS10: "Evaluating on group work",
    Subskill.SC11: "Using scripting",
    Subskill.SC12: "Regulating scripting",
    Subskill.OTHER: "Other engagements during task",
}


class Phase(str, Enum):
    """ CPS phase. Phases are totally ordered A1 < A2 < A3 < A4. """
    A1 = "A1"
    A2 = "A2"
    A3 = "A3"
    A4 = "A4"

    @property
    def index(self) -> int:
        return int(self.value[1]) - 1

    @property
    def label(self) -> str:
        match self:
            case Phase.A1:
                return "Problem identification"
            case Phase.A2:
                return "Ideation, planning and decision making"
            case Phase.A3:
                return "Plan implementation and solution generation"
            case Phase.A4:
                return "Solution checking, problem extension and reflection"

    def __lt__(self, other):
        if isinstance(other, Phase):
            return self.index < other.index
        return NotImplemented

    def __le__(self, other):
        if isinstance(other, Phase):
            return self.index <= other.index
        return NotImplemented

    def __gt__(self, other):
        if isinstance(other, Phase):
            return self.index > other.index
        return NotImplemented

    def __ge__(self, other):
        if isinstance(other, Phase):
            return self.index >= other.index
        return NotImplemented

    @staticmethod
    def value_of(s: Any) -> "Phase":
        if isinstance(s, Phase):
            return s
        match f"{s}".strip().upper():
            case "A1":
                return Phase.A1
            case "A2":
                return Phase.A2
            case "A3":
                return Phase.A3
            case "A4":
                return Phase.A4
            case _:
                raise RuntimeError(f"Unknown phase \"{s}\"")


class Condition(str, Enum):
    MINIMAL = "Minimal"
    MAXIMAL = "Maximal"

    @staticmethod
    def value_of(s: Any) -> "Condition":
        if isinstance(s, Condition):
            return s
        match f"{s}".strip().lower():
            case "minimal":
                return Condition.MINIMAL
            case "maximal":
                return Condition.MAXIMAL
            case _:
                raise RuntimeError(f"Unknown condition \"{s}\"")


@dataclass(frozen = True)
class IndicatorCode:
    code: str
    dimension: Dimension
    subskill: Subskill
    description: str


def _ps(number: int, subskill: Subskill, description: str) -> IndicatorCode:
    return IndicatorCode(f"PS{number:02d}", Dimension.PROBLEM_SOLVING, subskill, description)


def _sc(number: int, subskill: Subskill, description: str) -> IndicatorCode:
    return IndicatorCode(f"S{number}", Dimension.SCRIPTING, subskill, description)


def _ot(number: int, description: str) -> IndicatorCode:
    return IndicatorCode(f"OT{number}", Dimension.OTHER, Subskill.OTHER, description)


FRAMEWORK: tuple[IndicatorCode, ...] = (
    _ps(1, Subskill.SS1, "Talking about the task questions in general terms to understand about the problem-solving task"),
    _ps(2, Subskill.SS1, "Explaining ideas or concepts in the problem-solving task with reference to prior knowledge "
                         "or definitions from information sources"),
    _ps(3, Subskill.SS1, "Addressing difficulties or limitations that obstruct problem solving"),
    _ps(4, Subskill.SS2, "Asking questions to clarify understanding, ideas or contributions"),
    _ps(5, Subskill.SS2, "Answering questions to clarify understanding, ideas or contributions"),
    _ps(6, Subskill.SS2, "Reiterating or paraphrasing oneself or others’ ideas or contributions"),
    _ps(7, Subskill.SS2, "Adapting and building on the ideas or contributions of others"),
    _ps(8, Subskill.SS2, "Stating agreement with others"),
    _ps(9, Subskill.SS2, "Discovering perspectives and abilities of group members"),
    _ps(10, Subskill.SS2, "Sharing information from sources which contribute to formulating the problem-solving task"),
    _ps(11, Subskill.SS2, "Stating disagreement with others"),
    _ps(12, Subskill.SS2, "Constructing arguments in favour of one's own ideas or contributions"),
    _ps(13, Subskill.SS2, "Resolving differences"),
    _ps(14, Subskill.SS2, "Reaching a compromise with others"),
    _ps(15, Subskill.SS2, "Identifying and abstracting relevant information about the task context"),
    _ps(16, Subskill.SS2, "Establishing connections and patterns between relevant information in the "
                          "problem-solving task"),
    _ps(17, Subskill.SS2, "Dissecting the problem into smaller tasks"),
    _ps(18, Subskill.SS3, "Building a representation of the problem-solving task"),
    _ps(19, Subskill.SS3, "Creating an ordered step-by-step plan"),
    _ps(20, Subskill.SS3, "Proposing ideas or specific solution methods to solve the task questions"),
    _ps(21, Subskill.SS4, "Discussing required roles and collaborative interaction to address the "
                          "problem-solving task"),
    _ps(22, Subskill.SS4, "Coordinating sub-tasks to be performed"),
    _ps(23, Subskill.SS5, "Sharing contributions and findings of individual and group sub-tasks"),
    _ps(24, Subskill.SS5, "Providing an answer to the task questions"),
    _ps(25, Subskill.SS5, "Responding to or acknowledging the contributions of others"),
    _ps(26, Subskill.SS6, "Discussing the progress and status of individual and group sub-tasks"),
    _ps(27, Subskill.SS6, "Providing feedback on the progress and status of individual or group sub-tasks"),
    _ps(28, Subskill.SS6, "Recognising strengths and weaknesses of self and others"),
    _ps(29, Subskill.SS6, "Adapting group organisation to adjust individual and group sub-tasks"),
    _ps(30, Subskill.SS7, "Providing feedback or instructional support to others"),
    _ps(31, Subskill.SS7, "Using feedback provided to clarify or elaborate own ideas"),
    _ps(32, Subskill.SS7, "Making iterative adaptations to the plan based on outcomes, new information and new ideas"),
    _ps(33, Subskill.SS8, "Anticipating issues or errors"),
    _ps(34, Subskill.SS8, "Testing to detect working order"),
    _ps(35, Subskill.SS8, "Detecting and hypothesising issues or errors"),
    _ps(36, Subskill.SS8, "Identifying the need for additional information, resources or tasks to address issues "
                          "or fix errors"),
    _ps(37, Subskill.SS8, "Addressing issues or fixing errors"),
    _ps(38, Subskill.SS8, "Agreeing the sub-goals or goal-state have been effectively solved to answer the problem"),
    _ps(39, Subskill.SS9, "Reusing, remixing, and integrating ideas to develop alternative strategies for "
                          "flawed solutions"),
    _ps(40, Subskill.SS9, "Building on others’ ideas to improve alternative strategies"),
    _ps(41, Subskill.SS9, "Discussing the limitations of the current solution for future problem-solving tasks"),
    _ps(42, Subskill.SS10, "Discussing group dynamics, effort, strengths and weakness"),
    _sc(1, Subskill.SC11, "Discussing understanding of script components"),
    _sc(2, Subskill.SC11, "Prompting responses or actions from others to script components"),
    _sc(3, Subskill.SC11, "Responding to script components"),
    _sc(4, Subskill.SC12, "Discussing work status and progress on script components"),
    _sc(5, Subskill.SC12, "Disconnecting with group progress and usage of script components"),
    _ot(1, "Technical issues or logistical tasks related to the learning environment"),
    _ot(2, "Socialising"),
    _ot(3, "Refocusing to disrupt engagement in technical issues, logistical tasks or socialising"),
)

_CODE_MATCHER = re.compile(r"^(?P<prefix>PS|S|OT)0*(?P<number>\d+)$")


def load_framework() -> list[IndicatorCode]:
    """ Return the 50 canonical indicator codes in table order. """
    return list(FRAMEWORK)


@cache
def _by_code() -> dict[str, IndicatorCode]:
    return {c.code: c for c in FRAMEWORK}


def vocabulary() -> tuple[str, ...]:
    """ Canonical codes in table order. """
    return tuple(c.code for c in FRAMEWORK)


def normalize_code(s: str) -> str:
    """
    Bring code into its canonical form, i.e. "PS4", "ps04" and " PS04 " all become "PS04",
    "S01" becomes "S1". Raises UnknownIndicatorError if the code is not one of the 50 framework codes.
    """
    match_result = _CODE_MATCHER.match(f"{s}".strip().upper())
    if match_result is None:
        raise UnknownIndicatorError(s)

    prefix = match_result.group("prefix")
    number = int(match_result.group("number"))
    code = f"PS{number:02d}" if prefix == "PS" else f"{prefix}{number}"
    if code not in _by_code():
        raise UnknownIndicatorError(s)
    return code


def indicator(code: str) -> IndicatorCode:
    """ Look up framework entry for a code in either canonical or alias spelling. """
    return _by_code()[normalize_code(code)]


def is_known_code(code: str) -> bool:
    return code in _by_code()


def export_framework_csv(target: str | Path | None = None) -> str:
    """
    Render the framework as CSV with columns `code,dimension,subskill,description`.
    If `target` is given the CSV is also written into that file.
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator = "\n")
    writer.writerow(["code", "dimension", "subskill", "description"])
    for entry in FRAMEWORK:
        writer.writerow([entry.code, entry.dimension.value, entry.subskill.value, entry.description])

    if target is not None:
        Path(target).write_text(buffer.getvalue(), encoding = "utf-8")
    return buffer.getvalue()
