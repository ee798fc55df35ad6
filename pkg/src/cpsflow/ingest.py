"""
Reading of event-log files, alignment of utterances to CPS phases and assembly of per-phase
sequence databases.
"""
import csv
import io
import logging
from collections import Counter, defaultdict
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import BinaryIO

from cpsflow.errors import (
    DuplicatePhaseEntryError, MalformedRowError, OrphanStudentError, PreconditionError,
    UnalignedUtteranceError
)
from cpsflow.model.dataset import (
    DEFAULT_SKEW_TOLERANCE, CodedUtterance, PhaseEntry, RosterEntry, SessionDataset, phase_at, validate_dataset
)
from cpsflow.model.framework import Condition, Phase, normalize_code, vocabulary
from cpsflow.model.time import Duration, parse_timestamp

logger = logging.getLogger(__name__)

UTTERANCES_HEADER = ["student_id", "triad_id", "timestamp", "indicator", "text"]
PHASE_LOG_HEADER = ["student_id", "phase", "entry_timestamp"]
ROSTER_HEADER = ["student_id", "triad_id", "condition"]

type Source = bytes | BinaryIO | str | Path


@dataclass(frozen = True)
class SequenceDatabase:
    """
    Ordered indicator sequences of the students of one condition in one phase, keyed by student id.
    Only students with at least one utterance in the phase are present.
    """
    phase: Phase
    condition: Condition
    sequences: Mapping[str, tuple[str, ...]] = field(default_factory = dict)

    def __post_init__(self):
        object.__setattr__(
            self, "sequences",
            MappingProxyType({k: tuple(v) for k, v in sorted(self.sequences.items()) if len(v) > 0})
        )

    @property
    def n_p(self) -> int:
        return len(self.sequences)

    def as_list(self) -> list[tuple[str, ...]]:
        """ Sequences in student id order. """
        return list(self.sequences.values())

    @staticmethod
    def from_sequences(
            sequences: list[list[str]] | list[tuple[str, ...]],
            phase: Phase = Phase.A1,
            condition: Condition = Condition.MINIMAL
    ) -> "SequenceDatabase":
        """ Build a database from bare sequences, naming students s01, s02, ... in the given order. """
        return SequenceDatabase(
            phase = phase,
            condition = condition,
            sequences = {f"s{i + 1:02d}": tuple(seq) for i, seq in enumerate(sequences)}
        )


################################ Parsing ################################
def _open_text(source: Source) -> io.TextIOBase:
    match source:
        case bytes():
            return io.TextIOWrapper(io.BytesIO(source), encoding = "utf-8-sig", newline = "")
        case str() | Path():
            return open(source, "r", encoding = "utf-8-sig", newline = "")
        case _:
            return io.TextIOWrapper(source, encoding = "utf-8-sig", newline = "")


def read_rows(source: Source, file_name: str, header: list[str]) -> list[tuple[int, list[str]]]:
    """ Return (line number, row) pairs after checking the header. Blank lines are skipped. """
    stream = _open_text(source)
    reader = csv.reader(stream)
    try:
        rows: list[tuple[int, list[str]]] = []
        first = True
        for row in reader:
            if first:
                first = False
                if [c.strip().lower() for c in row] != header:
                    raise MalformedRowError(file_name, reader.line_num, f"expected header {','.join(header)}")
                continue
            if len(row) == 0:
                continue
            if len(row) != len(header):
                raise MalformedRowError(
                    file_name, reader.line_num, f"expected {len(header)} columns but found {len(row)}"
                )
            rows.append((reader.line_num, row))
        if first:
            raise MalformedRowError(file_name, 1, "file is empty")
        return rows
    except csv.Error as e:
        raise MalformedRowError(file_name, reader.line_num, str(e))
    except UnicodeDecodeError as e:
        # decoding runs ahead of the reader, so the bad bytes lie at or after the next line
        raise MalformedRowError(file_name, reader.line_num + 1, f"not valid UTF-8 ({e.reason})")
    finally:
        if isinstance(source, (str, Path)):
            stream.close()
        else:
            stream.detach()


def _timestamp(value: str, file_name: str, line_number: int):
    try:
        return parse_timestamp(value)
    except ValueError:
        raise MalformedRowError(file_name, line_number, f"invalid timestamp \"{value}\"")


def parse_event_log(utterance_file: Source, phase_log_file: Source, roster_file: Source) -> SessionDataset:
    """
    Parse the three event-log CSV files into a validated SessionDataset. Records are ordered by
    timestamp with ties broken by line number, so row order within a file does not matter.
    Utterance phases are left unset; call `align_phases(...)` to populate them.
    """
    roster: dict[str, RosterEntry] = {}
    for line_number, (student_id, triad_id, condition) in read_rows(roster_file, "roster.csv", ROSTER_HEADER):
        try:
            roster[student_id.strip()] = RosterEntry(triad_id.strip(), Condition.value_of(condition))
        except RuntimeError:
            raise MalformedRowError("roster.csv", line_number, f"invalid condition \"{condition}\"")

    phase_log: list[tuple[int, PhaseEntry]] = []
    seen_phases: set[tuple[str, Phase]] = set()
    for line_number, (student_id, phase, entry_timestamp) in read_rows(
            phase_log_file, "phase_log.csv", PHASE_LOG_HEADER
    ):
        try:
            parsed_phase = Phase.value_of(phase)
        except RuntimeError:
            raise MalformedRowError("phase_log.csv", line_number, f"invalid phase \"{phase}\"")
        key = (student_id.strip(), parsed_phase)
        if key in seen_phases:
            raise DuplicatePhaseEntryError(
                f"phase_log.csv:{line_number}: student {key[0]} enters {parsed_phase.value} more than once"
            )
        seen_phases.add(key)
        phase_log.append(
            (line_number, PhaseEntry(key[0], parsed_phase, _timestamp(entry_timestamp, "phase_log.csv", line_number)))
        )

    utterances: list[CodedUtterance] = []
    for line_number, (student_id, triad_id, timestamp, code, text) in read_rows(
            utterance_file, "utterances.csv", UTTERANCES_HEADER
    ):
        student_id = student_id.strip()
        parsed_timestamp = _timestamp(timestamp, "utterances.csv", line_number)
        canonical_code = normalize_code(code)
        roster_entry = roster.get(student_id)
        if roster_entry is None:
            raise OrphanStudentError(f"utterances.csv:{line_number}: student {student_id} is not in the roster")
        utterances.append(CodedUtterance(
            student_id = student_id,
            triad_id = triad_id.strip(),
            condition = roster_entry.condition,
            timestamp = parsed_timestamp,
            indicator = canonical_code,
            text = text if text != "" else None,
            source_line = line_number,
        ))

    utterances.sort(key = lambda u: u.sort_key)
    phase_log.sort(key = lambda ln_entry: (ln_entry[1].entry_timestamp, ln_entry[0]))
    dataset = SessionDataset(
        utterances = tuple(utterances),
        phase_log = tuple(entry for _, entry in phase_log),
        roster = roster,
    )
    validate_dataset(dataset).raise_if_invalid()

    logger.info(
        f"Parsed {len(dataset.utterances)} utterances, {len(dataset.phase_log)} phase entries "
        f"and {len(dataset.roster)} rostered students"
    )
    return dataset


################################ Alignment ################################
def align_phases(d: SessionDataset, tolerance: str | Duration = DEFAULT_SKEW_TOLERANCE) -> SessionDataset:
    """
    Return a copy of `d` where each utterance carries the phase of its student's latest phase entry at
    or before the utterance timestamp. Utterances up to `tolerance` before the first entry take the
    first phase; anything earlier raises UnalignedUtteranceError. Existing phases are recomputed,
    so the operation is idempotent.
    """
    tolerance = Duration.value_of(tolerance)
    entries_by_student: dict[str, list[PhaseEntry]] = defaultdict(list)
    for entry in d.phase_log:
        entries_by_student[entry.student_id].append(entry)
    for entries in entries_by_student.values():
        entries.sort(key = lambda e: e.entry_timestamp)

    aligned: list[CodedUtterance] = []
    for utterance in d.utterances:
        entries = entries_by_student.get(utterance.student_id, [])
        if len(entries) == 0:
            raise UnalignedUtteranceError(f"student {utterance.student_id} has utterances but no phase log")

        phase = phase_at(entries, utterance.timestamp, tolerance)
        if phase is None:
            gap = Duration.between(utterance.timestamp, entries[0].entry_timestamp)
            raise UnalignedUtteranceError(
                f"utterance of {utterance.student_id} at line {utterance.source_line} precedes the first "
                f"phase entry by {gap}, more than the tolerated {tolerance}"
            )
        if utterance.timestamp < entries[0].entry_timestamp:
            logger.debug(f"Utterance at line {utterance.source_line} assigned to {phase.value} within skew tolerance")

        aligned.append(CodedUtterance(
            student_id = utterance.student_id,
            triad_id = utterance.triad_id,
            condition = utterance.condition,
            timestamp = utterance.timestamp,
            indicator = utterance.indicator,
            phase = phase,
            text = utterance.text,
            source_line = utterance.source_line,
        ))

    return d.with_utterances(aligned)


################################ Sequences ################################
def build_sequences(d: SessionDataset, phase: Phase, condition: Condition) -> SequenceDatabase:
    """
    Sequence database of one phase and condition: per student the timestamp-ordered indicator codes of
    the student's utterances in that phase. Students without utterances in the phase are omitted.
    """
    if not d.is_aligned():
        raise PreconditionError("Dataset must be phase-aligned before building sequences")

    sequences: dict[str, list[str]] = defaultdict(list)
    for utterance in sorted(d.utterances, key = lambda u: u.sort_key):
        if utterance.condition == condition and utterance.phase == phase:
            sequences[utterance.student_id].append(utterance.indicator)

    return SequenceDatabase(phase = phase, condition = condition, sequences = sequences)


################################ Descriptives ################################
@dataclass(frozen = True)
class IndicatorCount:
    condition: Condition
    code: str
    count: int
    percentage: float


def indicator_distribution(d: SessionDataset) -> list[IndicatorCount]:
    """
    Count of each observed indicator per condition with its share of that condition's utterances.
    Ordered by condition, then by descending count, then by code.
    """
    result: list[IndicatorCount] = []
    for condition in Condition:
        counts = Counter(u.indicator for u in d.utterances if u.condition == condition)
        total = sum(counts.values())
        for code, count in sorted(counts.items(), key = lambda kv: (-kv[1], kv[0])):
            result.append(IndicatorCount(condition, code, count, 100.0 * count / total))
    return result


def distinct_indicators(d: SessionDataset) -> list[str]:
    """ Distinct codes used anywhere in the dataset, in framework order. """
    used = {u.indicator for u in d.utterances}
    return [c for c in vocabulary() if c in used]


def phase_counts(d: SessionDataset) -> list[tuple[Condition, Phase, int, int]]:
    """ (condition, phase, n_p, utterance count) for every condition and phase of an aligned dataset. """
    result = []
    for condition in Condition:
        for phase in Phase:
            in_cell = [u for u in d.utterances if u.condition == condition and u.phase == phase]
            result.append((condition, phase, len({u.student_id for u in in_cell}), len(in_cell)))
    return result
