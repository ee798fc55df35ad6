import json
from collections import defaultdict
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path
from types import MappingProxyType

import pyarrow as pa
import pyarrow.parquet as pq

from cpsflow.errors import DatasetValidationError, MixedConditionTriadError, NonMonotonePhaseError
from cpsflow.model.framework import Condition, Phase, is_known_code
from cpsflow.model.time import Duration, format_timestamp, parse_timestamp

DEFAULT_SKEW_TOLERANCE = Duration.value_of("2000 ms")


@dataclass(frozen = True)
class CodedUtterance:
    """
    One coded dialogue event. `phase` is None until the utterance is aligned against the phase log.
    `source_line` is the line of the utterance file the record came from and breaks timestamp ties.
    """
    student_id: str
    triad_id: str
    condition: Condition
    timestamp: datetime
    indicator: str
    phase: Phase | None = None
    text: str | None = None
    source_line: int = 0

    @property
    def sort_key(self) -> tuple[datetime, int]:
        return self.timestamp, self.source_line


@dataclass(frozen = True)
class PhaseEntry:
    student_id: str
    phase: Phase
    entry_timestamp: datetime


@dataclass(frozen = True)
class RosterEntry:
    triad_id: str
    condition: Condition


@dataclass(frozen = True)
class SessionDataset:
    utterances: tuple[CodedUtterance, ...]
    phase_log: tuple[PhaseEntry, ...]
    roster: Mapping[str, RosterEntry] = field(default_factory = dict)

    def __post_init__(self):
        object.__setattr__(self, "utterances", tuple(self.utterances))
        object.__setattr__(self, "phase_log", tuple(self.phase_log))
        object.__setattr__(self, "roster", MappingProxyType(dict(self.roster)))

    def __repr__(self):
        return (f"SessionDataset(utterances = {len(self.utterances)}, "
                f"phase_log = {len(self.phase_log)}, roster = {len(self.roster)})")

    def students(self, condition: Condition | None = None) -> list[str]:
        """ Sorted ids of rostered students, optionally restricted to one condition. """
        return sorted(
            student_id for student_id, entry in self.roster.items()
            if condition is None or entry.condition == condition
        )

    def utterances_of(self, condition: Condition) -> list[CodedUtterance]:
        return [u for u in self.utterances if u.condition == condition]

    def phase_entries_of(self, student_id: str) -> list[PhaseEntry]:
        """ Phase log of one student ordered by entry time. """
        return sorted(
            (e for e in self.phase_log if e.student_id == student_id),
            key = lambda e: e.entry_timestamp
        )

    def is_aligned(self) -> bool:
        return all(u.phase is not None for u in self.utterances)

    def with_utterances(self, utterances: Iterable[CodedUtterance]) -> "SessionDataset":
        return SessionDataset(utterances = tuple(utterances), phase_log = self.phase_log, roster = self.roster)

    def save_to_file(self, filename: str | Path) -> None:
        """
        Save dataset into a parquet file. Utterances make up the table, phase log and roster travel
        in the schema metadata.
        """
        table = pa.table(
            data = {
                "student_id": pa.array([u.student_id for u in self.utterances], type = pa.string()),
                "triad_id": pa.array([u.triad_id for u in self.utterances], type = pa.string()),
                "condition": pa.array([u.condition.value for u in self.utterances], type = pa.string()),
                "timestamp": pa.array([u.timestamp for u in self.utterances], type = pa.timestamp("ms", tz = "UTC")),
                "indicator": pa.array([u.indicator for u in self.utterances], type = pa.string()),
                "phase": pa.array([None if u.phase is None else u.phase.value for u in self.utterances],
                                  type = pa.string()),
                "text": pa.array([u.text for u in self.utterances], type = pa.string()),
                "source_line": pa.array([u.source_line for u in self.utterances], type = pa.int64()),
            },
            metadata = {
                "phase_log": json.dumps([
                    [e.student_id, e.phase.value, format_timestamp(e.entry_timestamp)] for e in self.phase_log
                ]),
                "roster": json.dumps({
                    student_id: [entry.triad_id, entry.condition.value]
                    for student_id, entry in sorted(self.roster.items())
                }),
            }
        )
        pq.write_table(table, filename, store_schema = True)

    @staticmethod
    def load_from_file(filename: str | Path) -> "SessionDataset":
        """ Load dataset previously written with `save_to_file`. """
        table = pq.read_table(filename)
        metadata = table.schema.metadata
        phase_log = [
            PhaseEntry(student_id, Phase.value_of(phase), parse_timestamp(ts))
            for student_id, phase, ts in json.loads(metadata[b"phase_log"].decode("utf-8"))
        ]
        roster = {
            student_id: RosterEntry(triad_id, Condition.value_of(condition))
            for student_id, (triad_id, condition) in json.loads(metadata[b"roster"].decode("utf-8")).items()
        }
        utterances = [
            CodedUtterance(
                student_id = row["student_id"],
                triad_id = row["triad_id"],
                condition = Condition.value_of(row["condition"]),
                timestamp = row["timestamp"],
                indicator = row["indicator"],
                phase = None if row["phase"] is None else Phase.value_of(row["phase"]),
                text = row["text"],
                source_line = row["source_line"],
            )
            for row in table.to_pylist()
        ]
        return SessionDataset(utterances = tuple(utterances), phase_log = tuple(phase_log), roster = roster)


def phase_at(
        entries: list[PhaseEntry],
        timestamp: datetime,
        tolerance: Duration = DEFAULT_SKEW_TOLERANCE
) -> Phase | None:
    """
    Phase of the latest entry with `entry_timestamp <= timestamp` in a single student's time-ordered
    phase log. Timestamps no more than `tolerance` before the first entry belong to the first phase.
    Return None if the timestamp cannot be placed.
    """
    if len(entries) == 0:
        return None

    current: Phase | None = None
    for entry in entries:
        if entry.entry_timestamp <= timestamp:
            current = entry.phase
        else:
            break

    if current is None and Duration.between(timestamp, entries[0].entry_timestamp) <= tolerance:
        current = entries[0].phase
    return current


################################ Validation ################################
class ViolationKind(str, Enum):
    UNKNOWN_INDICATOR = "UnknownIndicator"
    NON_MONOTONE_PHASE = "NonMonotonePhase"
    ORPHAN_STUDENT = "OrphanStudent"
    MIXED_CONDITION_TRIAD = "MixedConditionTriad"
    TRIAD_MISMATCH = "TriadMismatch"
    CONDITION_MISMATCH = "ConditionMismatch"
    MISALIGNED_PHASE = "MisalignedPhase"


@dataclass(frozen = True)
class Violation:
    kind: ViolationKind
    message: str
    record: str

    def __str__(self):
        return f"{self.kind.value}: {self.message} [{self.record}]"


@dataclass(frozen = True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return len(self.violations) == 0

    def of_kind(self, kind: ViolationKind) -> list[Violation]:
        return [v for v in self.violations if v.kind == kind]

    def raise_if_invalid(self) -> None:
        """ Raise for the kind of the first violation; every error carries the whole report. """
        if self.ok:
            return
        match self.violations[0].kind:
            case ViolationKind.NON_MONOTONE_PHASE:
                raise NonMonotonePhaseError(self)
            case ViolationKind.MIXED_CONDITION_TRIAD:
                raise MixedConditionTriadError(self)
            case _:
                raise DatasetValidationError(self)


def validate_dataset(d: SessionDataset, tolerance: Duration = DEFAULT_SKEW_TOLERANCE) -> ValidationReport:
    """
    Check every SessionDataset invariant and report all violations, each with the offending record.
    Never raises for data problems.
    """
    violations: list[Violation] = []

    triad_conditions: dict[str, set[Condition]] = defaultdict(set)
    for student_id, entry in sorted(d.roster.items()):
        triad_conditions[entry.triad_id].add(entry.condition)
    for triad_id, conditions in sorted(triad_conditions.items()):
        if len(conditions) > 1:
            violations.append(Violation(
                ViolationKind.MIXED_CONDITION_TRIAD,
                f"triad {triad_id} mixes conditions {sorted(c.value for c in conditions)}",
                triad_id
            ))

    entries_by_student: dict[str, list[PhaseEntry]] = defaultdict(list)
    for entry in d.phase_log:
        entries_by_student[entry.student_id].append(entry)
        if entry.student_id not in d.roster:
            violations.append(Violation(
                ViolationKind.ORPHAN_STUDENT, f"phase log names unrostered student {entry.student_id}", repr(entry)
            ))

    for student_id, entries in sorted(entries_by_student.items()):
        ordered = sorted(entries, key = lambda e: e.entry_timestamp)
        for previous, current in zip(ordered, ordered[1:]):
            if current.entry_timestamp <= previous.entry_timestamp or current.phase <= previous.phase:
                violations.append(Violation(
                    ViolationKind.NON_MONOTONE_PHASE,
                    f"student {student_id} enters {current.phase.value} after {previous.phase.value}",
                    repr(current)
                ))

    for utterance in d.utterances:
        if not is_known_code(utterance.indicator):
            violations.append(Violation(
                ViolationKind.UNKNOWN_INDICATOR, f"code {utterance.indicator} is not in the framework", repr(utterance)
            ))

        roster_entry = d.roster.get(utterance.student_id)
        if roster_entry is None:
            violations.append(Violation(
                ViolationKind.ORPHAN_STUDENT, f"student {utterance.student_id} is not rostered", repr(utterance)
            ))
            continue

        if roster_entry.triad_id != utterance.triad_id:
            violations.append(Violation(
                ViolationKind.TRIAD_MISMATCH,
                f"student {utterance.student_id} is rostered in triad {roster_entry.triad_id}",
                repr(utterance)
            ))
        if roster_entry.condition != utterance.condition:
            violations.append(Violation(
                ViolationKind.CONDITION_MISMATCH,
                f"student {utterance.student_id} is rostered under {roster_entry.condition.value}",
                repr(utterance)
            ))

        if utterance.phase is not None:
            ordered = sorted(entries_by_student.get(utterance.student_id, []), key = lambda e: e.entry_timestamp)
            expected = phase_at(ordered, utterance.timestamp, tolerance)
            if expected != utterance.phase:
                violations.append(Violation(
                    ViolationKind.MISALIGNED_PHASE,
                    f"utterance carries {utterance.phase.value} but phase log gives "
                    f"{'nothing' if expected is None else expected.value}",
                    repr(utterance)
                ))

    return ValidationReport(tuple(violations))
