"""
Seeded synthetic CPS sessions for desk-scale end-to-end runs.

All randomness comes from one `numpy.random.Generator` over `PCG64` seeded with `SynthSpec.seed`, so
the same SynthSpec always yields the same dataset and byte-identical CSV files.
"""
import csv
import io
import logging
from collections.abc import Mapping
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np

from cpsflow.errors import InvalidSpecError, UnknownIndicatorError
from cpsflow.ingest import PHASE_LOG_HEADER, ROSTER_HEADER, UTTERANCES_HEADER
from cpsflow.model.dataset import CodedUtterance, PhaseEntry, RosterEntry, SessionDataset, validate_dataset
from cpsflow.model.framework import Condition, Phase, normalize_code
from cpsflow.model.time import Duration, format_timestamp

logger = logging.getLogger(__name__)

type WeightTable = Mapping[Condition, Mapping[Phase, Mapping[str, float]]]

SESSION_START = datetime(2024, 3, 4, 9, 0, tzinfo = timezone.utc)
STUDY_SHAPE_TOTALS = {Condition.MAXIMAL: 4821, Condition.MINIMAL: 2433}

# Minimal scaffolding: socialising dominates, a handful of problem-solving codes, little scripting
# in the later phases. Maximal scaffolding: scripting codes S1, S3, S4 throughout, problem solving
# concentrated in A1.
DEFAULT_WEIGHTS: WeightTable = {
    Condition.MINIMAL: {
        Phase.A1: {"OT2": 30, "PS01": 6, "PS02": 2, "PS04": 10, "PS05": 6, "PS06": 3, "PS08": 4, "PS20": 6,
                   "S1": 4, "S3": 3, "S4": 8, "OT1": 8},
        Phase.A2: {"OT2": 20, "PS04": 6, "PS05": 4, "PS08": 3, "PS19": 3, "PS20": 10, "S1": 3, "S3": 2, "S4": 6,
                   "OT1": 4},
        Phase.A3: {"OT2": 15, "PS03": 5, "PS04": 6, "PS20": 10, "PS24": 4, "PS26": 6, "PS37": 3, "S4": 6, "OT1": 3},
        Phase.A4: {"OT2": 20, "PS24": 3, "PS34": 4, "PS38": 4, "S2": 2, "S4": 6, "OT3": 2},
    },
    Condition.MAXIMAL: {
        Phase.A1: {"OT2": 18, "PS04": 8, "PS05": 7, "PS06": 5, "PS15": 5, "PS20": 6, "S1": 14, "S3": 12,
                   "S4": 12, "OT1": 6},
        Phase.A2: {"OT2": 6, "PS19": 2, "PS20": 3, "S1": 12, "S3": 12, "S4": 12},
        Phase.A3: {"OT2": 14, "PS24": 3, "PS34": 2, "S1": 10, "S3": 10, "S4": 10},
        Phase.A4: {"OT2": 16, "PS38": 3, "PS41": 2, "S1": 6, "S3": 8, "S4": 8, "S5": 2},
    },
}

DEFAULT_PHASE_DURATIONS: Mapping[Phase, tuple[Duration, Duration]] = {
    Phase.A1: (Duration.value_of("8 min"), Duration.value_of("12 min")),
    Phase.A2: (Duration.value_of("8 min"), Duration.value_of("12 min")),
    Phase.A3: (Duration.value_of("12 min"), Duration.value_of("18 min")),
    Phase.A4: (Duration.value_of("6 min"), Duration.value_of("10 min")),
}

DEFAULT_REACH_PROBABILITY: Mapping[Phase, float] = {Phase.A1: 1.0, Phase.A2: 0.95, Phase.A3: 0.85, Phase.A4: 0.7}


class SynthProfile(str, Enum):
    DEFAULT = "default"
    STUDY_SHAPE = "paper-shape"

    @staticmethod
    def value_of(s: Any) -> "SynthProfile":
        if isinstance(s, SynthProfile):
            return s
        match f"{s}".strip().lower():
            case "default":
                return SynthProfile.DEFAULT
            case "paper-shape" | "paper_shape":
                return SynthProfile.STUDY_SHAPE
            case _:
                raise RuntimeError(f"Unknown synth profile \"{s}\"")


@dataclass(frozen = True)
class SynthSpec:
    """
    Shape of a synthetic study. Students are grouped into triads of `triad_size`, triads are split
    evenly between the two conditions at random. Each triad works through the phases in order and
    moves on to the next one with its `reach_probability`; phase lengths are drawn uniformly from
    `phase_durations`. Without `total_utterances` every student speaks `utterances_per_minute` on
    average (Poisson); with it, each condition's total is spread over students and phases in
    proportion to time spent. Indicator codes are drawn from the condition × phase weight tables.
    """
    students_per_condition: int = 39
    triad_size: int = 3
    weights: WeightTable = field(default_factory = lambda: DEFAULT_WEIGHTS)
    phase_durations: Mapping[Phase, tuple[Duration, Duration]] = field(default_factory = lambda: DEFAULT_PHASE_DURATIONS)
    utterances_per_minute: float = 2.0
    reach_probability: Mapping[Phase, float] = field(default_factory = lambda: DEFAULT_REACH_PROBABILITY)
    seed: int = 42
    total_utterances: Mapping[Condition, int] | None = None
    session_start: datetime = SESSION_START

    def __post_init__(self):
        if self.triad_size < 1 or self.students_per_condition < 1:
            raise InvalidSpecError("students_per_condition and triad_size must be positive")
        if self.students_per_condition % self.triad_size != 0:
            raise InvalidSpecError(
                f"{self.students_per_condition} students per condition do not split into triads of {self.triad_size}"
            )
        if self.utterances_per_minute <= 0:
            raise InvalidSpecError("utterances_per_minute must be positive")
        if self.seed < 0:
            raise InvalidSpecError(f"Seed must be a non-negative integer, got {self.seed}")
        object.__setattr__(self, "weights", self.__validated_weights())

        for phase in Phase:
            if phase not in self.phase_durations:
                raise InvalidSpecError(f"No duration range for {phase.value}")
            shortest, longest = (Duration.value_of(d) for d in self.phase_durations[phase])
            if shortest.millis <= 0 or longest < shortest:
                raise InvalidSpecError(f"Invalid duration range {shortest} .. {longest} for {phase.value}")
            probability = self.reach_probability.get(phase, 1.0)
            if not 0 <= probability <= 1:
                raise InvalidSpecError(f"Reach probability of {phase.value} must lie in [0, 1]")

        if self.total_utterances is not None and any(t < 0 for t in self.total_utterances.values()):
            raise InvalidSpecError("Utterance totals must be non-negative")

    def __validated_weights(self) -> dict[Condition, dict[Phase, dict[str, float]]]:
        validated = {}
        for condition in Condition:
            validated[condition] = {}
            for phase in Phase:
                table = self.weights.get(condition, {}).get(phase, {})
                try:
                    canonical = {normalize_code(code): float(w) for code, w in table.items()}
                except UnknownIndicatorError as e:
                    raise InvalidSpecError(f"{condition.value} / {phase.value}: {e}")
                if any(w < 0 for w in canonical.values()):
                    raise InvalidSpecError(f"Negative indicator weight in {condition.value} / {phase.value}")
                if sum(canonical.values()) <= 0:
                    raise InvalidSpecError(f"No positive indicator weight in {condition.value} / {phase.value}")
                validated[condition][phase] = canonical
        return validated

    @property
    def triads_per_condition(self) -> int:
        return self.students_per_condition // self.triad_size

    @staticmethod
    def of_profile(profile: str | SynthProfile, seed: int = 42, students_per_condition: int = 39) -> "SynthSpec":
        match SynthProfile.value_of(profile):
            case SynthProfile.DEFAULT:
                return SynthSpec(seed = seed, students_per_condition = students_per_condition)
            case SynthProfile.STUDY_SHAPE:
                return SynthSpec(
                    seed = seed,
                    students_per_condition = students_per_condition,
                    total_utterances = STUDY_SHAPE_TOTALS,
                )


################################ Generation ################################
@dataclass(frozen = True)
class _Stint:
    """ Time a student spends in one phase, [entry, end) in ms since session start. """
    student_id: str
    triad_id: str
    condition: Condition
    phase: Phase
    entry: int
    end: int


def _timeline(spec: SynthSpec, rng: np.random.Generator) -> list[tuple[int, Phase, int]]:
    """ (start, phase, duration) of every phase one triad reaches, in ms since session start. """
    start = 0
    timeline = []
    for phase in Phase:
        if phase != Phase.A1 and rng.random() >= spec.reach_probability.get(phase, 1.0):
            break
        shortest, longest = (Duration.value_of(d).millis for d in spec.phase_durations[phase])
        duration = int(rng.integers(shortest, longest + 1))
        timeline.append((start, phase, duration))
        start += duration
    return timeline


def _at(spec: SynthSpec, millis: int) -> datetime:
    return spec.session_start + timedelta(milliseconds = millis)


def generate(spec: SynthSpec) -> SessionDataset:
    """
    Generate a phase-aligned dataset. Students are S001, S002, ... and triads T01, T02, ... in
    triad order; the dataset always passes `validate_dataset(...)`.
    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    n_triads = 2 * spec.triads_per_condition
    allocation = rng.permutation(n_triads)
    id_width = max(2, len(str(n_triads)))
    student_width = max(3, len(str(n_triads * spec.triad_size)))

    roster: dict[str, RosterEntry] = {}
    phase_log: list[PhaseEntry] = []
    stints: list[_Stint] = []
    for t in range(n_triads):
        triad_id = f"T{t + 1:0{id_width}d}"
        condition = Condition.MINIMAL if allocation[t] < spec.triads_per_condition else Condition.MAXIMAL
        timeline = _timeline(spec, rng)
        for k in range(spec.triad_size):
            student_id = f"S{t * spec.triad_size + k + 1:0{student_width}d}"
            roster[student_id] = RosterEntry(triad_id, condition)
            for start, phase, duration in timeline:
                # students of a triad drift a little apart when they move on
                jitter = int(rng.integers(0, max(1, min(30_000, duration // 4))))
                phase_log.append(PhaseEntry(student_id, phase, _at(spec, start + jitter)))
                stints.append(_Stint(student_id, triad_id, condition, phase, start + jitter, start + duration))

    counts = _utterance_counts(spec, stints, rng)
    utterances: list[tuple[int, str, str, Condition, Phase, str]] = []
    for stint, count in zip(stints, counts):
        if count == 0:
            continue
        table = spec.weights[stint.condition][stint.phase]
        codes = list(table.keys())
        probabilities = np.array(list(table.values()), dtype = float)
        drawn = rng.choice(len(codes), size = count, p = probabilities / probabilities.sum())
        offsets = rng.integers(stint.entry, stint.end, size = count)
        utterances.extend(
            (int(offset), stint.student_id, stint.triad_id, stint.condition, stint.phase, codes[int(i)])
            for offset, i in zip(offsets, drawn)
        )

    utterances.sort(key = lambda u: (u[0], u[1]))
    dataset = SessionDataset(
        utterances = tuple(
            CodedUtterance(
                student_id = student_id,
                triad_id = triad_id,
                condition = condition,
                timestamp = _at(spec, offset),
                indicator = code,
                phase = phase,
                source_line = line + 2,
            )
            for line, (offset, student_id, triad_id, condition, phase, code) in enumerate(utterances)
        ),
        phase_log = tuple(sorted(phase_log, key = lambda e: (e.entry_timestamp, e.student_id))),
        roster = roster,
    )
    validate_dataset(dataset).raise_if_invalid()
    logger.info(
        f"Generated {len(dataset.utterances)} utterances for {len(roster)} students in {n_triads} triads "
        f"(seed {spec.seed})"
    )
    return dataset


def _utterance_counts(spec: SynthSpec, stints: list[_Stint], rng: np.random.Generator) -> list[int]:
    exposure = np.array([s.end - s.entry for s in stints], dtype = float)
    if spec.total_utterances is None:
        return [int(c) for c in rng.poisson(spec.utterances_per_minute * exposure / 60_000)]

    counts = np.zeros(len(stints), dtype = np.int64)
    for condition in Condition:
        mask = np.array([s.condition == condition for s in stints])
        total = int(spec.total_utterances.get(condition, 0))
        if total == 0 or not mask.any():
            continue
        share = exposure[mask] / exposure[mask].sum()
        counts[mask] = rng.multinomial(total, share)
    return [int(c) for c in counts]


################################ Export ################################
def dataset_csvs(d: SessionDataset) -> dict[str, str]:
    """ The three event-log files of a dataset as CSV text keyed by file name. """
    def render(header: list[str], rows) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator = "\n")
        writer.writerow(header)
        writer.writerows(rows)
        return buffer.getvalue()

    return {
        "utterances.csv": render(UTTERANCES_HEADER, (
            [u.student_id, u.triad_id, format_timestamp(u.timestamp), u.indicator, u.text or ""]
            for u in sorted(d.utterances, key = lambda u: u.sort_key)
        )),
        "phase_log.csv": render(PHASE_LOG_HEADER, (
            [e.student_id, e.phase.value, format_timestamp(e.entry_timestamp)] for e in d.phase_log
        )),
        "roster.csv": render(ROSTER_HEADER, (
            [student_id, entry.triad_id, entry.condition.value] for student_id, entry in sorted(d.roster.items())
        )),
    }


def write_dataset(d: SessionDataset, out_dir: str | Path, parquet: bool = False) -> list[Path]:
    """ Write utterances.csv, phase_log.csv and roster.csv (and optionally dataset.parquet) into `out_dir`. """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents = True, exist_ok = True)
    written = []
    for name, content in dataset_csvs(d).items():
        path = out_dir / name
        path.write_text(content, encoding = "utf-8", newline = "")
        written.append(path)
    if parquet:
        path = out_dir / "dataset.parquet"
        d.save_to_file(path)
        written.append(path)
    return written
