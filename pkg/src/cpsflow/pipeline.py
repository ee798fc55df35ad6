"""
End-to-end analysis run: ingest, networks, engagement statistics, pruning and pattern reports,
rendered into an in-memory artifact tree that is written out only once everything has succeeded.
"""
import csv
import io
import json
import logging
from collections.abc import Iterable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

from cpsflow.errors import NoQualifyingSupportError, PreconditionError
from cpsflow.hina import (
    EngagementProfile, PrunedNetwork, build_behaviour_phase_network, build_student_phase_network,
    engagement_csv, engagement_profiles, global_max_quantity
)
from cpsflow.ingest import align_phases, build_sequences, indicator_distribution, parse_event_log, phase_counts
from cpsflow.model.dataset import DEFAULT_SKEW_TOLERANCE, SessionDataset
from cpsflow.model.framework import Condition, Phase, indicator
from cpsflow.model.time import Duration
from cpsflow.spm import DEFAULT_MIN_SUPPORT, PatternReport, auto_tune_min_support, merge_database, pattern_report
from cpsflow.stats import boxplot_summary, mann_whitney

logger = logging.getLogger(__name__)

SAMPLE_A = Condition.MINIMAL
SAMPLE_B = Condition.MAXIMAL


class EmitFormat(str, Enum):
    JSON = "json"
    CSV = "csv"
    DOT = "dot"

    @staticmethod
    def value_of(s: Any) -> "EmitFormat":
        if isinstance(s, EmitFormat):
            return s
        match f"{s}".strip().lower():
            case "json":
                return EmitFormat.JSON
            case "csv":
                return EmitFormat.CSV
            case "dot":
                return EmitFormat.DOT
            case _:
                raise RuntimeError(f"Unknown output format \"{s}\"")

    @staticmethod
    def parse_list(s: str | Iterable) -> frozenset["EmitFormat"]:
        """ "json,csv" or an iterable of formats. """
        items = s.split(",") if isinstance(s, str) else s
        return frozenset(EmitFormat.value_of(item) for item in items if f"{item}".strip() != "")


@dataclass(frozen = True)
class MinSupport:
    """ Fixed min_support fraction, or `fraction = None` for per-report auto-tuning. """
    fraction: float | None = None

    def __post_init__(self):
        if self.fraction is not None and not 0 < self.fraction <= 1:
            raise PreconditionError(f"min_support must lie in (0, 1], got {self.fraction}")

    def __str__(self):
        return "auto" if self.is_auto else f"{self.fraction}"

    @property
    def is_auto(self) -> bool:
        return self.fraction is None

    @staticmethod
    def value_of(s: Any) -> "MinSupport":
        match s:
            case MinSupport():
                return s
            case None:
                return MinSupport()
            case float() | int():
                return MinSupport(float(s))
            case str() if s.strip().lower() == "auto":
                return MinSupport()
            case str():
                try:
                    return MinSupport(float(s))
                except ValueError:
                    raise PreconditionError(f"min_support must be \"auto\" or a fraction, got \"{s}\"")
            case _:
                raise PreconditionError(f"Unable to interpret {s!r} as min_support")


@dataclass(frozen = True)
class RunConfig:
    """
    Configuration of one `analyze` run. Input is either the three event-log CSV files or a parquet
    dataset snapshot. `workers` only changes how pattern reports are mined, never what is written.
    """
    utterances: Path | None = None
    phase_log: Path | None = None
    roster: Path | None = None
    dataset: Path | None = None
    out: Path = Path("out")
    alpha: float = 0.05
    min_support: MinSupport = field(default_factory = MinSupport)
    emit: frozenset[EmitFormat] = frozenset(EmitFormat)
    keep_all: bool = False
    workers: int = 1
    max_pattern_length: int | None = None
    tolerance: Duration = DEFAULT_SKEW_TOLERANCE

    def __post_init__(self):
        object.__setattr__(self, "min_support", MinSupport.value_of(self.min_support))
        object.__setattr__(self, "emit", EmitFormat.parse_list(self.emit))
        object.__setattr__(self, "tolerance", Duration.value_of(self.tolerance))
        if not 0 < self.alpha < 1:
            raise PreconditionError(f"alpha must lie in (0, 1), got {self.alpha}")
        csv_inputs = [self.utterances, self.phase_log, self.roster]
        if self.dataset is None and any(p is None for p in csv_inputs):
            raise PreconditionError("Either a dataset snapshot or all three event-log files are required")
        if self.dataset is not None and any(p is not None for p in csv_inputs):
            raise PreconditionError("Dataset snapshot and event-log files are mutually exclusive")
        if self.workers < 1:
            raise PreconditionError("workers must be at least 1")
        if self.max_pattern_length is not None and self.max_pattern_length < 2:
            raise PreconditionError("max_pattern_length must be at least 2")

    def load_dataset(self) -> SessionDataset:
        if self.dataset is not None:
            return SessionDataset.load_from_file(self.dataset)
        return parse_event_log(self.utterances, self.phase_log, self.roster)


@dataclass(frozen = True)
class Artifact:
    name: str
    emit_format: EmitFormat
    content: str


################################ Renderers ################################
def _csv_text(header: list[str], rows: Iterable[list]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator = "\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def stats_json(profiles: list[EngagementProfile]) -> str:
    """ Mann–Whitney comparison of quantity and diversity between the conditions. """
    def sample(condition: Condition, metric: str) -> list[float]:
        return [getattr(p, metric) for p in profiles if p.condition == condition]

    return json.dumps({
        "sample_a": SAMPLE_A.value,
        "sample_b": SAMPLE_B.value,
        "tests": [
            mann_whitney(sample(SAMPLE_A, metric), sample(SAMPLE_B, metric)).to_dict(metric)
            for metric in ["quantity", "diversity"]
        ],
    }, indent = 2) + "\n"


def boxplot_csv(profiles: list[EngagementProfile]) -> str:
    rows = []
    for metric in ["normalized_quantity", "diversity"]:
        for condition in Condition:
            values = [(p.student_id, getattr(p, metric)) for p in profiles if p.condition == condition]
            summary = boxplot_summary(values)
            rows.append([
                metric, condition.value, repr(summary.q1), repr(summary.median), repr(summary.q3),
                repr(summary.iqr), repr(summary.lower_fence), repr(summary.upper_fence),
                ";".join(summary.outlier_ids),
            ])
    return _csv_text(
        ["metric", "condition", "q1", "median", "q3", "iqr", "lower_fence", "upper_fence", "outliers"], rows
    )


def indicator_distribution_csv(d: SessionDataset) -> str:
    rows = []
    for c in indicator_distribution(d):
        entry = indicator(c.code)
        rows.append([
            c.condition.value, c.code, entry.dimension.value, entry.subskill.value, c.count, repr(c.percentage)
        ])
    return _csv_text(["condition", "code", "dimension", "subskill", "count", "percentage"], rows)


def phase_counts_csv(d: SessionDataset) -> str:
    return _csv_text(
        ["condition", "phase", "n_p", "utterances"],
        ([condition.value, phase.value, n_p, count] for condition, phase, n_p, count in phase_counts(d))
    )


################################ Pattern reports ################################
def mine_cell(
        d: SessionDataset,
        phase: Phase,
        condition: Condition,
        min_support: MinSupport,
        max_pattern_length: int | None = None
) -> PatternReport:
    """ Pattern report of one (phase, condition); an empty cell yields an empty report. """
    db = build_sequences(d, phase, condition)
    if db.n_p == 0:
        logger.warning(f"No sequences for {phase.value} / {condition.value}, writing an empty report")
        return PatternReport(phase, condition, 0, None, ())

    fraction = min_support.fraction
    if min_support.is_auto:
        try:
            fraction = auto_tune_min_support(merge_database(db))
            logger.info(f"{phase.value} / {condition.value}: auto-tuned min_support = {fraction}")
        except NoQualifyingSupportError:
            fraction = DEFAULT_MIN_SUPPORT
            logger.warning(
                f"{phase.value} / {condition.value}: no grid value yields a length-3 pattern, "
                f"using min_support = {fraction}"
            )

    patterns = pattern_report(db, fraction, max_pattern_length)
    return PatternReport(phase, condition, db.n_p, fraction, tuple(patterns))


def pattern_reports(d: SessionDataset, cfg: RunConfig) -> list[PatternReport]:
    """ All eight reports, phase-major, mined on `cfg.workers` threads. """
    cells = [(phase, condition) for phase in Phase for condition in Condition]
    with ThreadPoolExecutor(max_workers = cfg.workers) as executor:
        return list(executor.map(
            lambda cell: mine_cell(d, cell[0], cell[1], cfg.min_support, cfg.max_pattern_length), cells
        ))


################################ Run ################################
def analyze(cfg: RunConfig) -> list[Artifact]:
    """
    Run the whole analysis and return the artifacts to be written, in a fixed order. Nothing is
    written here, so a failure at any step leaves the output directory untouched.
    """
    d = align_phases(cfg.load_dataset(), cfg.tolerance)

    student_networks = [build_student_phase_network(d, c) for c in Condition]
    maximum = global_max_quantity(*student_networks)
    profiles = [p for n in student_networks for p in engagement_profiles(n, maximum)]
    pruned = [PrunedNetwork.of(build_behaviour_phase_network(d, c), cfg.alpha) for c in Condition]
    reports = pattern_reports(d, cfg)

    artifacts = [
        Artifact("engagement.csv", EmitFormat.CSV, engagement_csv(profiles)),
        Artifact("stats.json", EmitFormat.JSON, stats_json(profiles)),
        Artifact("boxplot.csv", EmitFormat.CSV, boxplot_csv(profiles)),
        Artifact("indicator_distribution.csv", EmitFormat.CSV, indicator_distribution_csv(d)),
        Artifact("phase_counts.csv", EmitFormat.CSV, phase_counts_csv(d)),
    ]
    for network in pruned:
        name = f"network_{network.condition.value.lower()}"
        artifacts.append(Artifact(f"{name}.json", EmitFormat.JSON, network.to_json()))
        artifacts.append(Artifact(f"{name}.dot", EmitFormat.DOT, network.to_dot(cfg.keep_all)))
    for report in reports:
        artifacts.append(Artifact(f"{report.name}.json", EmitFormat.JSON, report.to_json()))
        artifacts.append(Artifact(f"{report.name}.dot", EmitFormat.DOT, report.to_dot()))

    return [a for a in artifacts if a.emit_format in cfg.emit]


def write_artifacts(artifacts: list[Artifact], out: str | Path) -> list[Path]:
    out = Path(out)
    out.mkdir(parents = True, exist_ok = True)
    written = []
    for artifact in artifacts:
        path = out / artifact.name
        path.write_text(artifact.content, encoding = "utf-8", newline = "")
        written.append(path)
    logger.info(f"Wrote {len(written)} files into {out}")
    return written
