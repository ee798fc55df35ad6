from .hina import BipartiteNetwork, EngagementProfile, PrunedNetwork, build_behaviour_phase_network, \
    build_student_phase_network, engagement_profiles, prune_edges
from .ingest import SequenceDatabase, align_phases, build_sequences, parse_event_log
from .model.dataset import SessionDataset, validate_dataset
from .model.framework import Condition, Phase, load_framework
from .model.time import Duration, TimeUnit
from .pipeline import RunConfig, analyze
from .spm import FrequentPattern, auto_tune_min_support, count_occurrences, pattern_report, prefix_span
from .stats import BoxplotSummary, TestResult, boxplot_summary, cohens_kappa, mann_whitney, rank_biserial
from .synth import SynthSpec, generate
