from .dataset import CodedUtterance, PhaseEntry, RosterEntry, SessionDataset, ValidationReport, Violation, \
    ViolationKind, validate_dataset
from .framework import Condition, Dimension, IndicatorCode, Phase, Subskill, load_framework, normalize_code, \
    vocabulary
from .time import Duration, TimeUnit
