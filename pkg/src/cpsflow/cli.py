"""
Command-line entry point: `cpsflow analyze | synth | oracle | kappa`.

Exit status is 0 on success, 1 on invalid input, failed validation or an oracle mismatch, and 2 on
I/O failure.
"""
import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from tabulate import tabulate

from cpsflow.errors import CpsError, DatasetValidationError
from cpsflow.ingest import read_rows
from cpsflow.model.framework import normalize_code
from cpsflow.oracles import OracleKind, run_oracle
from cpsflow.pipeline import EmitFormat, MinSupport, RunConfig, analyze, write_artifacts
from cpsflow.stats import cohens_kappa
from cpsflow.synth import SynthProfile, SynthSpec, generate, write_dataset

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2

KAPPA_HEADER = ["coder1", "coder2"]


def cmd_analyze(cfg: RunConfig) -> int:
    try:
        artifacts = analyze(cfg)
    except DatasetValidationError as e:
        for violation in e.report.violations:
            print(violation, file = sys.stderr)
        return EXIT_INVALID
    except CpsError as e:
        print(f"error: {e}", file = sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"error: {e}", file = sys.stderr)
        return EXIT_IO

    try:
        write_artifacts(artifacts, cfg.out)
    except OSError as e:
        print(f"error: {e}", file = sys.stderr)
        return EXIT_IO

    print(tabulate(
        [[a.name, a.emit_format.value, len(a.content)] for a in artifacts],
        tablefmt = "orgtbl",
        headers = ["File", "Format", "Bytes"],
    ))
    return EXIT_OK


def cmd_synth(spec: SynthSpec, out: str | Path, parquet: bool = False) -> int:
    d = generate(spec)
    try:
        write_dataset(d, out, parquet)
    except OSError as e:
        print(f"error: {e}", file = sys.stderr)
        return EXIT_IO

    rows = []
    for condition in sorted({entry.condition for entry in d.roster.values()}, key = lambda c: c.value):
        students = d.students(condition)
        rows.append([
            condition.value,
            len({d.roster[s].triad_id for s in students}),
            len(students),
            len(d.utterances_of(condition)),
        ])
    print(tabulate(rows, tablefmt = "orgtbl", headers = ["Condition", "Triads", "Students", "Utterances"]))
    return EXIT_OK


def cmd_oracle(kind: str | OracleKind, trials: int | None = None, seed: int = 0) -> int:
    outcome = run_oracle(kind, trials, seed)
    print(f"{outcome.kind.value}: {outcome}")
    if not outcome.ok:
        print(f"counterexample: {outcome.counterexample}")
        return EXIT_INVALID
    return EXIT_OK


def cmd_kappa(codings: str | Path) -> int:
    try:
        rows = [
            (normalize_code(c1), normalize_code(c2))
            for _, (c1, c2) in read_rows(codings, Path(codings).name, KAPPA_HEADER)
        ]
        coder1 = [c1 for c1, _ in rows]
        coder2 = [c2 for _, c2 in rows]
        kappa = cohens_kappa(coder1, coder2)
    except CpsError as e:
        print(f"error: {e}", file = sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"error: {e}", file = sys.stderr)
        return EXIT_IO

    agreement = sum(1 for c1, c2 in rows if c1 == c2) / len(rows)
    print(tabulate(
        [[len(rows), agreement, kappa]], tablefmt = "orgtbl", headers = ["Utterances", "Agreement", "Kappa"]
    ))
    return EXIT_OK


################################ Arguments ################################
def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog = "cpsflow", description = "CPS dialogue analytics")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action = "store_true", help = "log at DEBUG level")
    verbosity.add_argument("-q", "--quiet", action = "store_true", help = "log warnings and errors only")
    commands = parser.add_subparsers(dest = "command", required = True)

    analyze_parser = commands.add_parser("analyze", help = "run the full analysis over an event log")
    analyze_parser.add_argument("--utterances", type = Path, help = "utterances.csv")
    analyze_parser.add_argument("--phase-log", type = Path, help = "phase_log.csv")
    analyze_parser.add_argument("--roster", type = Path, help = "roster.csv")
    analyze_parser.add_argument("--dataset", type = Path, help = "parquet snapshot instead of the three CSV files")
    analyze_parser.add_argument("--alpha", type = float, default = 0.05, help = "null-model significance level")
    analyze_parser.add_argument("--min-support", default = "auto", help = "\"auto\" or a fraction in (0, 1]")
    analyze_parser.add_argument("--max-pattern-length", type = int, default = None)
    analyze_parser.add_argument("--out", type = Path, required = True, help = "output directory")
    analyze_parser.add_argument("--emit", default = "json,csv,dot", help = "comma-separated subset of json,csv,dot")
    analyze_parser.add_argument("--keep-all", action = "store_true", help = "keep non-significant edges, dashed")
    analyze_parser.add_argument("--workers", type = int, default = 1, help = "threads used for pattern mining")
    analyze_parser.add_argument("--tolerance", default = "2000 ms", help = "clock-skew tolerance, e.g. \"2 s\"")

    synth_parser = commands.add_parser("synth", help = "generate a seeded synthetic event log")
    synth_parser.add_argument("--seed", type = int, default = 42)
    synth_parser.add_argument("--students-per-condition", type = int, default = 39)
    synth_parser.add_argument("--profile", default = SynthProfile.DEFAULT.value,
                              choices = [p.value for p in SynthProfile])
    synth_parser.add_argument("--out", type = Path, required = True, help = "output directory")
    synth_parser.add_argument("--parquet", action = "store_true", help = "also write dataset.parquet")

    oracle_parser = commands.add_parser("oracle", help = "check implementations against brute-force oracles")
    oracle_parser.add_argument("kind", choices = [k.value for k in OracleKind])
    oracle_parser.add_argument("--trials", type = int, default = None)
    oracle_parser.add_argument("--seed", type = int, default = 0)

    kappa_parser = commands.add_parser("kappa", help = "Cohen's kappa of two codings")
    kappa_parser.add_argument("--codings", type = Path, required = True, help = "CSV with columns coder1,coder2")

    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(
        level = level,
        format = "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream = sys.stderr,
        force = True,
    )


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    _configure_logging(args)

    match args.command:
        case "analyze":
            try:
                cfg = RunConfig(
                    utterances = args.utterances,
                    phase_log = args.phase_log,
                    roster = args.roster,
                    dataset = args.dataset,
                    out = args.out,
                    alpha = args.alpha,
                    min_support = MinSupport.value_of(args.min_support),
                    emit = EmitFormat.parse_list(args.emit),
                    keep_all = args.keep_all,
                    workers = args.workers,
                    max_pattern_length = args.max_pattern_length,
                    tolerance = args.tolerance,
                )
            except RuntimeError as e:
                print(f"error: {e}", file = sys.stderr)
                return EXIT_INVALID
            return cmd_analyze(cfg)
        case "synth":
            try:
                spec = SynthSpec.of_profile(args.profile, args.seed, args.students_per_condition)
            except CpsError as e:
                print(f"error: {e}", file = sys.stderr)
                return EXIT_INVALID
            return cmd_synth(spec, args.out, args.parquet)
        case "oracle":
            return cmd_oracle(args.kind, args.trials, args.seed)
        case "kappa":
            return cmd_kappa(args.codings)


if __name__ == "__main__":
    sys.exit(main())
