"""Command-line runner: ``bosoncheck <command> [flags]``.

Exit status is 0 when every pass/fail clause of the report passes, 1 when
some clause fails and 2 on invalid arguments or resource limits.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from .errors import NumericalDegeneracyError, ResourceLimitError
from .experiments import COMMANDS, ExperimentConfig, run
from .samplers import SAMPLER_KINDS


def _tolerance(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    try:
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance {name!r} needs a numeric value") from None


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bosoncheck", description="Seeded sampling and distinguisher experiments.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--n", type=int, help="photon number / matrix size")
    parser.add_argument("--m", type=int, help="number of modes")
    parser.add_argument("--samples", type=int, help="draws per arm")
    parser.add_argument("--trials", type=int, help="independent interferometer draws")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--mode", choices=("exact", "surrogate"), default="exact")
    parser.add_argument("--out", type=Path, help="report path (stdout if omitted)")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    parser.add_argument("--k", type=int, help="verifier batch size")
    parser.add_argument("--k-sweep", type=_int_list, help="verifier batch sizes, e.g. 5,10,20,40")
    parser.add_argument("--kind", choices=SAMPLER_KINDS, help="sampler for the sample command")
    parser.add_argument("--loss", type=float, default=0.0, help="photon loss probability (lossy-boson)")
    parser.add_argument("--matrix", type=Path, help="JSON matrix file for the sample command")
    parser.add_argument("--tolerance", type=_tolerance, action="append", default=[], metavar="NAME=VALUE")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    return ExperimentConfig(
        name=args.command,
        seed=args.seed,
        n=args.n,
        m=args.m,
        samples=args.samples,
        trials=args.trials,
        mode=args.mode,
        k=args.k,
        k_sweep=args.k_sweep,
        kind=args.kind,
        loss_prob=args.loss,
        matrix_path=str(args.matrix) if args.matrix else None,
        tolerances=dict(args.tolerance),
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    config = config_from_args(args)
    start = time.perf_counter()
    try:
        result = run(config)
    except (ValueError, ResourceLimitError, NumericalDegeneracyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    elapsed = time.perf_counter() - start

    if args.command == "sample":
        text = result.to_jsonl()
        if args.out:
            args.out.write_text(text)
        else:
            sys.stdout.write(text)
        print(f"wrote {len(result)} outcomes in {elapsed:.2f}s", file=sys.stderr)
        return 0

    text = result.to_json() if args.format == "json" else result.to_csv()
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text)
        for name in sorted(result.artifacts):
            args.out.with_name(f"{args.out.stem}.{name}.csv").write_text(result.artifact_csv(name))
    else:
        sys.stdout.write(text)
    for line in result.summary_lines():
        print(line, file=sys.stderr)
    for note in result.notes:
        print(f"note: {note}", file=sys.stderr)
    print(f"wall-clock: {elapsed:.2f}s", file=sys.stderr)
    return 0 if result.passed else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
