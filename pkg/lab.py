#!/usr/bin/env python3
"""
Submersion Lab command line

    python lab.py run configs/torus_a03_full.json [--out DIR] [--jobs N] [--format struct|table|all]
    python lab.py --list-scenarios

Exit status: 0 when every bound passes and no contract is violated,
1 otherwise, 2 for configuration errors.
"""

import argparse
import sys
from pathlib import Path

# Add backend to path
sys.path.insert(0, str(Path(__file__).parent / "backend"))

from pydantic import ValidationError

from app.models.experiment import ExperimentConfig
from app.services.errors import LabError, OutputPathError
from app.services.report_writer import emit
from app.services.runner import run
from app.services.scenarios import list_scenarios

FORMATS = {"struct": ["struct"], "table": ["table", "series"], "all": ["struct", "table", "series"]}


def format_validation_error(error: ValidationError) -> str:
    lines = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"   • {location}: {item['msg']}")
    return "\n".join(lines)


def load_config(path: str) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    return ExperimentConfig.model_validate_json(text)


def print_scenarios() -> None:
    print("\n📚 Registered scenarios:")
    for info in list_scenarios():
        params = ", ".join(
            f"{name}={spec.get('default')}" for name, spec in info.params_schema.get("properties", {}).items()
        )
        print(f"   • {info.name}({params})")
        print(f"     {info.description}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lab", description="Numerical lab for Riemannian submersions")
    parser.add_argument("--list-scenarios", action="store_true", help="List registered scenarios and exit")
    commands = parser.add_subparsers(dest="command")

    run_parser = commands.add_parser("run", help="Run an experiment config")
    run_parser.add_argument("config", help="Path to the JSON experiment config")
    run_parser.add_argument("--out", default=None, help="Output directory (overrides output.directory)")
    run_parser.add_argument("--jobs", type=int, default=None, help="Worker threads (default: LAB_JOBS)")
    run_parser.add_argument("--format", choices=sorted(FORMATS), default=None, help="Outputs to write")
    run_parser.add_argument("--list-scenarios", action="store_true", help="List registered scenarios and exit")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.list_scenarios:
        print_scenarios()
        return 0
    if args.command != "run":
        parser.print_help()
        return 2

    try:
        config = load_config(args.config)
    except OSError as e:
        print(f"\n❌ Cannot read config: {e}")
        return 2
    except ValidationError as e:
        print(f"\n❌ Invalid config {args.config}:")
        print(format_validation_error(e))
        return 2

    try:
        report = run(config, jobs=args.jobs)
    except LabError as e:
        print(f"\n❌ {type(e).__name__}: {e}")
        return 2

    try:
        written = emit(report, args.out, FORMATS[args.format] if args.format else None)
    except OutputPathError as e:
        print(f"\n❌ {e}")
        return 2

    print(f"\n📁 Wrote {len(written)} file(s) to {args.out or report.config.output.directory}")
    print(f"   Wall time: {report.wall_time:.1f}s")
    if report.passed:
        print("✅ All bounds passed, no contract violations")
        return 0
    print("⚠️ Some bounds failed or contracts were violated")
    return 1


if __name__ == "__main__":
    sys.exit(main())
