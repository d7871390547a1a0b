"""
Command-line entry point.

    python cli.py run my-run.cfg [--output-dir DIR] [--override key=value ...]
    python cli.py run --preset energy-equality --override integrator.T=1
    python cli.py list-presets

Exit status: 0 all checks passed, 1 a check failed, 2 configuration error or
unknown preset, 3 a trajectory diverged.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from config import RunConfig, Settings, load_config, render_config
from errors import ConfigurationError, DivergenceError
from presets import PresetResult, get_preset, list_presets, run_config
from storage import envelope, trajectory_envelope, write_coefficients, write_json, write_ledger_csv

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def write_outputs(config: RunConfig, result: PresetResult, out_dir: Path) -> Path:
    """Ledger CSVs, trajectory and BoundFit JSON, optional coefficient dumps and report.json"""
    out_dir.mkdir(parents=True, exist_ok=True)
    for label, record in result.records.items():
        write_ledger_csv(out_dir / f"{label}.csv", record.ledger)
        write_json(out_dir / f"{label}.trajectory.json", trajectory_envelope(record))
        if config.values.get("output.dump_coefficients"):
            write_coefficients(out_dir / f"{label}.bin", record.states)
    for fit in result.fits:
        write_json(out_dir / "fits" / f"{fit.name}.json", fit.to_dict())
    report = envelope("report", {
        "experiment": config.experiment,
        "status": "passed" if result.passed else "failed",
        "failing": result.failing,
        "checks": {fit.name: {"passed": fit.passed, "constants": fit.constants} for fit in result.fits},
        "artifacts": result.artifacts,
        "config": config.describe(),
    })
    return write_json(out_dir / "report.json", report)


def _write_divergence(config: RunConfig, exc: DivergenceError, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    if exc.partial is not None:
        write_ledger_csv(out_dir / "diverged.csv", exc.partial.ledger)
    write_json(out_dir / "report.json", envelope("report", {
        "experiment": config.experiment, "status": "diverged", "time": exc.time,
        "message": str(exc), "config": config.describe(),
    }))


def run(config: RunConfig, output_dir: Optional[Path] = None, settings: Optional[Settings] = None) -> int:
    settings = settings or Settings.from_env()
    out_dir = (output_dir or config.output_dir(settings)) / config.experiment
    try:
        result = run_config(config, settings.workers)
    except DivergenceError as exc:
        logger.error(f"{config.experiment}: {exc}")
        _write_divergence(config, exc, out_dir)
        return EXIT_DIVERGED
    report = write_outputs(config, result, out_dir)
    if not result.passed:
        logger.warning(f"{config.experiment}: failing checks {', '.join(result.failing)} (see {report})")
        print(f"FAILED: {', '.join(result.failing)}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    logger.info(f"{config.experiment}: all {len(result.fits)} checks passed, report in {report}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dwsim", description="Damped wave simulator and estimate checks")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a config file or a preset template")
    source = run_p.add_mutually_exclusive_group(required=True)
    source.add_argument("config", nargs="?", type=Path, help="run configuration file")
    source.add_argument("--preset", help="run the named preset's template")
    run_p.add_argument("--output-dir", type=Path, help="overrides output.dir and DWSIM_OUTPUT_DIR")
    run_p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="set a config key after the file is read (repeatable)")

    sub.add_parser("list-presets", help="list the experiment presets")

    template_p = sub.add_parser("template", help="print a preset's config template")
    template_p.add_argument("preset")
    return parser


def _print_presets():
    presets = list_presets()
    width = max(len(p.name) for p in presets)
    for p in presets:
        print(f"{p.name:<{width}}  {p.budget:>6}  {p.description}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    settings = Settings.from_env()
    logging.basicConfig(level=getattr(logging, settings.log_level, logging.INFO),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)

    if args.command == "list-presets":
        _print_presets()
        return EXIT_OK

    try:
        if args.command == "template":
            preset = get_preset(args.preset)
            print(render_config({"experiment": preset.name, **preset.template}), end="")
            return EXIT_OK
        overrides: List[str] = args.override
        if args.preset:
            config = get_preset(args.preset).config(overrides)
        else:
            config = load_config(args.config, overrides)
            get_preset(config.experiment, config.lines.get("experiment"))
    except ConfigurationError as exc:
        where = f"{args.config}: " if getattr(args, "config", None) else ""
        logger.error(f"{where}{exc}")
        print(f"configuration error: {where}{exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        return run(config, args.output_dir, settings)
    except ConfigurationError as exc:
        logger.error(str(exc))
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
