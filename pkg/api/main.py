import argparse
import asyncio
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from TrajCert.orchestration.coordinators.orchestrator import EXIT_USAGE, Orchestrator
from api.schema import CliCommand, Subcommand
from diagnostics.business_logic.business_logic_service import BusinessLogicManager


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tcert", description="Trajectory stability certificates for linear regression")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", required=True, help="Output directory")
    common.add_argument("--config", default=None, help="TOML suite file")
    common.add_argument("--seeds", type=int, default=None, help="Number of seeds (overrides seeds.count)")
    common.add_argument("--workers", type=int, default=None, help="Worker threads (overrides suite.workers)")
    common.add_argument("--profile", default=None, help="Base profile: full or smoke")
    common.add_argument("--force", action="store_true", help="Overwrite an output directory that already holds outputs")
    common.add_argument("--debug", action="store_true", help="Enable debug logging")

    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    helps = {
        Subcommand.GEN: "Generate and save the base datasets",
        Subcommand.RUN: "Run the full suite and render every table",
        Subcommand.SWEEP: "GD step-size sweep",
        Subcommand.COMPARE_OPTIMIZERS: "SGD, GD and Adam on identical data",
        Subcommand.ABLATE_NEIGHBOR: "Random-index versus high-leverage neighbors",
        Subcommand.ABLATE_LABELS: "Clean versus permuted labels",
        Subcommand.NECESSITY_DEMO: "Minimum-norm interpolation necessity demo",
        Subcommand.REPORT: "Verify an output directory and print the checklist",
    }
    for subcommand, text in helps.items():
        sub = subparsers.add_parser(subcommand.value, parents=[common], help=text)
        if subcommand == Subcommand.NECESSITY_DEMO:
            sub.add_argument("--trials", type=int, default=None, help="Fresh trials (overrides demo.trials)")
        if subcommand == Subcommand.REPORT:
            sub.add_argument(
                "--reference", default=None, help="Earlier output of the same config; CSV trees must match byte for byte"
            )
    return parser


def parse_command(argv: Optional[List[str]] = None) -> CliCommand:
    args = build_parser().parse_args(argv)
    return CliCommand(
        subcommand=args.subcommand,
        output_dir=args.out,
        config_path=args.config,
        seeds=args.seeds,
        workers=args.workers,
        trials=getattr(args, "trials", None),
        reference_dir=getattr(args, "reference", None),
        profile=args.profile,
        force=args.force,
        debug=args.debug,
    )


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point for the tcert command."""
    try:
        command = parse_command(argv)
    except ValidationError as e:
        print(f"tcert: invalid arguments: {e.errors()[0]['loc'][0]}: {e.errors()[0]['msg']}", file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(
        level=logging.DEBUG if command.debug else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    orchestrator = Orchestrator(BusinessLogicManager())
    result = asyncio.run(orchestrator.process_command(command))
    if result.get("message"):
        print(result["message"])
    if result.get("error"):
        print(f"tcert: {result['error']}", file=sys.stderr)
    return int(result["exit_code"])


if __name__ == "__main__":
    sys.exit(main())
