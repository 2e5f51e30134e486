"""Command-line front end.

Subcommands: classify, verify-model, solve-regular, solve-singular, scan.
Flags override the JSON file given by --config, which overrides NK_*
environment settings.

Exit codes: 0 success, 1 failed verification, 2 input error,
3 data not in N, 4 numerical failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from nearly_kahler import __version__
from nearly_kahler.config import settings
from nearly_kahler.errors import MembershipError, NKError
from nearly_kahler.models.homogeneous import ModelId
from nearly_kahler.schema.run_schema import RunConfig
from nearly_kahler.services import run_service

logger = logging.getLogger(__name__)

DEFAULT_SCAN_GRID = (
    "0.05,0.1111111111111111,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5"
)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2
EXIT_MEMBERSHIP = 3
EXIT_NUMERICAL = 4


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with run parameters")
    common.add_argument("--mu", type=float)
    common.add_argument("--tol", type=float, help="integrator rtol = atol")
    common.add_argument("--span", help="s-range as 'start,end'")
    common.add_argument("--series-order", type=int, dest="series_order")
    common.add_argument("--switch", type=float, help="series handoff point")
    common.add_argument("--out", help="output directory")
    common.add_argument("--jobs", type=int, help="worker processes, 0 = cores")
    common.add_argument("--seed", type=int)
    common.add_argument("--points", type=int, help="output nodes per curve")
    common.add_argument(
        "--log-level",
        dest="log_level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
    )

    parser = argparse.ArgumentParser(
        prog="nearly-kahler",
        description="Cohomogeneity one nearly Kahler structures on SU2 x SU2",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    classify = sub.add_parser(
        "classify", parents=[common], help="orbit type of a 3-form"
    )
    classify.add_argument(
        "coefficients", help="20 coefficients in the e^ijk basis order"
    )
    classify.add_argument("--vol", type=float, default=1.0)

    verify = sub.add_parser(
        "verify-model", parents=[common], help="check a homogeneous model"
    )
    verify.add_argument("model", choices=[m.value for m in ModelId])
    verify.add_argument("--samples", type=int)

    regular = sub.add_parser(
        "solve-regular", parents=[common], help="integrate from a point of N"
    )
    source = regular.add_mutually_exclusive_group()
    source.add_argument("--point", help="a2,a3,a4,b1,b2,b3,b4")
    source.add_argument("--model", choices=[m.value for m in ModelId])
    regular.add_argument(
        "--perturb",
        type=float,
        metavar="SCALE",
        help="move the start point within N by a seeded step of this scale",
    )

    singular = sub.add_parser(
        "solve-singular",
        parents=[common],
        help="solve from the singular orbit for each c1",
    )
    singular.add_argument("--c1", required=True, help="value, list or a:b:step")
    singular.add_argument("--s-max", type=float, dest="s_max")

    scan = sub.add_parser(
        "scan", parents=[common], help="parallel sweep over c1"
    )
    scan.add_argument("--grid", default=DEFAULT_SCAN_GRID)
    scan.add_argument("--s-max", type=float, dest="s_max")
    return parser


def build_config(args: argparse.Namespace) -> RunConfig:
    """Merge --config JSON and command-line flags into a RunConfig."""
    data: dict = {}
    if args.config:
        data.update(json.loads(Path(args.config).read_text()))
    overrides = {
        "mu": args.mu,
        "tol": args.tol,
        "series_order": args.series_order,
        "s_switch": args.switch,
        "out": args.out,
        "jobs": args.jobs,
        "seed": args.seed,
        "n_points": args.points,
        "samples": getattr(args, "samples", None),
        "model": getattr(args, "model", None),
        "perturb": getattr(args, "perturb", None),
        "s_max": getattr(args, "s_max", None),
    }
    if args.span:
        overrides["span"] = tuple(run_service.parse_floats(args.span, 2))
    if getattr(args, "point", None):
        overrides["point"] = run_service.parse_floats(args.point, 7)
    grid = getattr(args, "c1", None) or getattr(args, "grid", None)
    if grid:
        overrides["c1"] = run_service.parse_grid(grid)
    data.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.model_validate(data)


def _cmd_classify(args: argparse.Namespace, _config: RunConfig) -> int:
    coeffs = run_service.parse_floats(args.coefficients, 20)
    result = run_service.classify(coeffs, args.vol)
    print(f"📊 P = {result.value:.12g} ({result.tag})")
    if result.j_matrix is not None:
        print("✅ Stable; J_theta =")
        for row in result.j_matrix:
            print("   " + " ".join(f"{v: .6f}" for v in row))
    return EXIT_OK


def _cmd_verify(args: argparse.Namespace, config: RunConfig) -> int:
    result = run_service.verify_model(args.model, config.samples)
    marker = "✅" if result.passed else "❌"
    print(
        f"{marker} {result.model} (mu={result.mu:g}): "
        f"max residual {result.max_residual:.3e}, "
        f"constraint {result.max_constraint:.3e}, "
        f"stable={result.stability_ok}, positive={result.positivity_ok}"
    )
    return EXIT_OK if result.passed else EXIT_FAILED


def _cmd_regular(_args: argparse.Namespace, config: RunConfig) -> int:
    manifest = run_service.solve_regular(config)
    print(f"✅ Integrated over {config.span}, drift {max(manifest.drift):.3e}")
    print(f"📊 Canonical representative: {np.round(manifest.canonical, 12)}")
    if manifest.matched_model:
        print(f"📊 Matches {manifest.matched_model}")
    for path in manifest.files:
        print(f"💾 {path}")
    return EXIT_OK


def _print_singular(manifest) -> bool:
    check = manifest.verification
    ok = check is not None and all(
        (check.extension, check.stability, check.positivity)
    )
    marker = "✅" if ok else "⚠️"
    matched = f", matches {manifest.matched_model}" if manifest.matched_model else ""
    print(
        f"{marker} c1={manifest.c1:.6g}: drift {max(manifest.drift):.3e}"
        f"{matched}"
    )
    print(f"💾 {manifest.files[-1]}")
    return ok


def _cmd_singular(_args: argparse.Namespace, config: RunConfig) -> int:
    results = [_print_singular(m) for m in run_service.solve_singular(config)]
    return EXIT_OK if all(results) else EXIT_FAILED


def _cmd_scan(_args: argparse.Namespace, config: RunConfig) -> int:
    summary = run_service.scan(config)
    ok = summary.distinct and summary.all_verified
    marker = "✅" if ok else "⚠️"
    print(
        f"{marker} {len(summary.manifests)} runs, "
        f"min pair distance {summary.min_pair_distance:.3e}, "
        f"matched {summary.matched}"
    )
    return EXIT_OK if ok else EXIT_FAILED


COMMANDS = {
    "classify": _cmd_classify,
    "verify-model": _cmd_verify,
    "solve-regular": _cmd_regular,
    "solve-singular": _cmd_singular,
    "scan": _cmd_scan,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=args.log_level or settings.log_level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        config = build_config(args)
        return COMMANDS[args.command](args, config)
    except MembershipError as err:
        print(f"❌ {err}", file=sys.stderr)
        return EXIT_MEMBERSHIP
    except NKError as err:
        print(f"❌ {err}", file=sys.stderr)
        return EXIT_INPUT if isinstance(err, ValueError) else EXIT_NUMERICAL
    except (ValueError, OSError) as err:
        print(f"❌ Invalid input: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
