"""Command-line front end.

Exit codes: 0 success, 1 validation check failure, 2 usage or configuration error,
3 solver or I/O failure.
"""
import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from scatter_workbench.ArchiveManager import ArchiveManager
from scatter_workbench.errors import ConfigError, DatasetError, DomainError, NoiseError, WorkbenchError
from scatter_workbench.ForwardSolver import FarFieldTensor, ForwardProblem, far_field, generate_dataset, unit_vectors
from scatter_workbench.Geometry import make_grid
from scatter_workbench.SamplingIndicators import INDICATOR_KINDS, NoiseSpec, add_noise, indicator, summarize
from scatter_workbench.Settings import BENCHMARK_BANDS, RunConfig, env_log_level, load_config
from scatter_workbench.Validation import SUITES, lowk_suite, run_suite
from scatter_workbench.WorkflowManager import WorkflowManager

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_FAILURE = 0, 1, 2, 3


def _grid(text: str):
    parts = text.split()
    if len(parts) != 5:
        raise argparse.ArgumentTypeError('expected "xmin xmax ymin ymax n"')
    try:
        return make_grid([float(p) for p in parts[:4]], int(parts[4]))
    except (ValueError, WorkbenchError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration (JSON); benchmark defaults when omitted")
    common.add_argument("--out", help="output directory (default: output.dir of the configuration)")
    common.add_argument("--threads", type=int, help="worker threads (default: SCATTER_THREADS or 1)")
    common.add_argument("--log-level", default=None, help="logging level (default: SCATTER_LOG_LEVEL or INFO)")

    parser = argparse.ArgumentParser(prog="scatter-workbench", description=__doc__.splitlines()[0])
    verbs = parser.add_subparsers(dest="verb", required=True)

    forward = verbs.add_parser("forward", parents=[common], help="far field of one (k, d) pair")
    forward.add_argument("--k", type=float, required=True)
    forward.add_argument("--dir-deg", type=float, help="incident direction in degrees (default: first configured)")

    dataset = verbs.add_parser("dataset", parents=[common], help="far-field tensor over the configured axes")
    dataset.add_argument("--band", choices=sorted(BENCHMARK_BANDS), help="benchmark frequency band")

    noise = verbs.add_parser("noise", parents=[common], help="add relative noise to an archive")
    noise.add_argument("--in", dest="archive_in", required=True)
    noise.add_argument("--delta", type=float)
    noise.add_argument("--seed", type=int)

    reconstruct = verbs.add_parser("reconstruct", parents=[common], help="indicator field from an archive")
    reconstruct.add_argument("--in", dest="archive_in", required=True)
    reconstruct.add_argument("--indicator", choices=INDICATOR_KINDS, required=True)
    reconstruct.add_argument("--grid", type=_grid, help='"xmin xmax ymin ymax n"')
    reconstruct.add_argument("--direction", type=int, help="direction index for single-direction indicators")

    validate = verbs.add_parser("validate", parents=[common], help="run an invariant suite")
    validate.add_argument("suite", choices=SUITES)

    verbs.add_parser("asymptotics", parents=[common], help="low-frequency remainder ladders")

    pipeline = verbs.add_parser("pipeline", parents=[common], help="dataset, noise, reconstruction and summary")
    pipeline.add_argument("--in", dest="archive_in", help="reuse an existing archive instead of solving")
    return parser


def _configure_logging(level: Optional[str]) -> None:
    logging.basicConfig(
        level=(level or env_log_level()).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _archives(args, config: RunConfig) -> ArchiveManager:
    return ArchiveManager(args.out or config.output.dir)


def cmd_forward(args, config: RunConfig) -> int:
    archives = _archives(args, config)
    problem = ForwardProblem(config.scatterer.build(), config.discretization.build())
    direction = np.radians(args.dir_deg) if args.dir_deg is not None else config.dataset.directions[0]
    angles = config.dataset.angles
    solution = problem.solve(args.k, unit_vectors(direction)[0])
    values = far_field(solution, angles)[:, None, None]
    tensor = FarFieldTensor(values, angles, [args.k], [direction], None, {"config_hash": config.hash})
    archives.save_tensor(tensor, config.output.archive)
    archives.save_report(
        {
            "k": args.k,
            "direction_deg": float(np.degrees(direction)),
            "formulation": solution.formulation,
            "residual": solution.residual,
            "rcond": solution.rcond,
            "iterations": solution.iterations,
            "elapsed_s": solution.elapsed,
            "config_hash": config.hash,
        },
        "forward_report.json",
    )
    return EXIT_OK


def cmd_dataset(args, config: RunConfig) -> int:
    if args.band:
        k_min, k_max, m = BENCHMARK_BANDS[args.band]
        config = replace(config, dataset=replace(config.dataset, k_min=k_min, k_max=k_max, M=m))
    dataset = config.dataset
    archives = _archives(args, config)
    name = config.output.archive
    try:
        tensor = generate_dataset(
            config.scatterer.build(),
            config.discretization.build(),
            dataset.angles,
            dataset.wavenumbers,
            dataset.directions,
            threads=config.threads,
            provenance={"config_hash": config.hash},
        )
    except DatasetError:
        archives.discard(name)
        raise
    archives.save_tensor(tensor, name)
    return EXIT_OK


def cmd_noise(args, config: RunConfig) -> int:
    base = config.noise or NoiseSpec()
    spec = NoiseSpec(
        args.delta if args.delta is not None else base.delta,
        args.seed if args.seed is not None else base.seed,
    )
    archives = _archives(args, config)
    tensor = archives.load_tensor(str(Path(args.archive_in).resolve()))
    noisy = add_noise(tensor, spec)
    archives.save_tensor(noisy, f"{Path(args.archive_in).stem}_noisy.json")
    return EXIT_OK


def cmd_reconstruct(args, config: RunConfig) -> int:
    archives = _archives(args, config)
    tensor = archives.load_tensor(str(Path(args.archive_in).resolve()))
    grid = args.grid or config.grid.build()
    direction = args.direction if args.direction is not None else config.direction_index
    field = indicator(args.indicator, tensor, grid, direction, config.threads)
    exports = archives.save_field(field)
    summary = summarize(field)
    summary.update({"exports": exports, "archive": args.archive_in, "rows": int(field.values.size)})
    archives.save_report(summary, f"{args.indicator}_summary.json")
    if field.degenerate:
        logger.warning("indicator %s is identically zero (degenerate data)", args.indicator)
    return EXIT_OK


def cmd_validate(args, config: RunConfig) -> int:
    report = run_suite(args.suite, config)
    archives = _archives(args, config)
    archives.save_report(report.to_dict(), f"validate_{args.suite}.json")
    for name, table in report.tables.items():
        archives.save_frame(table, f"validate_{args.suite}_{name}.csv")
    return EXIT_OK if report.passed else EXIT_CHECK


def cmd_asymptotics(args, config: RunConfig) -> int:
    report = lowk_suite(config)
    archives = _archives(args, config)
    if "ladder" in report.tables:
        archives.save_frame(report.tables["ladder"], "lowk_ladder.csv")
    archives.save_report(report.to_dict(), "lowk_exponents.json")
    return EXIT_OK if report.passed else EXIT_CHECK


def cmd_pipeline(args, config: RunConfig) -> int:
    result = WorkflowManager().run_pipeline(config, args.out or config.output.dir, args.archive_in)
    for kind, entry in result["summary"]["indicators"].items():
        logger.info("%s: argmax %s", kind, entry["argmax"])
    return EXIT_OK


COMMANDS = {
    "forward": cmd_forward,
    "dataset": cmd_dataset,
    "noise": cmd_noise,
    "reconstruct": cmd_reconstruct,
    "validate": cmd_validate,
    "asymptotics": cmd_asymptotics,
    "pipeline": cmd_pipeline,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.log_level)
    try:
        config = load_config(args.config)
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("thread count must be at least 1", "/threads")
            config = replace(config, threads=args.threads)
        return COMMANDS[args.verb](args, config)
    except (ConfigError, DomainError, NoiseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except WorkbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
