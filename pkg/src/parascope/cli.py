"""Command-line interface: one executable, composable pipeline subcommands.

    parascope -c run.toml train-mapping
    parascope -c run.toml encode --scheme surprise
    parascope -c run.toml score --scheme surprise
    parascope -c run.toml evaluate --mode auc --end-to-end
    parascope -c run.toml ablate --end-to-end

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
The config path may also come from the PARASCOPE_CONFIG environment
variable; flags override config file values.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor

from . import stages
from .config import CONFIG_ENV_VAR, ConfigError, RunConfig, load_config, restrict_methods
from .dataset import SPLITS
from .encoders import SCHEMES
from .harness import run_direct_eval, run_downstream_eval

logger = logging.getLogger(__name__)

ABLATION_METHODS = ("cbow", "frequency", "pretrained-weights", "surprise")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="parascope",
        description="Detect domain-adjacent utterances for a semantic parser.",
    )
    parser.add_argument(
        "-c",
        "--config",
        default=None,
        help=f"run config (TOML); defaults to ${CONFIG_ENV_VAR}",
    )
    parser.add_argument("--seed", type=int, default=None, help="override the master seed")
    parser.add_argument("--k", type=int, default=None, help="override the neighbor count")
    parser.add_argument("--epochs", type=int, default=None)
    parser.add_argument("--learning-rate", type=float, default=None, dest="learning_rate")
    parser.add_argument("--surprise-window", type=int, default=None, dest="surprise_window")
    parser.add_argument("--training-window", type=int, default=None, dest="training_window")
    parser.add_argument("--flag-fraction", type=float, default=None, dest="flag_fraction")
    parser.add_argument(
        "--adjacent-fraction", type=float, default=None, dest="adjacent_fraction"
    )
    parser.add_argument("--vectors", default=None, help="override the vectors path")
    parser.add_argument("--output-dir", default=None, dest="output_dir")
    parser.add_argument(
        "--domains",
        nargs="+",
        default=None,
        help="restrict to these configured domains",
    )
    parser.add_argument("--jobs", type=int, default=None, help="max parallel domain workers")

    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train-mapping", help="fit the pretrained->domain mapping")
    train.add_argument(
        "--export-table",
        action="store_true",
        help="also write the materialized domain vectors as plain text",
    )

    encode = sub.add_parser("encode", help="encode corpus splits to sentence vectors")
    encode.add_argument("--scheme", required=True, choices=SCHEMES)
    encode.add_argument(
        "--splits",
        nargs="+",
        default=list(SPLITS),
        choices=SPLITS,
        help="which splits to encode",
    )

    score = sub.add_parser("score", help="score the test split against the train index")
    score.add_argument("--scheme", required=True, choices=SCHEMES)

    evaluate = sub.add_parser("evaluate", help="run an evaluation and write reports")
    evaluate.add_argument("--mode", required=True, choices=("auc", "downstream"))
    evaluate.add_argument(
        "--end-to-end",
        action="store_true",
        help="build any missing upstream artifacts from the raw corpus",
    )
    evaluate.add_argument("--methods", nargs="+", default=None, choices=SCHEMES)

    ablate = sub.add_parser(
        "ablate", help="AUC report over all four weighting schemes"
    )
    ablate.add_argument("--end-to-end", action="store_true")

    return parser


_OVERRIDE_KEYS = (
    "seed",
    "k",
    "epochs",
    "learning_rate",
    "surprise_window",
    "training_window",
    "flag_fraction",
    "adjacent_fraction",
    "vectors",
    "output_dir",
    "domains",
    "jobs",
)


def _load(args: argparse.Namespace, require_outcomes: bool = False) -> RunConfig:
    overrides = {key: getattr(args, key) for key in _OVERRIDE_KEYS}
    return load_config(args.config, overrides, require_outcomes=require_outcomes)


def _prebuild_scores(config: RunConfig, end_to_end: bool) -> None:
    """Build per-domain artifacts in parallel when --jobs allows.

    In the serial case the evaluation itself builds artifacts on demand, so
    this is a no-op unless multiple workers can actually overlap.
    """
    if config.jobs < 2 or len(config.domains) < 2:
        return

    def build(domain) -> None:
        ctx = stages.PipelineContext(config, domain)
        for method in config.methods:
            stages.ensure_scores(ctx, method, build=end_to_end)

    stages.load_pretrained(config)  # shared read-only table, loaded once
    with ThreadPoolExecutor(max_workers=config.jobs) as pool:
        list(pool.map(build, config.domains))


def _cmd_train_mapping(args: argparse.Namespace) -> int:
    config = _load(args)
    for domain in config.domains:
        ctx = stages.PipelineContext(config, domain)
        path = stages.stage_train_mapping(ctx, export_table=args.export_table)
        print(f"{domain.name}: wrote {path}")
    return 0


def _cmd_encode(args: argparse.Namespace) -> int:
    config = _load(args)
    for domain in config.domains:
        ctx = stages.PipelineContext(config, domain)
        paths = stages.stage_encode(ctx, args.scheme, splits=tuple(args.splits))
        for split, path in paths.items():
            print(f"{domain.name}/{split}: wrote {path}")
    return 0


def _cmd_score(args: argparse.Namespace) -> int:
    config = _load(args)
    for domain in config.domains:
        ctx = stages.PipelineContext(config, domain)
        path = stages.stage_score(ctx, args.scheme)
        print(f"{domain.name}: wrote {path}")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    config = _load(args, require_outcomes=args.mode == "downstream")
    if args.methods:
        config = restrict_methods(config, args.methods)
    _prebuild_scores(config, args.end_to_end)
    if args.mode == "auc":
        result = run_direct_eval(config, end_to_end=args.end_to_end)
        for cell in result.cells:
            print(f"auc {cell.method} {cell.domain} {cell.auc:.3f}")
    else:
        result = run_downstream_eval(config, end_to_end=args.end_to_end)
        for domain in result.domains:
            for row in result.rows[domain]:
                print(f"accuracy {row.method} {domain} {row.accuracy:.3f}")
    print(f"reports written to {config.reports_dir()}")
    return 0


def _cmd_ablate(args: argparse.Namespace) -> int:
    config = restrict_methods(_load(args), ABLATION_METHODS)
    _prebuild_scores(config, args.end_to_end)
    result = run_direct_eval(
        config, end_to_end=args.end_to_end, report_prefix="ablation_"
    )
    for cell in result.cells:
        print(f"auc {cell.method} {cell.domain} {cell.auc:.3f}")
    print(f"reports written to {config.reports_dir()}")
    return 0


_COMMANDS = {
    "train-mapping": _cmd_train_mapping,
    "encode": _cmd_encode,
    "score": _cmd_score,
    "evaluate": _cmd_evaluate,
    "ablate": _cmd_ablate,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure -> exit 1 with a message
        logger.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
