import argparse
from typing import NoReturn, Optional, Sequence

from claimcheck.console import output_error
from claimcheck.constants import (ABLATE_COMMAND, ABLATIONS, COMPARE_COMMAND,
                                  EVAL_COMMAND, GENERATE_COMMAND,
                                  KG_STATS_COMMAND, PREDICT_COMMAND,
                                  PRETRAIN_COMMAND, SWEEP_COMMAND,
                                  SWEEP_PARAMETERS, TRAIN_COMMAND)
from claimcheck.exceptions import ArgumentException


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        raise ArgumentException(message)


def _add_run_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "overrides",
        nargs="*",
        metavar="key=value",
        help="Overrides a configuration key, for example lambda2=0.1.",
    )
    parser.add_argument(
        "-c",
        "--config",
        dest="config_path",
        help="Path of a JSON file holding configuration keys.",
    )
    parser.add_argument(
        "--seed", type=int, dest="seed", help="Seed all randomness derives from."
    )
    parser.add_argument(
        "-o", "--out", dest="out_dir", help="Directory the artifacts are written to."
    )
    parser.add_argument(
        "-k", "--kg", dest="kg_path", help="Path of the tab-separated triple file."
    )


def _build_argument_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="claimcheck",
        description="Multi-claim statement verification over a knowledge graph.",
    )
    parser.add_argument(
        "-v",
        "--version",
        action="store_true",
        dest="show_version",
        help="Displays the currently installed version of claimcheck.",
    )
    parser.add_argument(
        "-s",
        "--silent",
        action="store_true",
        dest="silent",
        help="Prevent from displaying any console output other than reports.",
    )
    parser.add_argument(
        "--verbose",
        action="store_true",
        dest="verbose",
        help="Logs per-epoch diagnostics to the diagnostic stream.",
    )

    subparsers = parser.add_subparsers(help="Command to execute.", dest="command")
    stats_parser = subparsers.add_parser(
        KG_STATS_COMMAND, help="Prints counts and degree statistics of a graph."
    )
    generate_parser = subparsers.add_parser(
        GENERATE_COMMAND, help="Generates a labelled statement corpus by random walks."
    )
    pretrain_parser = subparsers.add_parser(
        PRETRAIN_COMMAND, help="Pretrains embeddings and the claim encoder."
    )
    train_parser = subparsers.add_parser(
        TRAIN_COMMAND, help="Trains the statement verifier."
    )
    eval_parser = subparsers.add_parser(
        EVAL_COMMAND, help="Evaluates a checkpoint on the test split."
    )
    ablate_parser = subparsers.add_parser(
        ABLATE_COMMAND, help="Trains and compares ablation variants."
    )
    sweep_parser = subparsers.add_parser(
        SWEEP_COMMAND, help="Retrains over the values of one parameter."
    )
    compare_parser = subparsers.add_parser(
        COMPARE_COMMAND, help="Compares the verifier with the TransE baseline."
    )
    predict_parser = subparsers.add_parser(
        PREDICT_COMMAND, help="Verifies a single statement."
    )

    stats_parser.add_argument("kg_path", help="Path of the tab-separated triple file.")
    stats_parser.add_argument(
        "-o", "--out", dest="out_dir", help="Directory the report is written to."
    )

    for run_parser in (
        generate_parser,
        pretrain_parser,
        train_parser,
        eval_parser,
        ablate_parser,
        sweep_parser,
        compare_parser,
    ):
        _add_run_arguments(run_parser)

    ablate_parser.add_argument(
        "--variants",
        nargs="+",
        choices=ABLATIONS,
        dest="variants",
        help="Ablation variants to run. The full model is always included.",
    )
    sweep_parser.add_argument(
        "-p",
        "--parameter",
        required=True,
        choices=SWEEP_PARAMETERS,
        dest="parameter",
        help="The parameter to sweep.",
    )
    sweep_parser.add_argument(
        "--values",
        nargs="+",
        type=float,
        required=True,
        dest="values",
        help="Values the parameter takes.",
    )

    predict_parser.add_argument("checkpoint", help="Path of the model checkpoint.")
    predict_parser.add_argument(
        "statement",
        help="A JSON statement, either a file path or a literal such as "
        '\'{"claims": [["a", "r", "b"]]}\'.',
    )
    _add_run_arguments(predict_parser)

    return parser


def _route_overrides(args: argparse.Namespace, extras: Sequence[str]) -> None:
    """
    Appends key=value tokens that follow an option to the overrides of the command.
    """
    for extra in extras:
        if extra.startswith("-") or "=" not in extra or not hasattr(args, "overrides"):
            raise ArgumentException(f"unrecognized arguments: {' '.join(extras)}")

        args.overrides.append(extra)


def _validate_args(args: argparse.Namespace) -> None:
    if not args.command and not args.show_version:
        raise ArgumentException("Need to specify an action.")

    if args.command and args.show_version:
        raise ArgumentException("Cannot show version while executing an action.")

    if getattr(args, "seed", None) is not None and args.seed < 0:
        raise ArgumentException("The seed must not be negative.")

    if args.command == SWEEP_COMMAND and args.parameter in ("n_heads", "k"):
        if any(value < 1 or value != int(value) for value in args.values):
            raise ArgumentException(
                f"Values of {args.parameter} must be positive integers."
            )


def parse_args(argv: Optional[Sequence[str]] = None) -> Optional[argparse.Namespace]:
    parser = _build_argument_parser()

    try:
        args, extras = parser.parse_known_args(argv)
        _route_overrides(args, extras)
        _validate_args(args)
    except ArgumentException as exception:
        output_error(exception)
        return None

    return args
