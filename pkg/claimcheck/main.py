import argparse
import json
import logging
import os
import time
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from tabulate import tabulate

from claimcheck.baseline import baseline_min_transe
from claimcheck.claimgen import (corpus_stats, generate_corpus, load_corpus,
                                 parse_statement, save_corpus, split_corpus)
from claimcheck.config import (Config, RunConfig, baseline_config,
                               load_run_config, loss_config,
                               override_run_config, pretrain_config,
                               train_config, validate_run_config,
                               walk_config)
from claimcheck.console import (format_cyan, format_green, format_red, output,
                                output_error, output_json)
from claimcheck.constants import (ABLATE_COMMAND, ABLATION_FILE, ABLATIONS,
                                  CHECKPOINT_FILE, COMPARE_COMMAND,
                                  COMPARE_FILE, CONFIG_ECHO_FILE, CORPUS_FILE,
                                  EMBEDDINGS_FILE, EVAL_COMMAND,
                                  GENERATE_COMMAND, KG_STATS_COMMAND,
                                  PREDICT_COMMAND, PRETRAIN_COMMAND, RC_FAILED,
                                  RC_INTERRUPTED, RC_INVALID_ARGUMENT,
                                  RC_INVALID_INPUT, RC_MISSING_ARTIFACT, RC_OK,
                                  REPORT_FILE, STATS_FILE, STEP_BASELINE_TEXT,
                                  STEP_ENCODER_TEXT, STEP_GENERATE_TEXT,
                                  STEP_PRETRAIN_TEXT, STEP_TRAIN_TEXT,
                                  SWEEP_COMMAND, SWEEP_FILE, SYNTHETIC_KG_FILE,
                                  TEST_FILE, TRAIN_COMMAND, TRAIN_FILE,
                                  TRAIN_LOG_FILE, VALID_FILE)
from claimcheck.exceptions import (ClaimCheckException, ConfigException,
                                   DivergenceException,
                                   KeyboardInterruptWithDataException,
                                   MissingArtifactException,
                                   NonFiniteException,
                                   StatementFormatException)
from claimcheck.kgstore import (KnowledgeGraph, kg_stats, load_triples,
                                make_synthetic_kg, save_triples)
from claimcheck.model import load_checkpoint, save_checkpoint
from claimcheck.parser import parse_args
from claimcheck.scoring import (ClaimEncoder, EmbeddingTable, distmult_score,
                                load_embeddings, pretrain_claim_encoder,
                                pretrain_embeddings, sample_negatives,
                                save_embeddings, triple_auc)
from claimcheck.tools import create_progress_bar, read_json, write_json
from claimcheck.trainer import (build_model, calibrate, compare_buckets,
                                evaluate, fit_and_evaluate, predict_statement,
                                report_to_dict, run_ablation,
                                save_training_log, sweep, train)
from claimcheck.types import CorpusSplits, EvalReport, KgStats
from claimcheck.version import __version__

logger = logging.getLogger(__name__)


def _print_status(rc: int, start_time: float):
    if rc == RC_OK:
        status = format_green("[OK]")
    elif rc == RC_INTERRUPTED:
        status = format_red("[INTERRUPTED]")
    elif rc in (RC_FAILED, RC_INVALID_INPUT, RC_MISSING_ARTIFACT):
        status = format_red("[FAILED]")
    else:
        return

    total_seconds = round(time.time() - start_time, 2)
    output(f"{status} Elapsed time: {format_cyan(f'{total_seconds}s')}")


def _print_report(title: str, report: EvalReport):
    output(
        tabulate(
            [
                ["Threshold", format_cyan(f"{report.threshold:.4f}")],
                ["Accuracy", format_cyan(f"{report.accuracy:.4f}")],
                ["F1", format_cyan(f"{report.f1:.4f}")],
            ],
            headers=(title, ""),
            tablefmt="pretty",
            colalign=("left", "right"),
        )
    )
    output(
        tabulate(
            [
                [count, bucket.count, f"{bucket.accuracy:.4f}"]
                for count, bucket in report.per_claim_count.items()
            ],
            headers=("Claims", "Statements", "Accuracy"),
            tablefmt="pretty",
            colalign=("right", "right", "right"),
        )
    )


def _print_stats(stats: KgStats):
    output(
        tabulate(
            [
                [field, format_cyan(str(value))]
                for field, value in stats._asdict().items()
            ],
            headers=("Graph", ""),
            tablefmt="pretty",
            colalign=("left", "right"),
        )
    )


def _print_variants(title: str, reports: Dict[str, EvalReport]):
    output(
        tabulate(
            [
                [name, f"{report.accuracy:.4f}", f"{report.f1:.4f}"]
                for name, report in reports.items()
            ],
            headers=(title, "Accuracy", "F1"),
            tablefmt="pretty",
            colalign=("left", "right", "right"),
        )
    )


def _require(path: str) -> str:
    if not path or not os.path.exists(path):
        raise MissingArtifactException(path)

    return path


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()

    if args.config_path is not None:
        cfg = load_run_config(_require(args.config_path), cfg)

    if args.seed is not None:
        cfg = cfg._replace(seed=args.seed)

    if args.out_dir is not None:
        cfg = cfg._replace(out_dir=args.out_dir)

    if args.kg_path is not None:
        cfg = cfg._replace(kg_path=args.kg_path)

    cfg = override_run_config(cfg, args.overrides)
    validate_run_config(cfg)

    return cfg


def _corpus_dir(cfg: RunConfig) -> str:
    return cfg.corpus_dir or cfg.out_dir


def _embeddings_path(cfg: RunConfig) -> str:
    return cfg.embeddings_path or os.path.join(cfg.out_dir, EMBEDDINGS_FILE)


def _checkpoint_path(cfg: RunConfig) -> str:
    return cfg.checkpoint_path or os.path.join(cfg.out_dir, CHECKPOINT_FILE)


def _prepare_output(cfg: RunConfig) -> None:
    os.makedirs(cfg.out_dir, exist_ok=True)
    write_json(os.path.join(cfg.out_dir, CONFIG_ECHO_FILE), cfg._asdict())


def _load_graph(cfg: RunConfig) -> KnowledgeGraph:
    return load_triples(_require(cfg.kg_path))


def _load_splits(kg: KnowledgeGraph, cfg: RunConfig) -> CorpusSplits:
    paths = [
        _require(os.path.join(_corpus_dir(cfg), name))
        for name in (TRAIN_FILE, VALID_FILE, TEST_FILE)
    ]

    return CorpusSplits(*(load_corpus(kg, path) for path in paths))


def _load_pretrained(
    kg: KnowledgeGraph, cfg: RunConfig
) -> Tuple[EmbeddingTable, Optional[ClaimEncoder]]:
    table, encoder = load_embeddings(_require(_embeddings_path(cfg)), kg)

    if table.d != cfg.dim:
        raise ConfigException(
            f"Embeddings have dimension {table.d} but dim is {cfg.dim}"
        )

    return table, encoder


def _execute_kg_stats_command(args: argparse.Namespace) -> int:
    stats = kg_stats(load_triples(_require(args.kg_path)))

    if args.out_dir is not None:
        os.makedirs(args.out_dir, exist_ok=True)
        write_json(os.path.join(args.out_dir, STATS_FILE), stats._asdict())

    _print_stats(stats)
    output_json(stats._asdict())

    return RC_OK


def _execute_generate_command(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)

    if cfg.kg_path:
        kg = _load_graph(cfg)
    else:
        kg = make_synthetic_kg(seed=cfg.seed)

    _prepare_output(cfg)

    if not cfg.kg_path:
        save_triples(kg, os.path.join(cfg.out_dir, SYNTHETIC_KG_FILE))

    with create_progress_bar(STEP_GENERATE_TEXT, cfg.count, "stmt") as on_progress:
        statements = generate_corpus(
            kg,
            walk_config(cfg),
            cfg.count,
            cfg.neg_fraction,
            cfg.seed,
            cfg.corruptions,
            on_progress,
        )

    splits = split_corpus(
        statements,
        (cfg.split_train, cfg.split_valid, cfg.split_test),
        np.random.default_rng(cfg.seed),
    )
    save_corpus(kg, statements, os.path.join(cfg.out_dir, CORPUS_FILE))

    for name, split in zip((TRAIN_FILE, VALID_FILE, TEST_FILE), splits):
        save_corpus(kg, split, os.path.join(cfg.out_dir, name))

    report = {
        name: corpus_stats(split)._asdict()
        for name, split in zip(("all",) + CorpusSplits._fields, (statements,) + splits)
    }
    output(
        tabulate(
            [
                [
                    name,
                    stats["statements"],
                    stats["negatives"],
                    f"{stats['avg_claims']:.2f}",
                    stats["max_claims"],
                ]
                for name, stats in report.items()
            ],
            headers=("Split", "Statements", "Negatives", "Avg Claims", "Max Claims"),
            tablefmt="pretty",
        )
    )
    output_json(report)

    return RC_OK


def _execute_pretrain_command(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    kg = _load_graph(cfg)
    _prepare_output(cfg)
    pretrain_cfg = pretrain_config(cfg)

    with create_progress_bar(
        STEP_PRETRAIN_TEXT, pretrain_cfg.epochs, "epoch"
    ) as on_progress:
        table, losses = pretrain_embeddings(kg, pretrain_cfg, cfg.dim, on_progress)

    encoder = None

    if cfg.encoder_pretrain:
        with create_progress_bar(
            STEP_ENCODER_TEXT, pretrain_cfg.epochs, "epoch"
        ) as on_progress:
            encoder, _ = pretrain_claim_encoder(kg, table, pretrain_cfg, on_progress)

    negatives = sample_negatives(kg, kg.triples, np.random.default_rng(cfg.seed))
    auc = triple_auc(
        lambda batch: distmult_score(*table.lookup(batch)), kg.triples, negatives
    )
    save_embeddings(table, kg, _embeddings_path(cfg), encoder)
    report = {
        "auc": auc,
        "final_loss": losses[-1] if losses else None,
        "encoder": encoder is not None,
        "path": _embeddings_path(cfg),
    }
    output(
        tabulate(
            [
                ["Final Loss", format_cyan(str(report["final_loss"]))],
                ["Triple AUC", format_cyan(f"{auc:.4f}")],
            ],
            headers=("Pretraining", ""),
            tablefmt="pretty",
            colalign=("left", "right"),
        )
    )
    output_json(report)

    return RC_OK


def _execute_train_command(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    kg = _load_graph(cfg)
    splits = _load_splits(kg, cfg)
    table, encoder = _load_pretrained(kg, cfg)
    _prepare_output(cfg)
    run_cfg = train_config(cfg)
    model = build_model(kg, table, encoder if cfg.encoder_pretrain else None, run_cfg)

    try:
        rc = RC_OK

        with create_progress_bar(
            STEP_TRAIN_TEXT, run_cfg.epochs, "epoch"
        ) as on_progress:
            model, log = train(splits, model, run_cfg, on_progress)
    except KeyboardInterruptWithDataException as exception:
        rc = RC_INTERRUPTED
        model, log = exception.data

    threshold = calibrate(model, splits.valid, cfg.threshold_fallback)
    save_checkpoint(
        model,
        _checkpoint_path(cfg),
        loss_config(run_cfg),
        threshold,
        table.fingerprint(),
    )
    save_training_log(log, os.path.join(cfg.out_dir, TRAIN_LOG_FILE))

    if rc != RC_OK:
        return rc

    report = evaluate(splits.test, model, threshold, cfg.f1_positive)
    write_json(os.path.join(cfg.out_dir, REPORT_FILE), report_to_dict(report))
    _print_report("Test", report)
    output_json(report_to_dict(report))

    return RC_OK


def _execute_eval_command(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    kg = _load_graph(cfg)
    model, _, threshold = load_checkpoint(_require(_checkpoint_path(cfg)), kg)
    splits = _load_splits(kg, cfg)
    _prepare_output(cfg)

    if threshold is None:
        threshold = cfg.threshold_fallback

    report = evaluate(splits.test, model, threshold, cfg.f1_positive)
    write_json(os.path.join(cfg.out_dir, REPORT_FILE), report_to_dict(report))
    _print_report("Test", report)
    output_json(report_to_dict(report))

    return RC_OK


def _execute_ablate_command(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    kg = _load_graph(cfg)
    splits = _load_splits(kg, cfg)
    table, encoder = _load_pretrained(kg, cfg)
    _prepare_output(cfg)
    reports = run_ablation(
        splits,
        kg,
        table,
        encoder if cfg.encoder_pretrain else None,
        train_config(cfg),
        args.variants or ABLATIONS,
        cfg.threshold_fallback,
    )
    document = {name: report_to_dict(report) for name, report in reports.items()}
    write_json(os.path.join(cfg.out_dir, ABLATION_FILE), document)
    _print_variants("Variant", reports)
    output_json(document)

    return RC_OK


def _execute_sweep_command(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    kg = _load_graph(cfg)
    splits = _load_splits(kg, cfg)
    table, encoder = _load_pretrained(kg, cfg)
    _prepare_output(cfg)
    rows = sweep(
        splits,
        kg,
        table,
        encoder if cfg.encoder_pretrain else None,
        train_config(cfg),
        args.parameter,
        args.values,
        cfg.threshold_fallback,
    )
    write_json(os.path.join(cfg.out_dir, SWEEP_FILE), rows)
    output(
        tabulate(
            [
                [row["value"], f"{row['accuracy']:.4f}", f"{row['hsic']:.6f}"]
                for row in rows
            ],
            headers=(args.parameter, "Accuracy", "HSIC"),
            tablefmt="pretty",
        )
    )
    output_json(rows)

    return RC_OK


def _execute_compare_command(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    kg = _load_graph(cfg)
    splits = _load_splits(kg, cfg)
    table, encoder = _load_pretrained(kg, cfg)
    _prepare_output(cfg)
    _, verifier = fit_and_evaluate(
        splits,
        kg,
        table,
        encoder if cfg.encoder_pretrain else None,
        train_config(cfg),
        cfg.threshold_fallback,
    )
    baseline_cfg = baseline_config(cfg)

    with create_progress_bar(
        STEP_BASELINE_TEXT, baseline_cfg.epochs, "epoch"
    ) as on_progress:
        baseline = baseline_min_transe(
            splits, kg, baseline_cfg, cfg.dim, cfg.threshold_fallback, on_progress
        )

    document = {
        "verifier": report_to_dict(verifier),
        "baseline": report_to_dict(baseline),
        "buckets": compare_buckets(verifier, baseline),
    }
    write_json(os.path.join(cfg.out_dir, COMPARE_FILE), document)
    _print_variants("Model", {"verifier": verifier, "baseline": baseline})
    output_json(document)

    return RC_OK


def _read_statement(text: str) -> dict:
    if os.path.isfile(text):
        record = read_json(text)
    else:
        record = json.loads(text)

    if isinstance(record, list):
        record = {"claims": record}

    if not isinstance(record, dict) or not record.get("claims"):
        raise StatementFormatException("A statement needs a non-empty claims list")

    return record


def _execute_predict_command(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    kg = _load_graph(cfg)
    model, _, threshold = load_checkpoint(_require(args.checkpoint), kg)
    statement = parse_statement(kg, _read_statement(args.statement))

    if threshold is None:
        threshold = cfg.threshold_fallback

    prediction = predict_statement(model, statement, threshold)
    document = prediction._replace(
        claims=[claim._asdict() for claim in prediction.claims]
    )._asdict()
    output(
        tabulate(
            [
                [" ".join(claim.triple), f"{claim.score:.4f}"]
                for claim in prediction.claims
            ],
            headers=("Claim", "Score"),
            tablefmt="pretty",
            colalign=("left", "right"),
        )
    )
    output_json(document)

    return RC_OK


_COMMANDS = {
    KG_STATS_COMMAND: _execute_kg_stats_command,
    GENERATE_COMMAND: _execute_generate_command,
    PRETRAIN_COMMAND: _execute_pretrain_command,
    TRAIN_COMMAND: _execute_train_command,
    EVAL_COMMAND: _execute_eval_command,
    ABLATE_COMMAND: _execute_ablate_command,
    SWEEP_COMMAND: _execute_sweep_command,
    COMPARE_COMMAND: _execute_compare_command,
    PREDICT_COMMAND: _execute_predict_command,
}


def _execute_command(args: argparse.Namespace) -> int:
    try:
        return _COMMANDS[args.command](args)
    except MissingArtifactException as exception:
        output_error(exception)
        return RC_MISSING_ARTIFACT
    except (DivergenceException, NonFiniteException) as exception:
        output_error(exception)
        return RC_FAILED
    except ConfigException as exception:
        output_error(exception)
        return RC_INVALID_ARGUMENT
    except (ClaimCheckException, ValueError, KeyError, TypeError) as exception:
        output_error(exception)
        return RC_INVALID_INPUT
    except KeyboardInterrupt:
        return RC_INTERRUPTED
    except OSError as exception:
        output_error(exception)
        return RC_FAILED


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parse_args(argv)

    if args is None:
        return RC_INVALID_ARGUMENT

    if args.show_version:
        output(__version__)
        return RC_OK

    Config.silent = args.silent
    Config.verbose = args.verbose
    logging.basicConfig(
        level=logging.INFO if Config.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )

    start_time = time.time()
    rc = _execute_command(args)
    _print_status(rc, start_time)

    return rc


if __name__ == "__main__":
    raise SystemExit(main())
