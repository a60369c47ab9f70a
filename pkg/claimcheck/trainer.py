import copy
import json
import logging
import math
import time
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
from sklearn.metrics import accuracy_score, f1_score

from claimcheck.constants import (ABLATION_FULL, DIVERGENCE_LIMIT,
                                  GRAPH_VARIANTS, SWEEP_PARAMETERS)
from claimcheck.config import loss_config
from claimcheck.exceptions import (CalibrationException, DivergenceException,
                                   EmptySplitException,
                                   KeyboardInterruptWithDataException)
from claimcheck.kgstore import KnowledgeGraph
from claimcheck.model import StatementVerifier, mean_pairwise_hsic, total_loss
from claimcheck.optim import AdaGrad
from claimcheck.scoring import ClaimEncoder, EmbeddingTable
from claimcheck.tools import delay_keyboard_interrupt, make_generator
from claimcheck.types import (BucketReport, ClaimVerdict, CorpusSplits,
                              EvalReport, Prediction, Statement, TrainConfig,
                              TrainingRecord)

logger = logging.getLogger(__name__)


def build_model(
    kg: KnowledgeGraph,
    table: EmbeddingTable,
    encoder: Optional[ClaimEncoder],
    cfg: TrainConfig,
) -> StatementVerifier:
    return StatementVerifier(kg, table, encoder, cfg.options, make_generator(cfg.seed))


def predict_scores(
    model: StatementVerifier, statements: Sequence[Statement]
) -> np.ndarray:
    with torch.no_grad():
        return np.array([model(statement)[0].item() for statement in statements])


def predict_statement(
    model: StatementVerifier, statement: Statement, threshold: float
) -> Prediction:
    """
    Scores one statement and applies the decision rule s_y >= threshold.
    """
    with torch.no_grad():
        s_y, trace = model(statement)

    claims = [
        ClaimVerdict(list(model.kg.decode(claim)), score)
        for claim, score in zip(statement.claims, trace.claim_scores.tolist())
    ]

    return Prediction(
        claims, trace.s_m.item(), s_y.item(), threshold, s_y.item() >= threshold
    )


def calibrate_threshold(scores: Sequence[float], labels: Sequence[int]) -> float:
    """
    Picks the decision threshold maximizing accuracy of the rule score >= threshold.
    Candidates are the lowest score (everything true), the midpoints between
    consecutive distinct scores, and the value just above the highest score
    (everything false). Ties go to the lowest threshold.

    Parameters
    ----------
    scores : Sequence[float]
        Statement scores of the validation split.

    labels : Sequence[int]
        Gold 0/1 labels, both classes present.

    Returns
    -------
    result : float
        The calibrated threshold.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)

    if scores.shape != labels.shape:
        raise CalibrationException("Scores and labels differ in length")

    if len(np.unique(labels)) < 2:
        raise CalibrationException("Calibration needs both true and false statements")

    distinct = np.unique(scores)
    candidates = np.concatenate(
        [
            distinct[:1],
            (distinct[:-1] + distinct[1:]) / 2,
            [np.nextafter(distinct[-1], np.inf)],
        ]
    )
    accuracies = [np.mean((scores >= threshold) == labels) for threshold in candidates]

    return float(candidates[int(np.argmax(accuracies))])


def report_from_scores(
    scores: Sequence[float],
    labels: Sequence[int],
    claim_counts: Sequence[int],
    threshold: float,
    f1_positive: int = 1,
) -> EvalReport:
    """
    Scores predictions score >= threshold against gold labels, overall and per claim
    count bucket.
    """
    if len(scores) == 0:
        raise EmptySplitException("Cannot evaluate an empty split")

    labels = np.asarray(labels, dtype=np.int64)
    predictions = (np.asarray(scores) >= threshold).astype(np.int64)
    claim_counts = np.asarray(claim_counts, dtype=np.int64)
    buckets = {}

    for count in sorted(set(claim_counts.tolist())):
        selection = claim_counts == count
        buckets[int(count)] = BucketReport(
            float(accuracy_score(labels[selection], predictions[selection])),
            int(selection.sum()),
        )

    return EvalReport(
        float(threshold),
        float(accuracy_score(labels, predictions)),
        float(f1_score(labels, predictions, pos_label=f1_positive, zero_division=0)),
        buckets,
    )


def evaluate(
    statements: Sequence[Statement],
    model: StatementVerifier,
    threshold: float,
    f1_positive: int = 1,
) -> EvalReport:
    if len(statements) == 0:
        raise EmptySplitException("Cannot evaluate an empty split")

    return report_from_scores(
        predict_scores(model, statements),
        [statement.label for statement in statements],
        [len(statement.claims) for statement in statements],
        threshold,
        f1_positive,
    )


def calibrate(
    model: StatementVerifier, statements: Sequence[Statement], fallback: float = 0.5
) -> float:
    """
    Calibrates the threshold on a split, falling back to a fixed value when the split
    holds a single class.
    """
    try:
        return calibrate_threshold(
            predict_scores(model, statements),
            [statement.label for statement in statements],
        )
    except CalibrationException as exception:
        logger.warning("%s, using threshold %.2f", exception, fallback)
        return fallback


def report_to_dict(report: EvalReport) -> dict:
    return {
        "threshold": report.threshold,
        "accuracy": report.accuracy,
        "f1": report.f1,
        "per_claim_count": {
            str(count): {"accuracy": bucket.accuracy, "count": bucket.count}
            for count, bucket in report.per_claim_count.items()
        },
    }


def report_from_dict(document: dict) -> EvalReport:
    return EvalReport(
        float(document["threshold"]),
        float(document["accuracy"]),
        float(document["f1"]),
        {
            int(count): BucketReport(float(bucket["accuracy"]), int(bucket["count"]))
            for count, bucket in document["per_claim_count"].items()
        },
    )


def _validation_accuracy(
    model: StatementVerifier, statements: Sequence[Statement], fallback: float
) -> Optional[float]:
    if not statements:
        return None

    scores = predict_scores(model, statements)
    labels = [statement.label for statement in statements]

    try:
        threshold = calibrate_threshold(scores, labels)
    except CalibrationException:
        threshold = fallback

    return float(accuracy_score(labels, (scores >= threshold).astype(np.int64)))


def train(
    splits: CorpusSplits,
    model: StatementVerifier,
    cfg: TrainConfig,
    on_progress: Optional[Callable[..., None]] = None,
) -> Tuple[StatementVerifier, List[TrainingRecord]]:
    """
    Trains the verifier end to end with AdaGrad over shuffled mini-batches of the
    training split. After every epoch the validation accuracy at the calibrated
    threshold is measured; the parameters of the best epoch are restored at the end
    and training stops once patience epochs pass without improvement.

    Parameters
    ----------
    splits : CorpusSplits
        Train, validation and test statements.

    model : StatementVerifier
        The model to train in place.

    cfg : TrainConfig
        Optimization settings. A patience of 0 disables early stopping.

    on_progress : Optional[Callable[..., None]]
        Called after every epoch.

    Returns
    -------
    result : Tuple[StatementVerifier, List[TrainingRecord]]
        The trained model and one log record per epoch.
    """
    if not splits.train:
        raise EmptySplitException("The training split is empty")

    loss_cfg = loss_config(cfg)
    optimizer = AdaGrad([model], cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)
    log: List[TrainingRecord] = []
    best_accuracy, best_state, stale_epochs = -math.inf, None, 0

    try:
        for epoch in range(cfg.epochs):
            start_time = time.perf_counter()
            order = rng.permutation(len(splits.train))
            total = 0.0

            for start in range(0, len(order), cfg.batch_size):
                indices = order[start : start + cfg.batch_size]
                batch = [splits.train[int(index)] for index in indices]
                optimizer.zero_grad()
                loss, _ = total_loss(batch, model, loss_cfg, cfg.l2_coeff)

                if not math.isfinite(loss.item()) or loss.item() > DIVERGENCE_LIMIT:
                    raise DivergenceException(
                        f"Loss {loss.item():.4g} at epoch {epoch} exceeds the limit"
                    )

                loss.backward()
                optimizer.step()
                total += loss.item() * len(batch)

            valid_accuracy = _validation_accuracy(
                model, splits.valid, cfg.threshold_fallback
            )
            log.append(
                TrainingRecord(
                    epoch,
                    total / len(order),
                    valid_accuracy,
                    int((time.perf_counter() - start_time) * 1000),
                )
            )
            logger.info(
                "Epoch %d loss %.6f valid accuracy %s",
                epoch,
                log[-1].mean_loss,
                valid_accuracy,
            )
            if on_progress is not None:
                on_progress(loss=f"{log[-1].mean_loss:.4f}")

            if valid_accuracy is None:
                continue

            if valid_accuracy > best_accuracy:
                best_accuracy, stale_epochs = valid_accuracy, 0
                best_state = copy.deepcopy(model.state_dict())
            else:
                stale_epochs += 1

                if 0 < cfg.patience <= stale_epochs:
                    logger.info("Stopping early after epoch %d", epoch)
                    break
    except KeyboardInterrupt:
        if best_state is not None:
            model.load_state_dict(best_state)

        raise KeyboardInterruptWithDataException((model, log))

    if best_state is not None:
        model.load_state_dict(best_state)

    return model, log


def save_training_log(log: Sequence[TrainingRecord], path: str) -> None:
    with delay_keyboard_interrupt():
        with open(path, "w", encoding="utf-8", newline="\n") as file:
            for record in log:
                file.write(json.dumps(record._asdict(), sort_keys=True) + "\n")


def fit_and_evaluate(
    splits: CorpusSplits,
    kg: KnowledgeGraph,
    table: EmbeddingTable,
    encoder: Optional[ClaimEncoder],
    cfg: TrainConfig,
    fallback: float = 0.5,
) -> Tuple[StatementVerifier, EvalReport]:
    """
    Builds, trains and calibrates a model, then evaluates it on the test split.
    """
    model = build_model(kg, table, encoder, cfg)
    model, _ = train(splits, model, cfg)
    threshold = calibrate(model, splits.valid, fallback)

    return model, evaluate(splits.test, model, threshold, cfg.f1_positive)


def run_ablation(
    splits: CorpusSplits,
    kg: KnowledgeGraph,
    table: EmbeddingTable,
    encoder: Optional[ClaimEncoder],
    cfg: TrainConfig,
    variants: Sequence[str],
    fallback: float = 0.5,
) -> Dict[str, EvalReport]:
    """
    Trains and evaluates every ablation variant on the same data and seed. The full
    model is always included and comes first.

    Returns
    -------
    result : Dict[str, EvalReport]
        The test report of every variant, by variant name.
    """
    names = [ABLATION_FULL] + [name for name in variants if name != ABLATION_FULL]
    reports = {}

    for name in dict.fromkeys(names):
        variant_cfg = cfg._replace(options=cfg.options._replace(ablation=name))
        _, reports[name] = fit_and_evaluate(
            splits, kg, table, encoder, variant_cfg, fallback
        )
        logger.info("Variant %s accuracy %.4f", name, reports[name].accuracy)

    return reports


def run_graph_variants(
    splits: CorpusSplits,
    kg: KnowledgeGraph,
    table: EmbeddingTable,
    encoder: Optional[ClaimEncoder],
    cfg: TrainConfig,
    variants: Sequence[str] = GRAPH_VARIANTS,
    fallback: float = 0.5,
) -> Dict[str, EvalReport]:
    reports = {}

    for name in variants:
        variant_cfg = cfg._replace(options=cfg.options._replace(graph_variant=name))
        _, reports[name] = fit_and_evaluate(
            splits, kg, table, encoder, variant_cfg, fallback
        )

    return reports


def sweep(
    splits: CorpusSplits,
    kg: KnowledgeGraph,
    table: EmbeddingTable,
    encoder: Optional[ClaimEncoder],
    cfg: TrainConfig,
    parameter: str,
    values: Sequence[float],
    fallback: float = 0.5,
) -> List[dict]:
    """
    Retrains the model once per value of a single parameter (lambda1, lambda2,
    n_heads or k) and records the test metrics and the mean pairwise HSIC of the
    attention heads on the test split.
    """
    if parameter not in SWEEP_PARAMETERS:
        raise ValueError(f"Cannot sweep {parameter}")

    rows = []

    for value in values:
        if parameter in ("n_heads", "k"):
            options = cfg.options._replace(**{parameter: int(value)})
            point_cfg = cfg._replace(options=options)
        else:
            point_cfg = cfg._replace(**{parameter: float(value)})

        model, report = fit_and_evaluate(
            splits, kg, table, encoder, point_cfg, fallback
        )
        rows.append(
            {
                "parameter": parameter,
                "value": value,
                "accuracy": report.accuracy,
                "f1": report.f1,
                "threshold": report.threshold,
                "hsic": mean_pairwise_hsic(model, splits.test),
            }
        )

    return rows


def compare_buckets(verifier: EvalReport, baseline: EvalReport) -> List[dict]:
    """
    Lines up the per claim count accuracies of two reports over the same split.
    """
    rows = []

    for count in sorted(set(verifier.per_claim_count) | set(baseline.per_claim_count)):
        ours = verifier.per_claim_count.get(count)
        theirs = baseline.per_claim_count.get(count)
        rows.append(
            {
                "claims": count,
                "count": (ours or theirs).count,
                "verifier_accuracy": ours.accuracy if ours else None,
                "baseline_accuracy": theirs.accuracy if theirs else None,
                "gap": ours.accuracy - theirs.accuracy if ours and theirs else None,
            }
        )

    return rows
