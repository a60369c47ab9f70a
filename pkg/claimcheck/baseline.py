import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import torch
from torch import Tensor, nn

from claimcheck.constants import AGGREGATION_MEAN, AGGREGATION_MIN
from claimcheck.exceptions import (CalibrationException, EmptyGraphException,
                                   EmptySplitException, NonFiniteException)
from claimcheck.kgstore import KnowledgeGraph, corrupt_triple
from claimcheck.optim import AdaGrad
from claimcheck.scoring import EmbeddingTable
from claimcheck.tools import make_generator
from claimcheck.trainer import calibrate_threshold, report_from_scores
from claimcheck.types import (BaselineConfig, CorpusSplits, EvalReport,
                              Statement, Triple)

logger = logging.getLogger(__name__)


def transe_score(h: Tensor, r: Tensor, t: Tensor) -> Tensor:
    """
    TransE plausibility -||h + r - t||, higher for more plausible triples.
    """
    return -torch.linalg.vector_norm(h + r - t, dim=-1)


class TransE(nn.Module):
    def __init__(self, kg: KnowledgeGraph, d: int, generator: torch.Generator) -> None:
        super().__init__()
        self.table = EmbeddingTable(kg.entity_count, kg.relation_count, d, generator)
        self.normalize_entities()

    def normalize_entities(self) -> None:
        with torch.no_grad():
            vecs = self.table.entity_vecs
            norms = torch.linalg.vector_norm(vecs, dim=1, keepdim=True)
            vecs.div_(norms.clamp(min=1e-12))

    def forward(self, triples: Sequence[Triple]) -> Tensor:
        return transe_score(*self.table.lookup(triples))


def train_transe(
    kg: KnowledgeGraph,
    cfg: BaselineConfig,
    d: int = 18,
    on_progress: Optional[Callable[..., None]] = None,
) -> Tuple[TransE, List[float]]:
    """
    Trains TransE with the margin ranking loss max(0, margin - s(pos) + s(neg)), one
    corrupted triple per observed one, and renormalizes entity vectors to unit length
    after every step.

    Parameters
    ----------
    kg : KnowledgeGraph
        The graph supplying positive triples.

    cfg : BaselineConfig
        Epochs, learning rate, batch size, margin and seed.

    d : int (default=18)
        Embedding dimension.

    on_progress : Optional[Callable[..., None]]
        Called after every epoch.

    Returns
    -------
    result : Tuple[TransE, List[float]]
        The trained model and the mean loss of every epoch.
    """
    if kg.triple_count == 0:
        raise EmptyGraphException("Cannot train TransE on an empty graph")

    model = TransE(kg, d, make_generator(cfg.seed))
    optimizer = AdaGrad([model], cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)
    triples = kg.triples
    losses = []

    for epoch in range(cfg.epochs):
        order = rng.permutation(len(triples))
        total = 0.0

        for start in range(0, len(order), cfg.batch_size):
            indices = order[start : start + cfg.batch_size]
            positives = [triples[int(index)] for index in indices]
            negatives = [corrupt_triple(kg, triple, rng) for triple in positives]
            optimizer.zero_grad()
            loss = torch.relu(cfg.margin - model(positives) + model(negatives)).mean()

            if not torch.isfinite(loss):
                raise NonFiniteException(f"TransE loss at epoch {epoch}")

            loss.backward()
            optimizer.step()
            model.normalize_entities()
            total += loss.item() * len(positives)

        losses.append(total / len(order))
        logger.debug("TransE epoch %d loss %.6f", epoch, losses[-1])

        if on_progress is not None:
            on_progress(loss=f"{losses[-1]:.4f}")

    return model, losses


def statement_scores(
    model: TransE, statements: Sequence[Statement], aggregation: str = AGGREGATION_MIN
) -> np.ndarray:
    """
    Scores every claim on its own and aggregates the claim scores of a statement by
    their minimum or mean.
    """
    if aggregation not in (AGGREGATION_MIN, AGGREGATION_MEAN):
        raise ValueError(f"Unknown aggregation: {aggregation}")

    scores = []

    with torch.no_grad():
        for statement in statements:
            claim_scores = model(statement.claims)
            aggregated = (
                claim_scores.min()
                if aggregation == AGGREGATION_MIN
                else claim_scores.mean()
            )
            scores.append(aggregated.item())

    return np.array(scores)


def baseline_min_transe(
    splits: CorpusSplits,
    kg: KnowledgeGraph,
    cfg: BaselineConfig,
    d: int = 18,
    fallback: float = 0.5,
    on_progress: Optional[Callable[..., None]] = None,
) -> EvalReport:
    """
    Trains TransE on the graph, calibrates a threshold on the validation split with
    the aggregated claim scores and reports on the test split.
    """
    if not splits.test:
        raise EmptySplitException("Cannot evaluate an empty split")

    model, _ = train_transe(kg, cfg, d, on_progress)

    try:
        threshold = calibrate_threshold(
            statement_scores(model, splits.valid, cfg.aggregation),
            [statement.label for statement in splits.valid],
        )
    except CalibrationException as exception:
        logger.warning("%s, using threshold %.2f", exception, fallback)
        threshold = fallback

    return report_from_scores(
        statement_scores(model, splits.test, cfg.aggregation),
        [statement.label for statement in splits.test],
        [len(statement.claims) for statement in splits.test],
        threshold,
        cfg.f1_positive,
    )
