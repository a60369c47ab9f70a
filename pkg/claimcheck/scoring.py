import gzip
import hashlib
import json
import logging
import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F
from sklearn.metrics import roc_auc_score
from torch import Tensor, nn

from claimcheck.constants import EMBEDDINGS_VERSION
from claimcheck.exceptions import (CheckpointException,
                                   DimensionMismatchException,
                                   EmptyGraphException, NonFiniteException)
from claimcheck.kgstore import KnowledgeGraph, corrupt_triple
from claimcheck.optim import AdaGrad
from claimcheck.tools import delay_keyboard_interrupt
from claimcheck.types import ClaimEncoderParams, PretrainConfig, Triple

logger = logging.getLogger(__name__)

DTYPE = torch.float64


def _check_dimensions(*vectors: Tensor) -> None:
    dimension = vectors[0].shape[-1]

    if any(vector.shape[-1] != dimension for vector in vectors):
        raise DimensionMismatchException(
            f"Expected equal dimensions, got {[tuple(v.shape) for v in vectors]}"
        )


def init_uniform(shape: Tuple[int, ...], d: int, generator: torch.Generator) -> Tensor:
    """
    Draws values uniformly in [-6 / sqrt(d), 6 / sqrt(d)].
    """
    bound = 6.0 / math.sqrt(d)
    return (torch.rand(shape, generator=generator, dtype=DTYPE) * 2 - 1) * bound


class EmbeddingTable(nn.Module):
    def __init__(
        self, entity_count: int, relation_count: int, d: int, generator: torch.Generator
    ) -> None:
        super().__init__()
        self.entity_vecs = nn.Parameter(init_uniform((entity_count, d), d, generator))
        self.relation_vecs = nn.Parameter(
            init_uniform((relation_count, d), d, generator)
        )

    @property
    def d(self) -> int:
        return self.entity_vecs.shape[1]

    def lookup(self, triples: Sequence[Triple]) -> Tuple[Tensor, Tensor, Tensor]:
        ids = torch.tensor(triples, dtype=torch.long).view(-1, 3)
        return (
            self.entity_vecs[ids[:, 0]],
            self.relation_vecs[ids[:, 1]],
            self.entity_vecs[ids[:, 2]],
        )

    def fingerprint(self) -> str:
        table_digest = hashlib.md5()
        table_digest.update(self.entity_vecs.detach().numpy().tobytes())
        table_digest.update(self.relation_vecs.detach().numpy().tobytes())
        return table_digest.hexdigest()


class ClaimEncoder(nn.Module):
    def __init__(self, d: int, generator: torch.Generator) -> None:
        super().__init__()
        self.filter = nn.Parameter(init_uniform((3,), d, generator))
        self.bias = nn.Parameter(torch.zeros((), dtype=DTYPE))

    def params(self) -> ClaimEncoderParams:
        return ClaimEncoderParams(self.filter, self.bias)


def distmult_score(h: Tensor, r: Tensor, t: Tensor) -> Tensor:
    """
    The trilinear DistMult plausibility sum_j h_j * r_j * t_j, taken over the last
    dimension so batches of triples score at once.
    """
    _check_dimensions(h, r, t)
    return (h * r * t).sum(-1)


def encode_claim(h: Tensor, r: Tensor, t: Tensor, p: ClaimEncoderParams) -> Tensor:
    """
    Convolves the d x 3 matrix [h; r; t] with a 1 x 3 filter:
    v(j) = ReLU(w1 * h_j + w2 * r_j + w3 * t_j + b).
    """
    _check_dimensions(h, r, t)
    return torch.relu(p.filter[0] * h + p.filter[1] * r + p.filter[2] * t + p.bias)


def logistic_loss(scores: Tensor, labels: Tensor) -> Tensor:
    """
    Sum of log(1 + exp(-y * s)) with labels given as 0/1 and mapped to -1/+1.
    """
    signs = labels.to(scores.dtype) * 2 - 1
    return F.softplus(-signs * scores).sum()


def _sample_batches(
    kg: KnowledgeGraph,
    triples: Sequence[Triple],
    batch_size: int,
    negatives: int,
    rng: np.random.Generator,
) -> List[Tuple[List[Triple], List[int]]]:
    batches = []
    order = rng.permutation(len(triples))

    for start in range(0, len(order), batch_size):
        batch, labels = [], []

        for index in order[start : start + batch_size]:
            positive = triples[int(index)]
            batch.append(positive)
            labels.append(1)

            for _ in range(negatives):
                batch.append(corrupt_triple(kg, positive, rng))
                labels.append(0)

        batches.append((batch, labels))

    return batches


def _fit(
    kg: KnowledgeGraph,
    modules: Sequence[nn.Module],
    score: Callable[[List[Triple]], Tensor],
    cfg: PretrainConfig,
    rng: np.random.Generator,
    description: str,
    on_progress: Optional[Callable[..., None]],
) -> List[float]:
    if kg.triple_count == 0:
        raise EmptyGraphException("Cannot pretrain on an empty graph")

    optimizer = AdaGrad(modules, cfg.learning_rate)
    triples = kg.triples
    losses = []

    for epoch in range(cfg.epochs):
        total, count = 0.0, 0

        for batch, labels in _sample_batches(
            kg, triples, cfg.batch_size, cfg.negatives, rng
        ):
            optimizer.zero_grad()
            loss = logistic_loss(score(batch), torch.tensor(labels)) / len(batch)
            loss = loss + cfg.l2_coeff * sum(
                (param ** 2).sum()
                for module in modules
                for param in module.parameters()
                if param.requires_grad
            )

            if not torch.isfinite(loss):
                raise NonFiniteException(f"{description} loss at epoch {epoch}")

            loss.backward()
            optimizer.step()
            total += loss.item() * len(batch)
            count += len(batch)

        losses.append(total / count)
        logger.debug("%s epoch %d loss %.6f", description, epoch, losses[-1])
        on_progress(loss=f"{losses[-1]:.4f}") if on_progress is not None else None

    return losses


def pretrain_embeddings(
    kg: KnowledgeGraph,
    cfg: PretrainConfig,
    d: int = 18,
    on_progress: Optional[Callable[..., None]] = None,
) -> Tuple[EmbeddingTable, List[float]]:
    """
    Pretrains entity and relation vectors with DistMult under the logistic loss, one
    batch of observed triples (y = +1) plus their corruptions (y = -1) at a time, with
    an L2 penalty on the whole table.

    Parameters
    ----------
    kg : KnowledgeGraph
        The graph supplying positive triples.

    cfg : PretrainConfig
        Epochs, learning rate, batch size, negatives per positive, L2 and seed.

    d : int (default=18)
        Embedding dimension.

    on_progress : Optional[Callable[..., None]]
        Called after every epoch.

    Returns
    -------
    result : Tuple[EmbeddingTable, List[float]]
        The trained table and the mean loss of every epoch.
    """
    generator = torch.Generator().manual_seed(cfg.seed)
    table = EmbeddingTable(kg.entity_count, kg.relation_count, d, generator)

    def score(batch: List[Triple]) -> Tensor:
        return distmult_score(*table.lookup(batch))

    losses = _fit(
        kg,
        [table],
        score,
        cfg,
        np.random.default_rng(cfg.seed),
        "DistMult pretraining",
        on_progress,
    )

    return table, losses


def pretrain_claim_encoder(
    kg: KnowledgeGraph,
    table: EmbeddingTable,
    cfg: PretrainConfig,
    on_progress: Optional[Callable[..., None]] = None,
) -> Tuple[ClaimEncoder, List[float]]:
    """
    Pretrains the claim encoder as a convolutional triple scorer: a triple scores
    w . encode_claim(h, r, t) with an auxiliary weight vector w that is discarded
    afterwards. Embeddings stay frozen.
    """
    generator = torch.Generator().manual_seed(cfg.seed + 1)
    encoder = ClaimEncoder(table.d, generator)
    weight = nn.Linear(table.d, 1, bias=False).to(DTYPE)

    with torch.no_grad():
        weight.weight.copy_(init_uniform((1, table.d), table.d, generator))

    def score(batch: List[Triple]) -> Tensor:
        with torch.no_grad():
            h, r, t = table.lookup(batch)

        return weight(encode_claim(h, r, t, encoder.params())).squeeze(-1)

    losses = _fit(
        kg,
        [encoder, weight],
        score,
        cfg,
        np.random.default_rng(cfg.seed + 1),
        "Claim encoder pretraining",
        on_progress,
    )

    return encoder, losses


def sample_negatives(
    kg: KnowledgeGraph, triples: Sequence[Triple], rng: np.random.Generator
) -> List[Triple]:
    return [corrupt_triple(kg, triple, rng) for triple in triples]


def triple_auc(
    score: Callable[[List[Triple]], Tensor],
    positives: Sequence[Triple],
    negatives: Sequence[Triple],
) -> float:
    """
    Area under the ROC curve separating true triples from corrupted ones.
    """
    with torch.no_grad():
        scores = score(list(positives) + list(negatives)).numpy()

    labels = [1] * len(positives) + [0] * len(negatives)

    return float(roc_auc_score(labels, scores))


def save_embeddings(
    table: EmbeddingTable,
    kg: KnowledgeGraph,
    path: str,
    encoder: Optional[ClaimEncoder] = None,
) -> None:
    """
    Writes the table as gzip-compressed JSON holding the dimension, the vocabulary
    sizes and hash, and both matrices flattened in row-major order.
    """
    document = {
        "version": EMBEDDINGS_VERSION,
        "d": table.d,
        "entities": kg.entity_count,
        "relations": kg.relation_count,
        "vocabulary_hash": kg.vocabulary_hash,
        "entity_vecs": table.entity_vecs.detach().reshape(-1).tolist(),
        "relation_vecs": table.relation_vecs.detach().reshape(-1).tolist(),
    }

    if encoder is not None:
        document["encoder"] = {
            "filter": encoder.filter.detach().tolist(),
            "bias": encoder.bias.item(),
        }

    with delay_keyboard_interrupt():
        with open(path, "wb") as file:
            file.write(gzip.compress(json.dumps(document).encode("utf8")))


def load_embeddings(
    path: str, kg: KnowledgeGraph
) -> Tuple[EmbeddingTable, Optional[ClaimEncoder]]:
    """
    Reads a table written by save_embeddings and checks it against the graph's
    vocabularies.

    Returns
    -------
    result : Tuple[EmbeddingTable, Optional[ClaimEncoder]]
        The table and the pretrained claim encoder when the file carries one.
    """
    try:
        with open(path, "rb") as file:
            document = json.loads(gzip.decompress(file.read()).decode("utf8"))
    except (OSError, EOFError, UnicodeDecodeError, json.JSONDecodeError) as exception:
        raise CheckpointException(f"Cannot read embeddings {path}: {exception}")

    if document.get("version") != EMBEDDINGS_VERSION:
        raise CheckpointException(f"Unsupported embeddings version in {path}")

    if document["vocabulary_hash"] != kg.vocabulary_hash:
        raise CheckpointException(f"Embeddings {path} were trained on another graph")

    d = document["d"]
    generator = torch.Generator().manual_seed(0)
    table = EmbeddingTable(document["entities"], document["relations"], d, generator)

    with torch.no_grad():
        table.entity_vecs.copy_(
            torch.tensor(document["entity_vecs"], dtype=DTYPE).view(-1, d)
        )
        table.relation_vecs.copy_(
            torch.tensor(document["relation_vecs"], dtype=DTYPE).view(-1, d)
        )

    if not (
        torch.isfinite(table.entity_vecs).all()
        and torch.isfinite(table.relation_vecs).all()
    ):
        raise CheckpointException(f"Embeddings {path} hold non-finite values")

    encoder = None

    if "encoder" in document:
        encoder = ClaimEncoder(d, generator)

        with torch.no_grad():
            encoder.filter.copy_(
                torch.tensor(document["encoder"]["filter"], dtype=DTYPE)
            )
            encoder.bias.fill_(document["encoder"]["bias"])

    return table, encoder
