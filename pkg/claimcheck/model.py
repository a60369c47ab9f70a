import logging
from itertools import combinations
from pickle import UnpicklingError
from typing import Dict, List, Optional, Sequence, Tuple

import torch
import torch.nn.functional as F
from torch import Tensor, nn

from claimcheck.constants import (ABLATION_NO_GSL, ABLATION_NO_GSL_LSL,
                                  ABLATION_NO_LE, ABLATION_NO_LSL,
                                  ATTENTION_ADJ_A, ATTENTION_ADJ_A_HAT,
                                  CHECKPOINT_VERSION, GRAPH_A, GRAPH_A2,
                                  GRAPH_A_PLUS_A2, GRAPH_FULL, NORM_PRINTED,
                                  NORM_SYMMETRIC, SIDE_HEAD, SIDE_TAIL)
from claimcheck.exceptions import (CheckpointException,
                                   DimensionMismatchException,
                                   MissingLabelsException)
from claimcheck.kgstore import KnowledgeGraph
from claimcheck.scoring import (DTYPE, ClaimEncoder, EmbeddingTable,
                                distmult_score, encode_claim, init_uniform,
                                logistic_loss)
from claimcheck.tools import delay_keyboard_interrupt
from claimcheck.types import (ClaimGraph, ContextVectors, EnhancementParams,
                              LossConfig, ModelOptions, Statement, Triple,
                              VerificationTrace)

logger = logging.getLogger(__name__)

MASKED_LOGIT = -1e30


def encode_context(heads: Tensor, relations: Tensor, tails: Tensor) -> ContextVectors:
    """
    Averages the head, relation and tail vectors of a statement's N claims.

    Parameters
    ----------
    heads, relations, tails : Tensor
        N x d matrices, one row per claim.

    Returns
    -------
    result : ContextVectors
        The componentwise means h_c, r_c and t_c.
    """
    if heads.shape[0] == 0:
        raise ValueError("A statement needs at least one claim")

    if not heads.shape == relations.shape == tails.shape:
        raise DimensionMismatchException("Claim component matrices differ in shape")

    return ContextVectors(heads.mean(0), relations.mean(0), tails.mean(0))


def enhance_entities(
    entity_vecs: Tensor,
    ctx: ContextVectors,
    neighbor_relations: Tensor,
    neighbor_tails: Tensor,
    mask: Tensor,
    p: EnhancementParams,
    side: str,
) -> Tensor:
    """
    Batched context-conditioned enhancement of B entities with up to M attribute
    neighbors each. Padding neighbors are excluded through the boolean mask; an entity
    with no neighbors aggregates to the zero vector.

    Parameters
    ----------
    entity_vecs : Tensor
        B x d entity vectors.

    ctx : ContextVectors
        Context of the statement.

    neighbor_relations, neighbor_tails : Tensor
        B x M x d neighbor relation and tail vectors.

    mask : Tensor
        B x M booleans, true for real neighbors.

    p : EnhancementParams
        Attention weights and projection matrices.

    side : str
        "head" anchors the DistMult term at h_c and compares tails with t_c; "tail"
        anchors at t_c and compares tails with h_c.

    Returns
    -------
    result : Tensor
        B x d enhanced vectors W [e || e_hat].
    """
    projection = p.W_h if side == SIDE_HEAD else p.W_t
    dimension = entity_vecs.shape[-1]

    if neighbor_tails.shape[-1] != dimension or ctx.h_c.shape[-1] != dimension:
        raise DimensionMismatchException("Neighbor and entity dimensions differ")

    if neighbor_tails.shape[1] == 0:
        aggregated = torch.zeros_like(entity_vecs)
    else:
        alpha = attention_weights(
            ctx, neighbor_relations, neighbor_tails, p.omega, side, mask
        )
        aggregated = (alpha.unsqueeze(-1) * neighbor_tails).sum(1)

    return torch.cat([entity_vecs, aggregated], dim=-1) @ projection.T


def _neighbor_logits(
    ctx: ContextVectors,
    neighbor_relations: Tensor,
    neighbor_tails: Tensor,
    omega: Tensor,
    side: str,
) -> Tensor:
    if side == SIDE_HEAD:
        anchor, tail_context = ctx.h_c, ctx.t_c
    elif side == SIDE_TAIL:
        anchor, tail_context = ctx.t_c, ctx.h_c
    else:
        raise ValueError(f"Unknown enhancement side: {side}")

    return (
        omega[0] * distmult_score(anchor, neighbor_relations, neighbor_tails)
        + omega[1] * F.cosine_similarity(ctx.r_c, neighbor_relations, dim=-1)
        + omega[2] * F.cosine_similarity(tail_context, neighbor_tails, dim=-1)
    )


def enhance_entity(
    e_vec: Tensor,
    ctx: ContextVectors,
    neighbor_relations: Tensor,
    neighbor_tails: Tensor,
    p: EnhancementParams,
    side: str,
) -> Tensor:
    mask = torch.ones(neighbor_tails.shape[0], dtype=torch.bool)

    return enhance_entities(
        e_vec.unsqueeze(0),
        ctx,
        neighbor_relations.unsqueeze(0),
        neighbor_tails.unsqueeze(0),
        mask.unsqueeze(0),
        p,
        side,
    ).squeeze(0)


def attention_weights(
    ctx: ContextVectors,
    neighbor_relations: Tensor,
    neighbor_tails: Tensor,
    omega: Tensor,
    side: str = SIDE_HEAD,
    mask: Optional[Tensor] = None,
) -> Tensor:
    """
    Softmax weights over the neighbors on the last axis. Neighbors outside the mask
    get zero weight.
    """
    logits = _neighbor_logits(ctx, neighbor_relations, neighbor_tails, omega, side)

    if mask is None:
        return torch.softmax(logits, dim=-1)

    alpha = torch.softmax(logits.masked_fill(~mask, MASKED_LOGIT), dim=-1)
    return alpha * mask


def triple_loss(
    heads: Tensor, relations: Tensor, tails: Tensor, claim_labels: Sequence[int]
) -> Tensor:
    """
    Logistic loss of every claim under DistMult on the enhanced vectors, with claim
    labels mapped to -1/+1.
    """
    if len(claim_labels) != heads.shape[0]:
        raise MissingLabelsException("Every claim needs a label")

    return logistic_loss(
        distmult_score(heads, relations, tails), torch.tensor(list(claim_labels))
    )


def build_claim_graph(
    claims: Sequence[Triple], variant: str = GRAPH_A_PLUS_A2
) -> ClaimGraph:
    """
    Connects two claims when they share an entity and derives the propagation matrix.
    The default variant propagates over A + A^2 so two-hop neighbors interact while
    one-hop edges weigh more; "a", "a2" and "full" exist for comparison.

    Parameters
    ----------
    claims : Sequence[Triple]
        The statement's claims.

    variant : str (default="a_plus_a2")
        One of "a_plus_a2", "a", "a2" or "full".

    Returns
    -------
    result : ClaimGraph
        Adjacency A, propagation matrix A_hat and the degree matrix of A.
    """
    count = len(claims)

    if count == 0:
        raise ValueError("A statement needs at least one claim")

    if variant == GRAPH_FULL:
        adjacency = torch.ones((count, count), dtype=DTYPE)
        adjacency -= torch.eye(count, dtype=DTYPE)
    else:
        entity_sets = [{claim.head, claim.tail} for claim in claims]
        adjacency = torch.tensor(
            [
                [
                    1.0 if i != j and entity_sets[i] & entity_sets[j] else 0.0
                    for j in range(count)
                ]
                for i in range(count)
            ],
            dtype=DTYPE,
        )

    if variant in (GRAPH_A, GRAPH_FULL):
        propagation = adjacency
    elif variant == GRAPH_A2:
        propagation = adjacency @ adjacency
    elif variant == GRAPH_A_PLUS_A2:
        propagation = adjacency + adjacency @ adjacency
    else:
        raise ValueError(f"Unknown graph variant: {variant}")

    return ClaimGraph(adjacency, propagation, torch.diag(adjacency.sum(1)))


def gcn_forward(v_in: Tensor, g: ClaimGraph, W_g: Tensor, b_v: Tensor) -> Tensor:
    """
    One graph convolution, ReLU(A_hat V W_g^T + b_v).
    """
    if v_in.shape[0] != g.A_hat.shape[0] or v_in.shape[1] != W_g.shape[1]:
        raise DimensionMismatchException(
            f"Cannot convolve {tuple(v_in.shape)} over {tuple(g.A_hat.shape)} "
            f"with {tuple(W_g.shape)}"
        )

    return torch.relu(g.A_hat @ v_in @ W_g.T + b_v)


def readout(v: Tensor) -> Tensor:
    if v.shape[0] == 0:
        raise ValueError("Cannot read out an empty node set")

    return torch.cat([v.mean(0), v.max(0).values])


def normalized_adjacency(
    g: ClaimGraph,
    norm: str = NORM_SYMMETRIC,
    adjacency: str = ATTENTION_ADJ_A,
) -> Tensor:
    """
    D^-1/2 M D^-1/2 (or the D^1/2 M D^-1/2 form when norm is "printed") for M = A or
    A_hat, with degrees clamped below at 1 so edgeless graphs stay defined.
    """
    if adjacency == ATTENTION_ADJ_A:
        matrix = g.A
    elif adjacency == ATTENTION_ADJ_A_HAT:
        matrix = g.A_hat
    else:
        raise ValueError(f"Unknown attention adjacency: {adjacency}")

    degrees = matrix.sum(1).clamp(min=1)

    if norm == NORM_SYMMETRIC:
        left = degrees.pow(-0.5)
    elif norm == NORM_PRINTED:
        left = degrees.pow(0.5)
    else:
        raise ValueError(f"Unknown attention normalization: {norm}")

    return left.unsqueeze(1) * matrix * degrees.pow(-0.5).unsqueeze(0)


def attention_logits(
    v_out: Tensor,
    g: ClaimGraph,
    theta: Tensor,
    norm: str = NORM_SYMMETRIC,
    adjacency: str = ATTENTION_ADJ_A,
) -> Tensor:
    """
    The attention scores before the tanh, norm(A) V_out theta.
    """
    if v_out.shape[1] != theta.shape[0] or v_out.shape[0] != g.A.shape[0]:
        raise DimensionMismatchException(
            f"Cannot score {tuple(v_out.shape)} with theta {tuple(theta.shape)}"
        )

    return normalized_adjacency(g, norm, adjacency) @ v_out @ theta


def local_attention_scores(
    v_out: Tensor,
    g: ClaimGraph,
    theta: Tensor,
    norm: str = NORM_SYMMETRIC,
    adjacency: str = ATTENTION_ADJ_A,
) -> Tensor:
    """
    Self-attention score of every claim, tanh(norm(A) V_out theta), in (-1, 1).
    """
    return torch.tanh(attention_logits(v_out, g, theta, norm, adjacency))


def select_topk(
    v_out: Tensor, z: Tensor, k: int, logits: Optional[Tensor] = None
) -> Tuple[List[int], Tensor]:
    """
    Keeps the min(k, N) claims with the highest scores, each row scaled by its score.
    Given the pre-tanh logits, claims are ranked by them, so scores that tanh rounds
    to the same value still order by content. Exact ties keep their original order
    and the lower index wins.
    """
    if k < 1:
        raise ValueError("k must be at least 1")

    ranking = z if logits is None else logits
    order = torch.sort(ranking.detach(), descending=True, stable=True).indices
    idx = [int(index) for index in order[: min(k, z.shape[0])]]
    selected = torch.tensor(idx, dtype=torch.long)

    return idx, v_out[selected] * z[selected].unsqueeze(1)


def local_representation(
    v_out: Tensor,
    g: ClaimGraph,
    thetas: Tensor,
    k: int,
    norm: str = NORM_SYMMETRIC,
    adjacency: str = ATTENTION_ADJ_A,
) -> Tuple[Tensor, List[Tensor], List[List[int]]]:
    """
    Runs every attention head (one row of thetas each): score, select top-k and read
    out. Head readouts are concatenated in head order.

    Returns
    -------
    result : Tuple[Tensor, List[Tensor], List[List[int]]]
        The 2d * n_a local representation, the score vector of every head and the
        indices every head selected.
    """
    if thetas.shape[0] < 1:
        raise ValueError("At least one attention head is needed")

    readouts, scores, selections = [], [], []

    for theta in thetas:
        logits = attention_logits(v_out, g, theta, norm, adjacency)
        z = torch.tanh(logits)
        idx, v_local = select_topk(v_out, z, k, logits)
        readouts.append(readout(v_local))
        scores.append(z)
        selections.append(idx)

    return torch.cat(readouts), scores, selections


def hsic(z_a: Tensor, z_b: Tensor) -> Tensor:
    """
    Biased HSIC estimate with linear kernels, (N - 1)^-2 tr(R K_a R K_b).
    """
    if z_a.shape != z_b.shape:
        raise DimensionMismatchException("Attention score vectors differ in length")

    count = z_a.shape[0]

    if count < 2:
        return z_a.new_zeros(())

    centering = torch.eye(count, dtype=z_a.dtype) - 1.0 / count
    kernel_a = torch.outer(z_a, z_a)
    kernel_b = torch.outer(z_b, z_b)

    return torch.trace(centering @ kernel_a @ centering @ kernel_b) / (count - 1) ** 2


def hsic_loss(scores: Sequence[Tensor]) -> Tensor:
    """
    Sums the HSIC of every unordered pair of attention heads.
    """
    if len(scores) == 0:
        raise ValueError("At least one score vector is needed")

    if any(z.shape != scores[0].shape for z in scores):
        raise DimensionMismatchException("Attention score vectors differ in length")

    total = scores[0].new_zeros(())

    for z_a, z_b in combinations(scores, 2):
        total = total + hsic(z_a, z_b)

    return total


def min_claim_score(scores: Tensor) -> Tensor:
    return scores.min()


def statement_loss(s_y: Tensor, label: int) -> Tensor:
    """
    log(1 + exp(-y * s_y)) with the statement label mapped to -1/+1. s_y is already a
    sigmoid output, so this is a soft margin on a value in (0, 1).
    """
    sign = 2.0 * label - 1.0
    return F.softplus(-sign * s_y)


def glorot_uniform(shape: Tuple[int, int], generator: torch.Generator) -> Tensor:
    """
    Fan-in and fan-out scaled uniform values for the layers after the embeddings.
    """
    weight = torch.empty(shape, dtype=DTYPE)
    return nn.init.xavier_uniform_(weight, generator=generator)


class NeighborCache:
    def __init__(self, kg: KnowledgeGraph, max_neighbors: int = 0) -> None:
        """
        Per-entity neighbor id tensors, built on first use. With max_neighbors > 0
        only the first max_neighbors attribute neighbors of each entity are kept.
        """
        self._kg = kg
        self._max_neighbors = max_neighbors
        self._cache: Dict[int, Tuple[List[int], List[int]]] = {}

    def get(self, entity: int) -> Tuple[List[int], List[int]]:
        if entity not in self._cache:
            pairs = self._kg.neighbors(entity)

            if self._max_neighbors > 0:
                pairs = pairs[: self._max_neighbors]

            self._cache[entity] = (
                [relation for relation, _ in pairs],
                [tail for _, tail in pairs],
            )

        return self._cache[entity]

    def padded(self, entities: Sequence[int]) -> Tuple[Tensor, Tensor, Tensor]:
        """
        Gets padded B x M relation ids, tail ids and the validity mask.
        """
        lists = [self.get(entity) for entity in entities]
        width = max((len(relations) for relations, _ in lists), default=0)
        relation_ids = torch.zeros((len(lists), width), dtype=torch.long)
        tail_ids = torch.zeros((len(lists), width), dtype=torch.long)
        mask = torch.zeros((len(lists), width), dtype=torch.bool)

        for row, (relations, tails) in enumerate(lists):
            relation_ids[row, : len(relations)] = torch.tensor(
                relations, dtype=torch.long
            )
            tail_ids[row, : len(tails)] = torch.tensor(tails, dtype=torch.long)
            mask[row, : len(relations)] = True

        return relation_ids, tail_ids, mask


class StatementVerifier(nn.Module):
    def __init__(
        self,
        kg: KnowledgeGraph,
        table: EmbeddingTable,
        encoder: Optional[ClaimEncoder],
        options: ModelOptions,
        generator: torch.Generator,
    ) -> None:
        """
        The end-to-end statement verifier. It owns copies of the pretrained embeddings
        so they are fine-tuned with the rest of the model.

        Parameters
        ----------
        kg : KnowledgeGraph
            The graph providing attribute neighbors.

        table : EmbeddingTable
            Pretrained (or freshly initialized) embeddings.

        encoder : Optional[ClaimEncoder]
            Pretrained claim encoder; a random one is drawn when missing.

        options : ModelOptions
            Attention heads, k, hidden width, graph and ablation variants.

        generator : torch.Generator
            Source of the initial parameter values.
        """
        super().__init__()

        if options.k < 1 or options.n_heads < 1:
            raise ValueError("k and n_heads must be at least 1")

        d = table.d
        hidden = options.hidden or 2 * d
        self._kg = kg
        self._options = options
        self._neighbors = NeighborCache(kg, options.max_neighbors)
        self._use_enhancement = options.ablation != ABLATION_NO_LE
        self._use_global = options.ablation not in (
            ABLATION_NO_GSL,
            ABLATION_NO_GSL_LSL,
        )
        self._use_local = options.ablation not in (ABLATION_NO_LSL, ABLATION_NO_GSL_LSL)

        self.entity_vecs = nn.Parameter(table.entity_vecs.detach().clone())
        self.relation_vecs = nn.Parameter(table.relation_vecs.detach().clone())

        bypass = torch.cat(
            [torch.eye(d, dtype=DTYPE), torch.zeros((d, d), dtype=DTYPE)], 1
        )
        self.omega = nn.Parameter(torch.ones(3, dtype=DTYPE))
        self.W_h = nn.Parameter(bypass + self._enhancement_noise(d, generator))
        self.W_t = nn.Parameter(bypass + self._enhancement_noise(d, generator))

        if not self._use_enhancement:
            with torch.no_grad():
                self.W_h.copy_(bypass)
                self.W_t.copy_(bypass)

            self.omega.requires_grad_(False)
            self.W_h.requires_grad_(False)
            self.W_t.requires_grad_(False)

        self.encoder = ClaimEncoder(d, generator)

        if encoder is not None:
            self.encoder.load_state_dict(encoder.state_dict())

        self.W_g = nn.Parameter(glorot_uniform((d, d), generator))
        self.b_v = nn.Parameter(torch.zeros(d, dtype=DTYPE))
        self.theta_att = nn.Parameter(glorot_uniform((options.n_heads, d), generator))
        self.W_1 = nn.Parameter(glorot_uniform((hidden, self.feature_dim), generator))
        self.b_fv = nn.Parameter(torch.zeros(hidden, dtype=DTYPE))
        self.W_2 = nn.Parameter(glorot_uniform((1, hidden), generator).reshape(hidden))

    @staticmethod
    def _enhancement_noise(d: int, generator: torch.Generator) -> Tensor:
        noise = init_uniform((d, d), d, generator) / 6.0
        return torch.cat([torch.zeros((d, d), dtype=DTYPE), noise], 1)

    @property
    def d(self) -> int:
        return self.entity_vecs.shape[1]

    @property
    def options(self) -> ModelOptions:
        return self._options

    @property
    def kg(self) -> KnowledgeGraph:
        return self._kg

    @property
    def feature_dim(self) -> int:
        """
        Width of the verifier input [s_m || r_global || r_local].
        """
        width = 1

        if self._use_global:
            width += 2 * self.d

        if self._use_local:
            width += 2 * self.d * self._options.n_heads

        return width

    def enhancement_params(self) -> EnhancementParams:
        return EnhancementParams(self.omega, self.W_h, self.W_t)

    def _enhance(
        self, entities: Sequence[int], vecs: Tensor, ctx: ContextVectors, side: str
    ) -> Tensor:
        relation_ids, tail_ids, mask = self._neighbors.padded(entities)

        return enhance_entities(
            vecs,
            ctx,
            self.relation_vecs[relation_ids],
            self.entity_vecs[tail_ids],
            mask,
            self.enhancement_params(),
            side,
        )

    def forward(self, statement: Statement) -> Tuple[Tensor, VerificationTrace]:
        """
        Scores a statement. The trace carries per-claim scores, s_m, the attention
        scores and selections of every head and the enhanced claim components.

        Returns
        -------
        result : Tuple[Tensor, VerificationTrace]
            The statement score s_y in (0, 1) and the trace.
        """
        claims = list(statement.claims)

        if not claims:
            raise ValueError(f"Statement {statement.id} has no claims")

        for claim in claims:
            self._kg.check_triple(claim)

        ids = torch.tensor(claims, dtype=torch.long)
        heads = self.entity_vecs[ids[:, 0]]
        relations = self.relation_vecs[ids[:, 1]]
        tails = self.entity_vecs[ids[:, 2]]

        if self._use_enhancement:
            ctx = encode_context(heads, relations, tails)
            heads = self._enhance(ids[:, 0].tolist(), heads, ctx, SIDE_HEAD)
            tails = self._enhance(ids[:, 2].tolist(), tails, ctx, SIDE_TAIL)

        claim_scores = distmult_score(heads, relations, tails)
        s_m = min_claim_score(claim_scores)
        features = [s_m.view(1)]
        z_scores: List[Tensor] = []
        selected: List[List[int]] = []

        if self._use_global or self._use_local:
            v_in = encode_claim(heads, relations, tails, self.encoder.params())
            graph = build_claim_graph(claims, self._options.graph_variant)
            v_out = gcn_forward(v_in, graph, self.W_g, self.b_v)

            if self._use_global:
                features.append(readout(v_out))

            if self._use_local:
                r_local, z_scores, selected = local_representation(
                    v_out,
                    graph,
                    self.theta_att,
                    self._options.k,
                    self._options.attention_norm,
                    self._options.attention_adjacency,
                )
                features.append(r_local)

        hidden = torch.tanh(self.W_1 @ torch.cat(features) + self.b_fv)
        s_y = torch.sigmoid(self.W_2 @ hidden)

        return s_y, VerificationTrace(
            claim_scores, s_m, z_scores, selected, heads, tails, relations
        )


def total_loss(
    batch: Sequence[Statement],
    model: StatementVerifier,
    cfg: LossConfig,
    l2_coeff: float = 0.0,
) -> Tuple[Tensor, Dict[str, float]]:
    """
    Mean over the batch of the statement loss plus lambda1 times the claim loss and
    lambda2 times the attention-head HSIC, plus an L2 penalty on every trainable
    parameter.

    Parameters
    ----------
    batch : Sequence[Statement]
        The statements of the mini-batch.

    model : StatementVerifier
        The model to evaluate.

    cfg : LossConfig
        Trade-off weights and whether claim labels are used.

    l2_coeff : float (default=0)
        L2 coefficient.

    Returns
    -------
    result : Tuple[Tensor, Dict[str, float]]
        The differentiable loss and the batch means of each term.
    """
    if len(batch) == 0:
        raise ValueError("Cannot compute the loss of an empty batch")

    statement_terms, claim_terms, diversity_terms = [], [], []

    for statement in batch:
        s_y, trace = model(statement)
        statement_terms.append(statement_loss(s_y, statement.label))

        if cfg.use_claim_labels and cfg.lambda1 > 0:
            if len(statement.claim_labels) != len(statement.claims):
                raise MissingLabelsException(
                    f"Statement {statement.id} lacks claim labels"
                )

            claim_terms.append(
                triple_loss(
                    trace.enhanced_heads,
                    trace.relations,
                    trace.enhanced_tails,
                    statement.claim_labels,
                )
            )

        if cfg.lambda2 > 0 and trace.z_scores:
            diversity_terms.append(hsic_loss(trace.z_scores))

    loss = torch.stack(statement_terms).mean()
    parts = {"statement": loss.item(), "claims": 0.0, "hsic": 0.0, "l2": 0.0}

    if claim_terms:
        claim_loss = torch.stack(claim_terms).sum() / len(batch)
        loss = loss + cfg.lambda1 * claim_loss
        parts["claims"] = claim_loss.item()

    if diversity_terms:
        diversity_loss = torch.stack(diversity_terms).sum() / len(batch)
        loss = loss + cfg.lambda2 * diversity_loss
        parts["hsic"] = diversity_loss.item()

    if l2_coeff > 0:
        penalty = sum(
            (param ** 2).sum() for param in model.parameters() if param.requires_grad
        )
        loss = loss + l2_coeff * penalty
        parts["l2"] = penalty.item()

    return loss, parts


def mean_pairwise_hsic(
    model: StatementVerifier, statements: Sequence[Statement]
) -> float:
    """
    Average over statements with at least two claims of the mean HSIC between pairs
    of attention heads.
    """
    values = []

    with torch.no_grad():
        for statement in statements:
            if len(statement.claims) < 2:
                continue

            _, trace = model(statement)
            pairs = len(trace.z_scores) * (len(trace.z_scores) - 1) // 2

            if pairs:
                values.append(hsic_loss(trace.z_scores).item() / pairs)

    return sum(values) / len(values) if values else 0.0


def save_checkpoint(
    model: StatementVerifier,
    path: str,
    loss_cfg: LossConfig,
    threshold: Optional[float],
    embeddings_hash: str,
) -> None:
    document = {
        "version": CHECKPOINT_VERSION,
        "vocabulary_hash": model.kg.vocabulary_hash,
        "embeddings_hash": embeddings_hash,
        "entities": model.kg.entity_count,
        "relations": model.kg.relation_count,
        "d": model.d,
        "options": dict(model.options._asdict()),
        "loss_config": dict(loss_cfg._asdict()),
        "threshold": threshold,
        "state": {
            name: tensor.detach().clone()
            for name, tensor in model.state_dict().items()
        },
    }

    with delay_keyboard_interrupt():
        torch.save(document, path)


def load_checkpoint(
    path: str, kg: KnowledgeGraph
) -> Tuple[StatementVerifier, LossConfig, Optional[float]]:
    """
    Restores a verifier saved by save_checkpoint after checking its format version and
    that it was trained on the same vocabularies.

    Returns
    -------
    result : Tuple[StatementVerifier, LossConfig, Optional[float]]
        The model, its loss configuration and the calibrated threshold if any.
    """
    try:
        document = torch.load(path, map_location="cpu", weights_only=True)
    except (OSError, RuntimeError, EOFError, UnpicklingError) as exception:
        raise CheckpointException(f"Cannot read checkpoint {path}: {exception}")

    if document.get("version") != CHECKPOINT_VERSION:
        raise CheckpointException(f"Unsupported checkpoint version in {path}")

    if document["vocabulary_hash"] != kg.vocabulary_hash:
        raise CheckpointException(f"Checkpoint {path} was trained on another graph")

    generator = torch.Generator().manual_seed(0)
    table = EmbeddingTable(kg.entity_count, kg.relation_count, document["d"], generator)
    model = StatementVerifier(
        kg, table, None, ModelOptions(**document["options"]), generator
    )

    try:
        model.load_state_dict(document["state"])
    except RuntimeError as exception:
        raise CheckpointException(f"Checkpoint {path} does not match: {exception}")

    return model, LossConfig(**document["loss_config"]), document["threshold"]
