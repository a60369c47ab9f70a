from typing import Dict, List, NamedTuple, Optional, Sequence

from torch import Tensor

from claimcheck.constants import (ABLATION_FULL, AGGREGATION_MIN,
                                  ATTENTION_ADJ_A, GRAPH_A_PLUS_A2,
                                  NORM_SYMMETRIC)


class Triple(NamedTuple):
    head: int
    relation: int
    tail: int


class Statement(NamedTuple):
    id: str
    claims: List[Triple]
    label: int
    claim_labels: List[int]


class WalkConfig(NamedTuple):
    min_steps: int = 1
    max_steps: int = 4
    min_walks: int = 1
    max_walks: int = 3
    max_claims: int = 12
    seed_entities: Optional[Sequence[int]] = None


class CorpusSplits(NamedTuple):
    train: List[Statement]
    valid: List[Statement]
    test: List[Statement]


class CorpusStats(NamedTuple):
    statements: int
    negatives: int
    avg_claims: float
    max_claims: int


class KgStats(NamedTuple):
    entities: int
    relations: int
    triples: int
    min_out_degree: int
    max_out_degree: int
    mean_out_degree: float
    median_out_degree: float
    sink_entities: int


class ContextVectors(NamedTuple):
    h_c: Tensor
    r_c: Tensor
    t_c: Tensor


class EnhancementParams(NamedTuple):
    omega: Tensor
    W_h: Tensor
    W_t: Tensor


class ClaimEncoderParams(NamedTuple):
    filter: Tensor
    bias: Tensor


class ClaimGraph(NamedTuple):
    A: Tensor
    A_hat: Tensor
    D: Tensor


class LossConfig(NamedTuple):
    lambda1: float = 1.0
    lambda2: float = 0.1
    use_claim_labels: bool = True


class ModelOptions(NamedTuple):
    k: int = 2
    n_heads: int = 2
    hidden: Optional[int] = None
    graph_variant: str = GRAPH_A_PLUS_A2
    attention_norm: str = NORM_SYMMETRIC
    attention_adjacency: str = ATTENTION_ADJ_A
    ablation: str = ABLATION_FULL
    max_neighbors: int = 0


class VerificationTrace(NamedTuple):
    claim_scores: Tensor
    s_m: Tensor
    z_scores: List[Tensor]
    selected: List[List[int]]
    enhanced_heads: Tensor
    enhanced_tails: Tensor
    relations: Tensor


class PretrainConfig(NamedTuple):
    epochs: int = 100
    learning_rate: float = 0.1
    batch_size: int = 100
    negatives: int = 1
    l2_coeff: float = 1e-5
    seed: int = 0


class TrainConfig(NamedTuple):
    batch_size: int = 100
    learning_rate: float = 0.001
    epochs: int = 50
    patience: int = 5
    l2_coeff: float = 1e-5
    lambda1: float = 1.0
    lambda2: float = 0.1
    seed: int = 0
    options: ModelOptions = ModelOptions()
    f1_positive: int = 1
    threshold_fallback: float = 0.5

    @property
    def ablation(self) -> str:
        return self.options.ablation


class BaselineConfig(NamedTuple):
    epochs: int = 100
    learning_rate: float = 0.01
    batch_size: int = 100
    margin: float = 1.0
    aggregation: str = AGGREGATION_MIN
    seed: int = 0
    f1_positive: int = 1


class TrainingRecord(NamedTuple):
    epoch: int
    mean_loss: float
    valid_accuracy: Optional[float]
    wall_ms: int


class BucketReport(NamedTuple):
    accuracy: float
    count: int


class EvalReport(NamedTuple):
    threshold: float
    accuracy: float
    f1: float
    per_claim_count: Dict[int, BucketReport]


class ClaimVerdict(NamedTuple):
    triple: List[str]
    score: float


class Prediction(NamedTuple):
    claims: List[ClaimVerdict]
    s_m: float
    s_y: float
    threshold: float
    verdict: bool
