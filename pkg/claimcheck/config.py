import json
from typing import Any, Dict, Iterable, NamedTuple

from claimcheck.constants import (ABLATION_NO_LD, ABLATION_NO_LT, ABLATIONS,
                                  AGGREGATIONS, ATTENTION_ADJACENCIES,
                                  ATTENTION_NORMS, GRAPH_VARIANTS)
from claimcheck.exceptions import ConfigException
from claimcheck.types import (BaselineConfig, LossConfig, ModelOptions,
                              PretrainConfig, TrainConfig, WalkConfig)


class Config:
    silent: bool = False
    verbose: bool = False


class RunConfig(NamedTuple):
    kg_path: str = ""
    corpus_dir: str = ""
    embeddings_path: str = ""
    checkpoint_path: str = ""
    out_dir: str = "."
    seed: int = 0
    dim: int = 18
    k: int = 2
    n_heads: int = 2
    hidden: int = 0
    lambda1: float = 1.0
    lambda2: float = 0.1
    l2_coeff: float = 1e-5
    learning_rate: float = 0.001
    batch_size: int = 100
    epochs: int = 50
    patience: int = 5
    pretrain_epochs: int = 100
    pretrain_lr: float = 0.1
    pretrain_negatives: int = 1
    encoder_pretrain: bool = True
    min_steps: int = 1
    max_steps: int = 4
    min_walks: int = 1
    max_walks: int = 3
    max_claims: int = 12
    count: int = 1000
    neg_fraction: float = 0.5
    corruptions: int = 1
    split_train: float = 0.8
    split_valid: float = 0.1
    split_test: float = 0.1
    ablation: str = "full"
    graph_variant: str = "a_plus_a2"
    attention_norm: str = "symmetric"
    attention_adjacency: str = "a"
    max_neighbors: int = 0
    f1_positive: int = 1
    baseline_aggregation: str = "min"
    baseline_margin: float = 1.0
    baseline_epochs: int = 100
    baseline_lr: float = 0.01
    threshold_fallback: float = 0.5


def _coerce(key: str, value: Any) -> Any:
    field_type = RunConfig.__annotations__[key]

    if isinstance(value, str):
        if field_type is bool:
            lowered = value.strip().lower()

            if lowered in ("1", "true", "yes", "on"):
                return True

            if lowered in ("0", "false", "no", "off"):
                return False

            raise ConfigException(f"Invalid boolean for {key}: {value}")

        try:
            return field_type(value)
        except ValueError:
            raise ConfigException(f"Invalid value for {key}: {value}")

    if field_type is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)

    if field_type is bool and not isinstance(value, bool):
        raise ConfigException(f"Invalid boolean for {key}: {value}")

    if field_type is not bool and isinstance(value, bool):
        raise ConfigException(f"Invalid value for {key}: {value}")

    if not isinstance(value, field_type):
        raise ConfigException(f"Invalid value for {key}: {value}")

    return value


def _apply(cfg: RunConfig, values: Dict[str, Any]) -> RunConfig:
    unknown = sorted(set(values) - set(RunConfig._fields))

    if unknown:
        raise ConfigException(f"Unknown configuration keys: {', '.join(unknown)}")

    return cfg._replace(**{key: _coerce(key, value) for key, value in values.items()})


def load_run_config(path: str, base: RunConfig = RunConfig()) -> RunConfig:
    """
    Reads a flat JSON object of configuration keys on top of the given base.

    Parameters
    ----------
    path : str
        Path of the JSON configuration file.

    base : RunConfig
        The configuration the file values are applied to.

    Returns
    -------
    result : RunConfig
        The merged configuration.
    """
    try:
        with open(path, "r", encoding="utf-8") as file:
            values = json.load(file)
    except (OSError, json.JSONDecodeError) as exception:
        raise ConfigException(f"Cannot read config {path}: {exception}")

    if not isinstance(values, dict):
        raise ConfigException(f"Config {path} must hold a JSON object")

    return _apply(base, values)


def override_run_config(cfg: RunConfig, overrides: Iterable[str]) -> RunConfig:
    """
    Applies command-line overrides of the form key=value.
    """
    values = {}

    for override in overrides:
        key, separator, value = override.partition("=")

        if not separator or not key:
            raise ConfigException(f"Override must look like key=value: {override}")

        values[key.strip()] = value.strip()

    return _apply(cfg, values)


def validate_run_config(cfg: RunConfig) -> None:
    positive = (
        "dim",
        "k",
        "n_heads",
        "batch_size",
        "learning_rate",
        "pretrain_lr",
        "pretrain_negatives",
        "min_steps",
        "min_walks",
        "max_claims",
        "count",
        "corruptions",
        "baseline_lr",
    )

    for key in positive:
        if getattr(cfg, key) <= 0:
            raise ConfigException(f"{key} must be positive")

    non_negative = (
        "lambda1",
        "lambda2",
        "l2_coeff",
        "epochs",
        "pretrain_epochs",
        "baseline_epochs",
        "patience",
        "hidden",
        "max_neighbors",
        "baseline_margin",
    )

    for key in non_negative:
        if getattr(cfg, key) < 0:
            raise ConfigException(f"{key} must not be negative")

    if cfg.min_steps > cfg.max_steps or cfg.min_walks > cfg.max_walks:
        raise ConfigException("Walk bounds must satisfy 1 <= min <= max")

    if not 0 <= cfg.neg_fraction <= 1:
        raise ConfigException("neg_fraction must lie in [0, 1]")

    ratios = (cfg.split_train, cfg.split_valid, cfg.split_test)

    if any(ratio <= 0 for ratio in ratios) or abs(sum(ratios) - 1) > 1e-9:
        raise ConfigException("Split ratios must be positive and sum to 1")

    choices = {
        "ablation": ABLATIONS,
        "graph_variant": GRAPH_VARIANTS,
        "attention_norm": ATTENTION_NORMS,
        "attention_adjacency": ATTENTION_ADJACENCIES,
        "baseline_aggregation": AGGREGATIONS,
    }

    for key, allowed in choices.items():
        if getattr(cfg, key) not in allowed:
            raise ConfigException(f"{key} must be one of {', '.join(allowed)}")

    if cfg.f1_positive not in (0, 1):
        raise ConfigException("f1_positive must be 0 or 1")


def walk_config(cfg: RunConfig) -> WalkConfig:
    return WalkConfig(
        cfg.min_steps, cfg.max_steps, cfg.min_walks, cfg.max_walks, cfg.max_claims
    )


def pretrain_config(cfg: RunConfig) -> PretrainConfig:
    return PretrainConfig(
        cfg.pretrain_epochs,
        cfg.pretrain_lr,
        cfg.batch_size,
        cfg.pretrain_negatives,
        cfg.l2_coeff,
        cfg.seed,
    )


def model_options(cfg: RunConfig) -> ModelOptions:
    return ModelOptions(
        cfg.k,
        cfg.n_heads,
        cfg.hidden or None,
        cfg.graph_variant,
        cfg.attention_norm,
        cfg.attention_adjacency,
        cfg.ablation,
        cfg.max_neighbors,
    )


def train_config(cfg: RunConfig) -> TrainConfig:
    return TrainConfig(
        cfg.batch_size,
        cfg.learning_rate,
        cfg.epochs,
        cfg.patience,
        cfg.l2_coeff,
        cfg.lambda1,
        cfg.lambda2,
        cfg.seed,
        model_options(cfg),
        cfg.f1_positive,
        cfg.threshold_fallback,
    )


def baseline_config(cfg: RunConfig) -> BaselineConfig:
    return BaselineConfig(
        cfg.baseline_epochs,
        cfg.baseline_lr,
        cfg.batch_size,
        cfg.baseline_margin,
        cfg.baseline_aggregation,
        cfg.seed,
        cfg.f1_positive,
    )


def loss_config(cfg: TrainConfig) -> LossConfig:
    """
    Derives the loss weights for a training configuration. The no_Lt and no_Ld
    variants switch off their loss term entirely.
    """
    use_claim_labels = cfg.ablation != ABLATION_NO_LT
    lambda1 = cfg.lambda1 if use_claim_labels else 0.0
    lambda2 = 0.0 if cfg.ablation == ABLATION_NO_LD else cfg.lambda2

    return LossConfig(lambda1, lambda2, use_claim_labels)
