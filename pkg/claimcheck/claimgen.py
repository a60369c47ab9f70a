import json
import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from claimcheck.constants import SEED_RETRIES
from claimcheck.exceptions import (SplitException, StatementFormatException,
                                   WalkException)
from claimcheck.kgstore import KnowledgeGraph, corrupt_triple
from claimcheck.tools import delay_keyboard_interrupt
from claimcheck.types import (CorpusSplits, CorpusStats, Statement, Triple,
                              WalkConfig)

logger = logging.getLogger(__name__)


def _check_walk_config(cfg: WalkConfig) -> None:
    if not 1 <= cfg.min_steps <= cfg.max_steps:
        raise WalkException("Walk steps must satisfy 1 <= min_steps <= max_steps")

    if not 1 <= cfg.min_walks <= cfg.max_walks:
        raise WalkException("Walk counts must satisfy 1 <= min_walks <= max_walks")

    if cfg.max_claims < 1:
        raise WalkException("max_claims must be at least 1")


def _open_edges(
    kg: KnowledgeGraph, entity: int, used: set
) -> List[Tuple[int, int]]:
    return [
        (relation, tail)
        for relation, tail in kg.neighbors(entity)
        if Triple(entity, relation, tail) not in used
    ]


def _walk(
    kg: KnowledgeGraph,
    start: int,
    steps: int,
    used: set,
    budget: int,
    rng: np.random.Generator,
) -> List[Triple]:
    claims = []
    current = start

    for _ in range(min(steps, budget)):
        edges = _open_edges(kg, current, used)

        if not edges:
            break

        relation, tail = edges[int(rng.integers(len(edges)))]
        claim = Triple(current, relation, tail)
        used.add(claim)
        claims.append(claim)
        current = tail

    return claims


def sample_statement(
    kg: KnowledgeGraph,
    cfg: WalkConfig,
    rng: np.random.Generator,
    statement_id: str = "s0",
) -> Statement:
    """
    Samples a true statement by random walks over the graph. The first walk starts at
    a seed entity; every later walk restarts from an entity the statement already
    mentions, so claims share entities. Walks stop early at dead ends.

    Parameters
    ----------
    kg : KnowledgeGraph
        The graph to walk.

    cfg : WalkConfig
        Step and walk count bounds.

    rng : np.random.Generator
        The random stream of this statement.

    statement_id : str
        Identifier given to the statement.

    Returns
    -------
    result : Statement
        A statement whose claims are all triples of the graph, labelled true.
    """
    _check_walk_config(cfg)

    if kg.triple_count == 0:
        raise WalkException("Cannot sample statements from an empty graph")

    seeds = (
        list(cfg.seed_entities)
        if cfg.seed_entities is not None
        else range(kg.entity_count)
    )

    if len(seeds) == 0:
        raise WalkException("No seed entities to start walks from")

    walk_count = int(rng.integers(cfg.min_walks, cfg.max_walks + 1))
    used = set()
    claims: List[Triple] = []

    for _ in range(SEED_RETRIES):
        seed = int(seeds[int(rng.integers(len(seeds)))])
        steps = int(rng.integers(cfg.min_steps, cfg.max_steps + 1))
        claims = _walk(kg, seed, steps, used, cfg.max_claims, rng)

        if claims:
            break
    else:
        raise WalkException(f"No seed with outgoing edges after {SEED_RETRIES} tries")

    visited = [seed]

    for _ in range(walk_count - 1):
        for claim in claims:
            for entity in (claim.head, claim.tail):
                if entity not in visited:
                    visited.append(entity)

        starts = [entity for entity in visited if _open_edges(kg, entity, used)]
        budget = cfg.max_claims - len(claims)

        if not starts or budget <= 0:
            break

        start = starts[int(rng.integers(len(starts)))]
        steps = int(rng.integers(cfg.min_steps, cfg.max_steps + 1))
        claims.extend(_walk(kg, start, steps, used, budget, rng))

    return Statement(statement_id, claims, 1, [1] * len(claims))


def negate_statement(
    kg: KnowledgeGraph,
    statement: Statement,
    rng: np.random.Generator,
    corruptions: int = 1,
) -> Statement:
    """
    Turns a true statement into a false one by corrupting uniformly chosen claims.
    Untouched claims keep their label.

    Parameters
    ----------
    kg : KnowledgeGraph
        The graph corruptions must be absent from.

    statement : Statement
        A true statement.

    rng : np.random.Generator
        The random stream of this statement.

    corruptions : int (default=1)
        Number of claims to corrupt, capped at the claim count.

    Returns
    -------
    result : Statement
        The false statement.
    """
    if statement.label != 1:
        raise ValueError("Only true statements can be negated")

    if corruptions < 1:
        raise ValueError("At least one claim must be corrupted")

    claims = list(statement.claims)
    claim_labels = list(statement.claim_labels)
    count = min(corruptions, len(claims))

    for index in sorted(int(i) for i in rng.choice(len(claims), count, replace=False)):
        claims[index] = corrupt_triple(kg, claims[index], rng)
        claim_labels[index] = 0

    return Statement(statement.id, claims, 0, claim_labels)


def generate_corpus(
    kg: KnowledgeGraph,
    cfg: WalkConfig,
    count: int,
    neg_fraction: float,
    seed: int,
    corruptions: int = 1,
    on_progress: Optional[Callable[..., None]] = None,
) -> List[Statement]:
    """
    Generates a labelled corpus. Each statement draws from its own child stream of the
    seed, so statements can be produced in any order or in parallel without changing
    any of them.
    """
    if not 0 <= neg_fraction <= 1:
        raise ValueError("neg_fraction must lie in [0, 1]")

    statements = []
    child_seeds = np.random.SeedSequence(seed).spawn(count)

    for index, child_seed in enumerate(child_seeds):
        rng = np.random.default_rng(child_seed)
        statement = sample_statement(kg, cfg, rng, f"s{index:06d}")

        if rng.random() < neg_fraction:
            statement = negate_statement(kg, statement, rng, corruptions)

        statements.append(statement)
        on_progress() if on_progress is not None else None

    return statements


def split_corpus(
    statements: Sequence[Statement],
    ratios: Tuple[float, float, float],
    rng: np.random.Generator,
) -> CorpusSplits:
    """
    Shuffles and partitions statements into train, validation and test splits. Every
    split receives at least one statement and sizes stay within one of the exact
    proportions.
    """
    if len(ratios) != 3 or any(ratio <= 0 for ratio in ratios):
        raise SplitException("Split ratios must be three positive numbers")

    if abs(sum(ratios) - 1) > 1e-9:
        raise SplitException("Split ratios must sum to 1")

    total = len(statements)

    if total < 3:
        raise SplitException("At least 3 statements are needed to split a corpus")

    valid_size = max(1, int(round(total * ratios[1])))
    test_size = max(1, int(round(total * ratios[2])))
    train_size = total - valid_size - test_size

    if train_size < 1:
        train_size, valid_size = 1, total - test_size - 1

    order = rng.permutation(total)
    shuffled = [statements[int(index)] for index in order]

    return CorpusSplits(
        shuffled[:train_size],
        shuffled[train_size : train_size + valid_size],
        shuffled[train_size + valid_size :],
    )


def corpus_stats(statements: Sequence[Statement]) -> CorpusStats:
    sizes = np.array([len(statement.claims) for statement in statements])

    if len(sizes) == 0:
        return CorpusStats(0, 0, 0.0, 0)

    return CorpusStats(
        len(statements),
        sum(1 for statement in statements if statement.label == 0),
        float(sizes.mean()),
        int(sizes.max()),
    )


def save_corpus(kg: KnowledgeGraph, statements: Sequence[Statement], path: str) -> None:
    with delay_keyboard_interrupt():
        with open(path, "w", encoding="utf-8", newline="\n") as file:
            for statement in statements:
                record = {
                    "id": statement.id,
                    "claims": [list(kg.decode(claim)) for claim in statement.claims],
                    "label": statement.label,
                    "claim_labels": list(statement.claim_labels),
                }
                file.write(json.dumps(record) + "\n")


def parse_statement(kg: KnowledgeGraph, record: dict) -> Statement:
    """
    Builds a statement from its JSON record. Claim labels default to the statement
    label broadcast over every claim when a true statement omits them.
    """
    if not isinstance(record, dict) or not isinstance(record.get("claims"), list):
        raise StatementFormatException("A statement needs a claims list")

    claims = []

    for claim in record["claims"]:
        if not isinstance(claim, (list, tuple)) or len(claim) != 3:
            raise StatementFormatException(
                f"Statement {record.get('id')} has a claim that is not a "
                f"[head, relation, tail] triple: {claim!r}"
            )

        claims.append(kg.encode(*(str(part) for part in claim)))

    label = int(record.get("label", 1))
    claim_labels = record.get("claim_labels")

    if claim_labels is None:
        claim_labels = [1] * len(claims) if label == 1 else []

    if claim_labels and len(claim_labels) != len(claims):
        raise ValueError(f"Statement {record.get('id')} has mismatched claim labels")

    return Statement(
        str(record.get("id", "")), claims, label, [int(value) for value in claim_labels]
    )


def load_corpus(kg: KnowledgeGraph, path: str) -> List[Statement]:
    statements = []

    with open(path, "r", encoding="utf-8") as file:
        for line in file:
            if line.strip():
                statements.append(parse_statement(kg, json.loads(line)))

    logger.debug("Loaded %d statements from %s", len(statements), path)

    return statements
