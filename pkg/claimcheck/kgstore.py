import logging
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from claimcheck.constants import (COMMENT_PREFIX, CORRUPTION_RETRIES,
                                  FIELD_SEPARATOR)
from claimcheck.exceptions import (CorruptionException, EmptyGraphException,
                                   TripleParseException,
                                   UnknownEntityException,
                                   UnknownRelationException)
from claimcheck.tools import delay_keyboard_interrupt, vocabulary_hash
from claimcheck.types import KgStats, Triple

logger = logging.getLogger(__name__)


class KnowledgeGraph:
    def __init__(self, named_triples: Iterable[Tuple[str, str, str]]) -> None:
        """
        An immutable, indexed triple store. Entity and relation ids are dense integers
        assigned in order of first appearance; duplicate triples are dropped.

        Parameters
        ----------
        named_triples : Iterable[Tuple[str, str, str]]
            The (head, relation, tail) names making up the graph.
        """
        self._entities: List[str] = []
        self._relations: List[str] = []
        self._entity_ids: Dict[str, int] = {}
        self._relation_ids: Dict[str, int] = {}
        self._triples: List[Triple] = []
        self._triple_set = set()
        self._neighbor_index: Dict[int, List[Tuple[int, int]]] = {}

        for head, relation, tail in named_triples:
            triple = Triple(
                self._intern_entity(head),
                self._intern_relation(relation),
                self._intern_entity(tail),
            )

            if triple in self._triple_set:
                continue

            self._triple_set.add(triple)
            self._triples.append(triple)
            self._neighbor_index[triple.head].append((triple.relation, triple.tail))

        self._triple_set = frozenset(self._triple_set)

    def _intern_entity(self, name: str) -> int:
        if name not in self._entity_ids:
            self._entity_ids[name] = len(self._entities)
            self._entities.append(name)
            self._neighbor_index[self._entity_ids[name]] = []

        return self._entity_ids[name]

    def _intern_relation(self, name: str) -> int:
        if name not in self._relation_ids:
            self._relation_ids[name] = len(self._relations)
            self._relations.append(name)

        return self._relation_ids[name]

    def entity_id(self, name: str) -> int:
        if name not in self._entity_ids:
            raise UnknownEntityException(name)

        return self._entity_ids[name]

    def relation_id(self, name: str) -> int:
        if name not in self._relation_ids:
            raise UnknownRelationException(name)

        return self._relation_ids[name]

    def encode(self, head: str, relation: str, tail: str) -> Triple:
        """
        Maps a named triple to ids.

        Returns
        -------
        result : Triple
            The id triple. Raises if any name is outside the vocabularies.
        """
        return Triple(
            self.entity_id(head), self.relation_id(relation), self.entity_id(tail)
        )

    def decode(self, triple: Triple) -> Tuple[str, str, str]:
        return (
            self._entities[triple.head],
            self._relations[triple.relation],
            self._entities[triple.tail],
        )

    def neighbors(self, entity: int) -> Sequence[Tuple[int, int]]:
        if not 0 <= entity < len(self._entities):
            raise UnknownEntityException(entity)

        return tuple(self._neighbor_index[entity])

    def contains(self, triple: Triple) -> bool:
        return triple in self._triple_set

    def check_triple(self, triple: Triple) -> None:
        if not 0 <= triple.head < len(self._entities):
            raise UnknownEntityException(triple.head)

        if not 0 <= triple.relation < len(self._relations):
            raise UnknownRelationException(triple.relation)

        if not 0 <= triple.tail < len(self._entities):
            raise UnknownEntityException(triple.tail)

    @property
    def entities(self) -> Sequence[str]:
        return tuple(self._entities)

    @property
    def relations(self) -> Sequence[str]:
        return tuple(self._relations)

    @property
    def triples(self) -> Sequence[Triple]:
        """
        Gets the triples in load order.

        Returns
        -------
        result : Sequence[Triple]
            Every distinct triple of the graph.
        """
        return tuple(self._triples)

    @property
    def entity_count(self) -> int:
        return len(self._entities)

    @property
    def relation_count(self) -> int:
        return len(self._relations)

    @property
    def triple_count(self) -> int:
        return len(self._triples)

    @property
    def vocabulary_hash(self) -> str:
        return vocabulary_hash(self._entities, self._relations)


def load_triples(path: str) -> KnowledgeGraph:
    """
    Loads a tab-separated triple file. Blank lines and lines starting with '#' are
    skipped.

    Parameters
    ----------
    path : str
        Path of the UTF-8 triple file.

    Returns
    -------
    result : KnowledgeGraph
        The indexed graph.
    """
    named_triples = []

    with open(path, "r", encoding="utf-8") as file:
        for line_number, line in enumerate(file, start=1):
            line = line.rstrip("\r\n")

            if not line.strip() or line.startswith(COMMENT_PREFIX):
                continue

            fields = line.split(FIELD_SEPARATOR)

            if len(fields) != 3 or not all(fields):
                raise TripleParseException(line_number, line)

            named_triples.append(tuple(fields))

    if not named_triples:
        raise EmptyGraphException(f"No triples found in {path}")

    kg = KnowledgeGraph(named_triples)
    logger.debug(
        "Loaded %d triples over %d entities from %s",
        kg.triple_count,
        kg.entity_count,
        path,
    )

    return kg


def save_triples(kg: KnowledgeGraph, path: str) -> None:
    with delay_keyboard_interrupt():
        with open(path, "w", encoding="utf-8", newline="\n") as file:
            for triple in kg.triples:
                file.write(FIELD_SEPARATOR.join(kg.decode(triple)) + "\n")


def neighbors(kg: KnowledgeGraph, entity: int) -> List[Tuple[int, int]]:
    """
    Gets the attribute neighbors of an entity, that is the (relation, tail) pairs of
    the triples it heads, in load order.
    """
    return list(kg.neighbors(entity))


def corrupt_triple(
    kg: KnowledgeGraph, triple: Triple, rng: np.random.Generator
) -> Triple:
    """
    Replaces the head or the tail of a triple, chosen by a fair coin, with a uniformly
    drawn entity until the result is absent from the graph.

    Parameters
    ----------
    kg : KnowledgeGraph
        The graph the corruption must be absent from.

    triple : Triple
        The triple to corrupt.

    rng : np.random.Generator
        The caller's random stream.

    Returns
    -------
    result : Triple
        A triple that is not in the graph and differs from the input in exactly one
        of head or tail.
    """
    if kg.entity_count == 0:
        raise EmptyGraphException("Cannot corrupt triples of an empty graph")

    for _ in range(CORRUPTION_RETRIES):
        replace_head = rng.random() < 0.5
        entity = int(rng.integers(kg.entity_count))

        if replace_head:
            candidate = Triple(entity, triple.relation, triple.tail)
        else:
            candidate = Triple(triple.head, triple.relation, entity)

        if candidate != triple and not kg.contains(candidate):
            return candidate

    raise CorruptionException(
        f"No absent corruption of {kg.decode(triple)} after {CORRUPTION_RETRIES} tries"
    )


def kg_stats(kg: KnowledgeGraph) -> KgStats:
    degrees = np.array(
        [len(kg.neighbors(entity)) for entity in range(kg.entity_count)]
    )

    return KgStats(
        kg.entity_count,
        kg.relation_count,
        kg.triple_count,
        int(degrees.min()),
        int(degrees.max()),
        float(degrees.mean()),
        float(np.median(degrees)),
        int((degrees == 0).sum()),
    )


def make_synthetic_kg(
    n_entities: int = 200,
    n_relations: int = 10,
    n_triples: int = 2000,
    rank: int = 8,
    seed: int = 0,
) -> KnowledgeGraph:
    """
    Builds a graph whose triples follow a hidden trilinear model, so that a DistMult
    scorer can recover them. Tails are drawn from a softmax over the hidden scores of
    every candidate tail.

    Parameters
    ----------
    n_entities : int
        Number of entities, named e0, e1, ...

    n_relations : int
        Number of relations, named r0, r1, ...

    n_triples : int
        Number of distinct triples to draw.

    rank : int
        Dimension of the hidden factors.

    seed : int
        Seed of the generator.

    Returns
    -------
    result : KnowledgeGraph
        The synthetic graph.
    """
    if n_triples > n_entities * n_entities * n_relations // 2:
        raise ValueError("Too many triples requested for the vocabulary size")

    rng = np.random.default_rng(seed)
    entity_factors = rng.normal(size=(n_entities, rank))
    sharpness = 2.0 / np.sqrt(rank)
    relation_factors = rng.normal(size=(n_relations, rank))
    named_triples = []
    seen = set()

    while len(named_triples) < n_triples:
        head = int(rng.integers(n_entities))
        relation = int(rng.integers(n_relations))
        logits = sharpness * (
            entity_factors @ (entity_factors[head] * relation_factors[relation])
        )
        logits[head] = -np.inf
        probabilities = np.exp(logits - logits.max())
        probabilities /= probabilities.sum()
        tail = int(rng.choice(n_entities, p=probabilities))

        if (head, relation, tail) in seen:
            continue

        seen.add((head, relation, tail))
        named_triples.append((f"e{head}", f"r{relation}", f"e{tail}"))

    return KnowledgeGraph(named_triples)
