"""Knowledge graph storage: TSV loading, id interning, adjacency indexes.

Triples are (head, relation, tail) tuples of dense integer ids. Ids are
assigned in first-occurrence order while reading train, then valid, then
test, so the same files always produce the same id assignment. The graph
itself is built from the train split only; the entity vocabulary still
covers every split so that rankings run over the full entity universe.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .errors import DataError, ParseError

logger = logging.getLogger("gpar")

HEAD = "head"
TAIL = "tail"
DIRECTIONS = (HEAD, TAIL)

Triple = tuple[int, int, int]


class Vocabulary:
    """Bidirectional string<->id tables for entities and relations."""

    def __init__(self):
        self.entity_names: list[str] = []
        self.entity_ids: dict[str, int] = {}
        self.relation_names: list[str] = []
        self.relation_ids: dict[str, int] = {}

    def add_entity(self, name: str) -> int:
        eid = self.entity_ids.get(name)
        if eid is None:
            eid = len(self.entity_names)
            self.entity_ids[name] = eid
            self.entity_names.append(name)
        return eid

    def add_relation(self, name: str) -> int:
        rid = self.relation_ids.get(name)
        if rid is None:
            rid = len(self.relation_names)
            self.relation_ids[name] = rid
            self.relation_names.append(name)
        return rid

    @property
    def n_entities(self) -> int:
        return len(self.entity_names)

    @property
    def n_relations(self) -> int:
        return len(self.relation_names)


@dataclass
class DatasetSplit:
    """Interned triples for up to three splits sharing one vocabulary."""

    vocab: Vocabulary
    train: list[Triple]
    valid: list[Triple] = field(default_factory=list)
    test: list[Triple] = field(default_factory=list)
    # per split: (raw line count, deduplicated triple count)
    counts: dict[str, tuple[int, int]] = field(default_factory=dict)


def _read_triples(path: str, vocab: Vocabulary, split: str) -> tuple[list[Triple], tuple[int, int]]:
    triples: list[Triple] = []
    seen: set[Triple] = set()
    raw = 0
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {split} file {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ParseError(
                    f"{path}:{lineno}: expected 3 tab-separated fields, got {len(fields)}"
                )
            raw += 1
            h, r, t = fields
            triple = (vocab.add_entity(h), vocab.add_relation(r), vocab.add_entity(t))
            if triple in seen:
                continue
            seen.add(triple)
            triples.append(triple)
    if raw == 0:
        raise DataError(f"empty split: {split} file {path} holds no triples")
    if raw != len(triples):
        logger.info("%s: dropped %d duplicate lines (%d raw, %d kept)",
                    path, raw - len(triples), raw, len(triples))
    return triples, (raw, len(triples))


def load_dataset(train_path: str, valid_path: str | None = None,
                 test_path: str | None = None) -> DatasetSplit:
    """Load train (and optionally valid/test) TSV files into one vocabulary.

    Each line is ``head<TAB>relation<TAB>tail``. Duplicate triples within a
    split are dropped and the drop count logged. An empty split is an error.
    """
    vocab = Vocabulary()
    split = DatasetSplit(vocab=vocab, train=[])
    split.train, split.counts["train"] = _read_triples(train_path, vocab, "train")
    if valid_path is not None:
        split.valid, split.counts["valid"] = _read_triples(valid_path, vocab, "valid")
    if test_path is not None:
        split.test, split.counts["test"] = _read_triples(test_path, vocab, "test")
    return split


class KnowledgeGraph:
    """Immutable triple store with direction-indexed adjacency.

    ``neighbors(e, r, forward)`` returns the tuple of tails of (e, r, *)
    when forward, or the heads of (*, r, e) otherwise. The triple set and
    the adjacency are built once from the same list and never mutated.
    """

    def __init__(self, triples: list[Triple], vocab: Vocabulary):
        self.vocab = vocab
        self.n_entities = vocab.n_entities
        self.n_relations = vocab.n_relations
        self.triples: frozenset[Triple] = frozenset(triples)
        fwd: list[dict[int, list[int]]] = [dict() for _ in range(self.n_entities)]
        bwd: list[dict[int, list[int]]] = [dict() for _ in range(self.n_entities)]
        by_rel: dict[int, list[tuple[int, int]]] = {}
        for h, r, t in sorted(self.triples):
            fwd[h].setdefault(r, []).append(t)
            bwd[t].setdefault(r, []).append(h)
            by_rel.setdefault(r, []).append((h, t))
        self._fwd = [{r: tuple(v) for r, v in d.items()} for d in fwd]
        self._bwd = [{r: tuple(v) for r, v in d.items()} for d in bwd]
        # positive pairs per relation in canonical (h, t) order
        self.pairs_by_relation: dict[int, list[tuple[int, int]]] = by_rel

    def neighbors(self, entity: int, relation: int, forward: bool) -> tuple[int, ...]:
        adj = self._fwd if forward else self._bwd
        return adj[entity].get(relation, ())

    def edge_groups(self, entity: int):
        """Yield (relation, forward, neighbors) for every edge group at an entity."""
        for r, nbrs in self._fwd[entity].items():
            yield r, True, nbrs
        for r, nbrs in self._bwd[entity].items():
            yield r, False, nbrs

    def has_triple(self, h: int, r: int, t: int) -> bool:
        return (h, r, t) in self.triples

    def relations_with_triples(self) -> list[int]:
        return sorted(self.pairs_by_relation)

    def __len__(self) -> int:
        return len(self.triples)


def build_graph(triples: list[Triple], vocab: Vocabulary) -> KnowledgeGraph:
    """Index a triple list (normally the train split) over a vocabulary."""
    return KnowledgeGraph(triples, vocab)


@dataclass
class QuerySet:
    """Training queries for one (relation, direction).

    direction=tail holds one (h, answers) query per distinct head of the
    relation, where answers = {t | (h,r,t) in graph}; direction=head is the
    mirror image. Queries are ordered by anchor id.
    """

    relation: int
    direction: str
    queries: list[tuple[int, frozenset[int]]]

    def __len__(self) -> int:
        return len(self.queries)


def queries_for_relation(graph: KnowledgeGraph, relation: int, direction: str) -> QuerySet:
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    grouped: dict[int, set[int]] = {}
    for h, t in graph.pairs_by_relation.get(relation, ()):
        anchor, answer = (h, t) if direction == TAIL else (t, h)
        grouped.setdefault(anchor, set()).add(answer)
    queries = [(a, frozenset(grouped[a])) for a in sorted(grouped)]
    return QuerySet(relation=relation, direction=direction, queries=queries)
