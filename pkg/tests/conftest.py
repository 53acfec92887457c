"""Shared fixtures and independent oracles.

The oracles deliberately avoid the library's data structures where the
logic under test lives: match counting enumerates variable assignments
from a plain triple set, ranking checks go through a dense numpy matrix,
and the lexicographic ranking oracle materializes full score vectors and
sorts them. Slow is fine here; obvious is the point.
"""

from __future__ import annotations

import itertools
from types import SimpleNamespace

import numpy as np
import pytest

from gpar.kg import HEAD, TAIL, Vocabulary, build_graph
from gpar.patterns import PathPattern, Step, match_count


def graph_from_rows(rows):
    """Build (graph, vocab) from (head, relation, tail) name rows."""
    vocab = Vocabulary()
    triples = []
    for h, r, t in rows:
        triples.append((vocab.add_entity(h), vocab.add_relation(r), vocab.add_entity(t)))
    return build_graph(triples, vocab), vocab


def write_split(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write("\t".join(row) + "\n")
    return str(path)


# Three players in one club, two sharing a nationality, and the club's
# country on record. The member/nationality rule then scores UK twice and
# France once when asked where TeamA is.
F1_ROWS = [
    ("p1", "member_of", "TeamA"),
    ("p2", "member_of", "TeamA"),
    ("p3", "member_of", "TeamA"),
    ("p1", "nationality", "UK"),
    ("p2", "nationality", "UK"),
    ("p3", "nationality", "France"),
    ("TeamA", "located_in", "UK"),
    ("TeamB", "located_in", "France"),
]

# Larger club/staff graph. Team C has no located_in edge; the member rule
# and the manager rule disagree about where it should be, which is what
# the measure comparisons in the tests lean on.
SPORTS_ROWS = (
    [(p, "member_of", team) for p, team in [
        ("p1", "TeamA"), ("p2", "TeamA"), ("p3", "TeamA"),
        ("p4", "TeamB"), ("p5", "TeamB"), ("p6", "TeamB"), ("p7", "TeamB"),
        ("p8", "TeamC"), ("p9", "TeamC"), ("p10", "TeamC")]]
    + [(m, "manager_of", team) for m, team in [
        ("m1", "TeamA"), ("m2", "TeamA"), ("m3", "TeamB"),
        ("m4", "TeamB"), ("m5", "TeamC")]]
    + [(p, "nationality", c) for p, c in [
        ("p1", "UK"), ("p2", "UK"), ("p3", "France"),
        ("p4", "France"), ("p5", "France"), ("p6", "Spain"), ("p7", "Portugal"),
        ("p8", "Italy"), ("p9", "Italy"), ("p10", "Spain"),
        ("m1", "UK"), ("m2", "Italy"), ("m3", "France"),
        ("m4", "Portugal"), ("m5", "Germany")]]
    + [("TeamA", "located_in", "UK"), ("TeamB", "located_in", "France")]
)


def _namespace(rows):
    graph, vocab = graph_from_rows(rows)
    return SimpleNamespace(
        rows=rows, graph=graph, vocab=vocab,
        e=vocab.entity_ids.__getitem__, r=vocab.relation_ids.__getitem__)


@pytest.fixture
def f1():
    return _namespace(F1_ROWS)


@pytest.fixture
def sports():
    return _namespace(SPORTS_ROWS)


def member_nationality_pattern(vocab) -> PathPattern:
    """x <-[member_of]- z1 -[nationality]-> y"""
    return PathPattern((Step(vocab.relation_ids["member_of"], False),
                        Step(vocab.relation_ids["nationality"], True)))


def manager_nationality_pattern(vocab) -> PathPattern:
    return PathPattern((Step(vocab.relation_ids["manager_of"], False),
                        Step(vocab.relation_ids["nationality"], True)))


# ---------------------------------------------------------------- oracles


def oracle_match_count(triples, n_entities, pattern, h, t) -> int:
    """Count injective assignments by brute force over all entity tuples."""
    edges = set(triples)
    count = 0
    for mids in itertools.product(range(n_entities), repeat=len(pattern) - 1):
        nodes = (h, *mids, t)
        if len(set(nodes)) != len(nodes):
            continue
        ok = True
        for (rel, fwd), a, b in zip(pattern.steps, nodes, nodes[1:]):
            edge = (a, rel, b) if fwd else (b, rel, a)
            if edge not in edges:
                ok = False
                break
        if ok:
            count += 1
    return count


def oracle_frontier(triples, n_entities, pattern, anchor, direction):
    """Per-candidate oracle counts, zeros omitted."""
    out = {}
    for cand in range(n_entities):
        if direction == TAIL:
            c = oracle_match_count(triples, n_entities, pattern, anchor, cand)
        else:
            c = oracle_match_count(triples, n_entities, pattern, cand, anchor)
        if c:
            out[cand] = c
    return out


def dense_rank_matrix(ranking, index):
    """n x n matrix, entry (row of entity, k-1) = mass of entity at rank k."""
    n = ranking.n
    mat = np.zeros((n, n))
    for block in ranking.blocks:
        lo = block.start - 1
        for e in block.entities:
            mat[index[e], lo:lo + block.size] = 1.0 / block.size
    return mat


def dense_dap(ranking, index, relevant) -> float:
    """dAP from the dense matrix: mass-weighted precision, no closed form."""
    mat = dense_rank_matrix(ranking, index)
    mass = mat[[index[e] for e in relevant], :].sum(axis=0)
    cum = np.cumsum(mass)
    k = np.arange(1, ranking.n + 1)
    return float((mass * cum / k).sum() / len(relevant))


def classical_ap(order, relevant) -> float:
    """Textbook AP over a strict (tie-free) ranking."""
    hits = 0
    total = 0.0
    for i, e in enumerate(order, start=1):
        if e in relevant:
            hits += 1
            total += hits / i
    return total / len(relevant)


def oracle_rank_blocks(graph, rules, anchor, direction, filter_set=frozenset()):
    """Materialize every entity's score vector, sort, group ties."""
    vectors = {}
    for e in range(graph.n_entities):
        if e in filter_set:
            continue
        if direction == TAIL:
            vec = tuple(match_count(graph, rule.pattern, anchor, e) for rule in rules)
        else:
            vec = tuple(match_count(graph, rule.pattern, e, anchor) for rule in rules)
        vectors[e] = vec
    groups = {}
    for e, vec in vectors.items():
        groups.setdefault(vec, []).append(e)
    return [sorted(groups[vec]) for vec in sorted(groups, reverse=True)]
