"""Path patterns and injective matching.

A pattern is an ordered sequence of (relation, direction) steps leading
from variable x through implied intermediates z1..z{l-1} to variable y.
A match maps every variable to a distinct entity such that each step is
realized by an edge of the graph; match_count counts those injective
assignments. Pattern strings use the arrow grammar

    x -[r]-> z1 <-[s]- y

where -[r]-> walks a relation forward and <-[r]- walks it backward.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple

from .errors import ParseError
from .kg import HEAD, TAIL, KnowledgeGraph


class Step(NamedTuple):
    relation: int
    forward: bool


@dataclass(frozen=True)
class PathPattern:
    steps: tuple[Step, ...]

    def __post_init__(self):
        if not self.steps:
            raise ValueError("a path pattern needs at least one step")

    def __len__(self) -> int:
        return len(self.steps)

    def reverse(self) -> "PathPattern":
        """The same pattern read from y to x (directions flipped)."""
        return PathPattern(tuple(Step(s.relation, not s.forward) for s in reversed(self.steps)))


def pattern_to_string(pattern: PathPattern, relation_names: list[str]) -> str:
    parts = ["x"]
    last = len(pattern.steps) - 1
    for i, step in enumerate(pattern.steps):
        name = relation_names[step.relation]
        parts.append(f"-[{name}]->" if step.forward else f"<-[{name}]-")
        parts.append("y" if i == last else f"z{i + 1}")
    return " ".join(parts)


def pattern_parse(text: str, relation_ids: dict[str, int]) -> PathPattern:
    """Inverse of pattern_to_string; raises ParseError with token position."""
    tokens = text.split()
    if not tokens or tokens[0] != "x":
        raise ParseError(f"pattern must start with 'x': {text!r}")
    if len(tokens) < 3 or len(tokens) % 2 == 0:
        raise ParseError(f"truncated pattern: {text!r}")
    steps: list[Step] = []
    n_steps = (len(tokens) - 1) // 2
    for i in range(n_steps):
        arrow = tokens[1 + 2 * i]
        var = tokens[2 + 2 * i]
        if arrow.startswith("-[") and arrow.endswith("]->"):
            name, forward = arrow[2:-3], True
        elif arrow.startswith("<-[") and arrow.endswith("]-"):
            name, forward = arrow[3:-2], False
        else:
            raise ParseError(f"bad step at token {1 + 2 * i}: {arrow!r}")
        rid = relation_ids.get(name)
        if rid is None:
            raise ParseError(f"unknown relation {name!r} at token {1 + 2 * i}")
        expected = "y" if i == n_steps - 1 else f"z{i + 1}"
        if var != expected:
            raise ParseError(f"expected variable {expected!r} at token {2 + 2 * i}, got {var!r}")
        steps.append(Step(rid, forward))
    return PathPattern(tuple(steps))


def match_count(graph: KnowledgeGraph, pattern: PathPattern, h: int, t: int) -> int:
    """Number of injective assignments realizing the pattern between h and t.

    x is pinned to h and y to t; intermediates must be pairwise distinct
    and distinct from both endpoints, so match_count(p, e, e) is 0.
    """
    if h == t:
        return 0
    steps = pattern.steps
    last = len(steps) - 1
    neighbors = graph.neighbors
    triples = graph.triples
    visited = {h, t}

    def walk(node: int, depth: int) -> int:
        rel, fwd = steps[depth]
        if depth == last:
            edge = (node, rel, t) if fwd else (t, rel, node)
            return 1 if edge in triples else 0
        total = 0
        for nb in neighbors(node, rel, fwd):
            if nb not in visited:
                visited.add(nb)
                total += walk(nb, depth + 1)
                visited.remove(nb)
        return total

    return walk(h, 0)


def _frontier(graph: KnowledgeGraph, steps: tuple[Step, ...], anchor: int) -> dict[int, int]:
    """Endpoint -> injective path count over all endpoints reachable from anchor."""
    counts: Counter[int] = Counter()
    neighbors = graph.neighbors
    triples = graph.triples
    last = len(steps) - 1
    visited = {anchor}

    def walk(node: int, depth: int):
        rel, fwd = steps[depth]
        nbrs = neighbors(node, rel, fwd)
        if depth == last:
            counts.update(nbrs)
            # arrivals at on-path nodes are not injective; cancel them
            for v in visited:
                edge = (node, rel, v) if fwd else (v, rel, node)
                if edge in triples:
                    counts[v] -= 1
        else:
            for nb in nbrs:
                if nb not in visited:
                    visited.add(nb)
                    walk(nb, depth + 1)
                    visited.remove(nb)

    walk(anchor, 0)
    return {e: c for e, c in counts.items() if c > 0}


def score_frontier(graph: KnowledgeGraph, pattern: PathPattern, anchor: int,
                   direction: str) -> dict[int, int]:
    """All nonzero match counts seen from one side of a query.

    direction=tail anchors x at the query head and scores candidate tails;
    direction=head walks the reversed pattern from y to score candidate
    heads. frontier[e] equals match_count between anchor and e.
    """
    if direction == TAIL:
        steps = pattern.steps
    elif direction == HEAD:
        steps = pattern.reverse().steps
    else:
        raise ValueError(f"direction must be 'head' or 'tail', got {direction!r}")
    return _frontier(graph, steps, anchor)


def paths_between(graph: KnowledgeGraph, h: int, t: int, max_len: int) -> set[tuple[Step, ...]]:
    """Step sequences of every injective path from h to t, lengths 1..max_len."""
    found: set[tuple[Step, ...]] = set()
    if h == t:
        return found
    out_edges = graph.edge_groups
    visited = {h}
    prefix: list[Step] = []

    def walk(node: int, depth: int):
        for rel, fwd, nbrs in out_edges(node):
            prefix.append(Step(rel, fwd))
            for nb in nbrs:
                if nb == t:
                    found.add(tuple(prefix))
                elif depth < max_len and nb not in visited:
                    visited.add(nb)
                    walk(nb, depth + 1)
                    visited.remove(nb)
            prefix.pop()

    walk(h, 1)
    return found


def sample_pairs(graph: KnowledgeGraph, relation: int, pair_sample_cap: int | None,
                 seed: int) -> list[tuple[int, int]]:
    """The relation's positive pairs, down-sampled deterministically when capped."""
    pairs = graph.pairs_by_relation.get(relation, [])
    if pair_sample_cap is not None and 0 < pair_sample_cap < len(pairs):
        rng = random.Random(f"{seed}:{relation}")
        pairs = sorted(rng.sample(pairs, pair_sample_cap))
    return pairs


def enumerate_candidates(graph: KnowledgeGraph, relation: int, max_len: int,
                         pair_sample_cap: int | None = None, seed: int = 0) -> set[PathPattern]:
    """Instance-driven candidate generation for one consequent relation.

    Walks injective paths of length 1..max_len between (a capped sample of)
    the relation's positive pairs and abstracts each path to its step
    sequence. The single-step pattern identical to the consequent itself is
    excluded; everything else with at least one witnessing pair is kept.
    """
    found: set[tuple[Step, ...]] = set()
    for h, t in sample_pairs(graph, relation, pair_sample_cap, seed):
        found |= paths_between(graph, h, t, max_len)
    found.discard((Step(relation, True),))
    return {PathPattern(steps) for steps in found}
