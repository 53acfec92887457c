"""Rule quality measures over training queries.

conf is the ratio of matched answers to matched entities, summed over the
queries of one (relation, direction). dmap and fdmap average a tie-aware
variant of average precision in which an entity tied with b-1 others
spreads rank mass 1/b over the b ranks the tie straddles; the resulting
rank matrix is doubly stochastic.

The dAP of such a ranking is computed block by block. Within a tie block
of size b starting after a entities, holding rho relevant entities out of
C_prev relevant mass above it, each relevant column contributes

    sum_{d=1..b} (C_prev + d*rho/b) / (a+d) * (1/b)

which collapses to a closed form in harmonic numbers H:

    (rho/b) * ((C_prev - a*rho/b) * (H[a+b] - H[a]) + rho)

All measures run either in float arithmetic (mining) or exactly over
Fractions (verification); the code paths are shared.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from .errors import ConfigError
from .kg import KnowledgeGraph, QuerySet, queries_for_relation
from .patterns import PathPattern, score_frontier

MEASURES = ("conf", "dmap", "fdmap")

_HARM_FLOAT = np.zeros(1)
_HARM_EXACT = [Fraction(0)]


def _harmonics(n: int) -> np.ndarray:
    """Float table of harmonic numbers H[0..n], grown on demand."""
    global _HARM_FLOAT
    if len(_HARM_FLOAT) <= n:
        size = max(n + 1, 2 * len(_HARM_FLOAT))
        arr = np.zeros(size)
        arr[1:] = np.cumsum(1.0 / np.arange(1, size))
        _HARM_FLOAT = arr
    return _HARM_FLOAT


def _harmonics_exact(n: int) -> list[Fraction]:
    while len(_HARM_EXACT) <= n:
        _HARM_EXACT.append(_HARM_EXACT[-1] + Fraction(1, len(_HARM_EXACT)))
    return _HARM_EXACT


@dataclass(frozen=True)
class RankBlock:
    entities: tuple[int, ...]
    start: int  # 1-based first rank of the block

    @property
    def size(self) -> int:
        return len(self.entities)


@dataclass
class DistributedRanking:
    """Maximal same-score tie blocks in strictly decreasing score order."""

    blocks: list[RankBlock]
    n: int


def distributed_ranking(scores: Mapping[int, int], universe: Iterable[int]) -> DistributedRanking:
    """Group a universe of entities into tie blocks by descending score.

    Entities absent from the score mapping score 0; scores must be
    nonnegative integers.
    """
    groups: dict[int, list[int]] = {}
    n = 0
    for e in universe:
        s = scores.get(e, 0)
        if s < 0:
            raise ValueError(f"negative score {s} for entity {e}")
        groups.setdefault(s, []).append(e)
        n += 1
    blocks = []
    start = 1
    for s in sorted(groups, reverse=True):
        ents = tuple(sorted(groups[s]))
        blocks.append(RankBlock(entities=ents, start=start))
        start += len(ents)
    return DistributedRanking(blocks=blocks, n=n)


def _dap_blocks(blocks, harm, one):
    """dAP from (size, n_relevant) tie blocks in rank order.

    one picks the arithmetic: 1.0 for floats, Fraction(1) for exact.
    """
    n_relevant = sum(rho for _, rho in blocks)
    if n_relevant == 0:
        raise ValueError("empty relevant set")
    a = 0
    cum = 0
    total = one * 0
    for b, rho in blocks:
        if rho:
            g = one * rho / b
            hdiff = harm[a + b] - harm[a]
            total += g * ((cum - a * g) * hdiff + g * b)
        a += b
        cum += rho
    return total / n_relevant


def d_average_precision(ranking: DistributedRanking, relevant: set[int], exact: bool = False):
    """Tie-aware average precision of a distributed ranking."""
    if not relevant:
        raise ValueError("empty relevant set")
    members = set()
    for block in ranking.blocks:
        members.update(block.entities)
    missing = relevant - members
    if missing:
        raise ValueError(f"relevant entities not in ranking: {sorted(missing)}")
    blocks = [(block.size, len(relevant.intersection(block.entities)))
              for block in ranking.blocks]
    harm = _harmonics_exact(ranking.n) if exact else _harmonics(ranking.n)
    one = Fraction(1) if exact else 1.0
    value = _dap_blocks(blocks, harm, one)
    return value if exact else float(value)


def _frontier_blocks(frontier: dict[int, int], answers: frozenset[int], n: int):
    """Tie blocks of the full n-entity ranking implied by a sparse frontier."""
    by_score: dict[int, list[int]] = {}
    for e, c in frontier.items():
        by_score.setdefault(c, []).append(e)
    blocks = []
    nz_relevant = 0
    for s in sorted(by_score, reverse=True):
        ents = by_score[s]
        rho = sum(1 for e in ents if e in answers)
        nz_relevant += rho
        blocks.append((len(ents), rho))
    zero = n - len(frontier)
    if zero:
        blocks.append((zero, len(answers) - nz_relevant))
    return blocks


def _dap_for_query(frontier, answers, n, harm, one):
    return _dap_blocks(_frontier_blocks(frontier, answers, n), harm, one)


def _fdap_for_query(frontier, answers, n, harm, one):
    """Mean over answers of the dAP of the per-answer filtered ranking.

    For answer e the other answers leave the universe; e is then the only
    relevant entity, sitting in a tie block of b entities below a strictly
    better ones, giving dAP = 1/b - a/b^2 * (H[a+b] - H[a]).
    """
    score_sizes = Counter(frontier.values())
    gt_total: dict[int, int] = {}
    run = 0
    for s in sorted(score_sizes, reverse=True):
        gt_total[s] = run
        run += score_sizes[s]
    ans_scores = Counter(frontier.get(e, 0) for e in answers)
    n_zero = n - len(frontier)
    total = one * 0
    for sigma, n_ans in ans_scores.items():
        if sigma > 0:
            gt, eq = gt_total[sigma], score_sizes[sigma]
        else:
            gt, eq = len(frontier), n_zero
        ans_gt = sum(c for s, c in ans_scores.items() if s > sigma)
        a = gt - ans_gt
        b = eq - n_ans + 1
        dap = one / b - (one * a / (b * b)) * (harm[a + b] - harm[a])
        total += n_ans * dap
    return total / len(answers)


def pattern_measure(graph: KnowledgeGraph, pattern: PathPattern, queryset: QuerySet,
                    measure: str, exact: bool = False):
    """(value, support) of one rule candidate over a query set.

    support counts the positive pairs the pattern matches, i.e. answers
    with a nonzero frontier score, totalled over the queries.
    """
    if measure not in MEASURES:
        raise ConfigError(f"unknown measure {measure!r}; expected one of {MEASURES}")
    n = graph.n_entities
    one = Fraction(1) if exact else 1.0
    support = 0
    if measure == "conf":
        num = den = 0
        for anchor, answers in queryset.queries:
            fr = score_frontier(graph, pattern, anchor, queryset.direction)
            matched = sum(1 for e in answers if e in fr)
            num += matched
            den += len(fr)
            support += matched
        if den == 0:
            return one * 0, 0
        return (Fraction(num, den) if exact else num / den), support
    if not queryset.queries:
        raise ValueError("empty query set")
    harm = _harmonics_exact(n) if exact else _harmonics(n)
    per_query = _dap_for_query if measure == "dmap" else _fdap_for_query
    acc = one * 0
    for anchor, answers in queryset.queries:
        fr = score_frontier(graph, pattern, anchor, queryset.direction)
        support += sum(1 for e in answers if e in fr)
        acc += per_query(fr, answers, n, harm, one)
    return acc / len(queryset.queries), support


@dataclass(frozen=True)
class MeasureValue:
    value: float | Fraction
    kind: str


def _measure(graph, pattern, relation, direction, queries, measure, exact) -> MeasureValue:
    if queries is None:
        queries = queries_for_relation(graph, relation, direction)
    value, _ = pattern_measure(graph, pattern, queries, measure, exact)
    return MeasureValue(value=value if exact else float(value), kind=f"{measure}_{direction}")


def conf(graph, pattern, relation, direction, queries=None, exact=False) -> MeasureValue:
    """Matched answers over matched entities, summed across queries."""
    return _measure(graph, pattern, relation, direction, queries, "conf", exact)


def dmap(graph, pattern, relation, direction, queries=None, exact=False) -> MeasureValue:
    """Mean dAP of the full-universe rankings induced by the pattern."""
    return _measure(graph, pattern, relation, direction, queries, "dmap", exact)


def fdmap(graph, pattern, relation, direction, queries=None, exact=False) -> MeasureValue:
    """Mean dAP of per-answer rankings with the other answers filtered out."""
    return _measure(graph, pattern, relation, direction, queries, "fdmap", exact)
