"""Entity ranking by lexicographic comparison of rule score vectors.

An entity beats another when the highest-ranked rule on which their match
counts differ scores it higher. Rather than materializing K-vectors for
every entity, rank_entities refines tie blocks: all entities start in one
block, and each rule in rank order splits only the blocks that are still
tied. Entities that never score stay in an implicit "rest" block at the
bottom, which keeps per-query work proportional to the frontier sizes
rather than to the entity count.
"""

from __future__ import annotations

from .errors import DataError
from .kg import KnowledgeGraph
from .mining import Rule
from .patterns import score_frontier

_REST = -1

TIE_POLICIES = ("average", "pessimistic", "optimistic")


class PredictionRanking:
    """Ordered tie blocks over the unfiltered universe for one query."""

    def __init__(self, *, order, blocks, locate, rest_size, contributions,
                 filtered, n_entities, rules):
        self._order = order                # explicit block ids, rank order
        self._blocks = blocks              # id -> sorted entity list
        self._locate = locate              # entity -> explicit block id
        self._rest_size = rest_size
        self._contributions = contributions
        self._filtered = filtered
        self._n_entities = n_entities
        self.rules = rules
        starts = {}
        pos = 0
        for bid in order:
            starts[bid] = pos
            pos += len(blocks[bid])
        self._rest_start = pos
        self._starts = starts
        self.universe_size = pos + rest_size

    def block_of(self, entity: int) -> tuple[int, int]:
        """(number of strictly better entities, size of entity's tie block)."""
        if entity < 0 or entity >= self._n_entities:
            raise DataError(f"entity id {entity} out of range")
        if entity in self._filtered:
            raise DataError(f"entity {entity} was filtered out of this ranking")
        bid = self._locate.get(entity)
        if bid is None:
            return self._rest_start, self._rest_size
        return self._starts[bid], len(self._blocks[bid])

    def top(self, m: int) -> list[int]:
        out: list[int] = []
        for bid in self._order:
            for e in self._blocks[bid]:
                if len(out) == m:
                    return out
                out.append(e)
        for e in range(self._n_entities):
            if len(out) == m:
                break
            if e not in self._filtered and e not in self._locate:
                out.append(e)
        return out

    def materialize(self) -> list[list[int]]:
        """All tie blocks as explicit entity lists (rest included)."""
        out = [list(self._blocks[bid]) for bid in self._order]
        rest = [e for e in range(self._n_entities)
                if e not in self._filtered and e not in self._locate]
        if rest:
            out.append(rest)
        return out

    def explanation(self, entity: int) -> list[tuple[int, int]]:
        """(rule rank, match count) pairs that fixed the entity's position."""
        self.block_of(entity)  # validates the entity
        return list(self._contributions.get(entity, ()))


def rank_entities(graph: KnowledgeGraph, rules: list[Rule], anchor: int, direction: str,
                  filter_set=frozenset()) -> PredictionRanking:
    """Rank every non-filtered entity for one query under a rule list.

    With no rules (unknown relation) every entity ties. Filtered entities
    are invisible: they take no block and never affect survivor order.
    """
    filtered = frozenset(filter_set)
    blocks: dict[int, list[int]] = {}
    order: list[int] = []
    locate: dict[int, int] = {}
    contrib: dict[int, list[tuple[int, int]]] = {}
    rest_size = graph.n_entities - len(filtered)
    n_multi = 1 if rest_size > 1 else 0
    next_id = 0

    for rank_idx, rule in enumerate(rules, start=1):
        if n_multi == 0:
            break
        frontier = score_frontier(graph, rule.pattern, anchor, direction)
        by_block: dict[int, dict[int, list[int]]] = {}
        for e, c in frontier.items():
            if e in filtered:
                continue
            bid = locate.get(e, _REST)
            size = rest_size if bid == _REST else len(blocks[bid])
            if size <= 1:
                continue
            by_block.setdefault(bid, {}).setdefault(c, []).append(e)
            contrib.setdefault(e, []).append((rank_idx, c))
        if not by_block:
            continue
        new_order: list[int] = []
        for bid in order:
            split = by_block.get(bid)
            if split is None:
                new_order.append(bid)
                continue
            n_multi -= 1  # only multi blocks get split
            parent = blocks[bid]
            moved: set[int] = set()
            for score in sorted(split, reverse=True):
                members = sorted(split[score])
                nb = next_id
                next_id += 1
                blocks[nb] = members
                for e in members:
                    locate[e] = nb
                moved.update(members)
                new_order.append(nb)
                if len(members) > 1:
                    n_multi += 1
            remainder = [e for e in parent if e not in moved]
            if remainder:
                blocks[bid] = remainder
                new_order.append(bid)
                if len(remainder) > 1:
                    n_multi += 1
            else:
                del blocks[bid]
        rest_split = by_block.get(_REST)
        if rest_split is not None:
            n_multi -= 1
            for score in sorted(rest_split, reverse=True):
                members = sorted(rest_split[score])
                nb = next_id
                next_id += 1
                blocks[nb] = members
                for e in members:
                    locate[e] = nb
                rest_size -= len(members)
                new_order.append(nb)
                if len(members) > 1:
                    n_multi += 1
            if rest_size > 1:
                n_multi += 1
        order = new_order
    return PredictionRanking(order=order, blocks=blocks, locate=locate,
                             rest_size=rest_size, contributions=contrib,
                             filtered=filtered, n_entities=graph.n_entities,
                             rules=rules)


def rank_of(ranking: PredictionRanking, entity: int, tie_policy: str = "average") -> float:
    """Scalar rank of an entity in a tie block of b after s better entities.

    average gives s + (b+1)/2, pessimistic s + b, optimistic s + 1.
    """
    s, b = ranking.block_of(entity)
    if tie_policy == "average":
        return s + (b + 1) / 2
    if tie_policy == "pessimistic":
        return float(s + b)
    if tie_policy == "optimistic":
        return float(s + 1)
    raise DataError(f"tie policy must be one of {TIE_POLICIES}, got {tie_policy!r}")


def explain(ranking: PredictionRanking, entity: int) -> list[tuple[int, int]]:
    """Nonzero (rule rank, match count) pairs behind an entity's position."""
    return ranking.explanation(entity)
