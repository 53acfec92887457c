"""Filtered link-prediction evaluation and report emission.

Every test triple poses two queries, one per direction. A query's
candidate set is the full entity vocabulary minus every entity that forms
a known triple with the anchor under the same relation anywhere in
train/valid/test, except the query's own target. Reciprocal ranks and
HITS counters are reduced in test-file order, so a rerun of the same
configuration reproduces the report byte for byte.
"""

from __future__ import annotations

import logging
import multiprocessing
from dataclasses import dataclass, field

from .errors import ConfigError
from .kg import HEAD, TAIL, DatasetSplit, KnowledgeGraph, Triple, build_graph
from .mining import MineConfig, RuleSet, mine
from .predict import TIE_POLICIES, rank_entities, rank_of

logger = logging.getLogger("gpar")

HITS_LEVELS = (1, 3, 10)

REPORT_VERSION = 1


@dataclass
class EvalReport:
    metrics: dict[str, float]
    n_queries: int
    tie_policy: str
    per_relation: list[dict] = field(default_factory=list)
    config: dict[str, str] = field(default_factory=dict)


def _known_maps(triples) -> tuple[dict, dict]:
    known_tail: dict[tuple[int, int], set[int]] = {}
    known_head: dict[tuple[int, int], set[int]] = {}
    for h, r, t in triples:
        known_tail.setdefault((h, r), set()).add(t)
        known_head.setdefault((t, r), set()).add(h)
    return known_tail, known_head


# Worker globals inherited across fork.
_G: KnowledgeGraph | None = None
_RULES: RuleSet | None = None
_KNOWN: tuple[dict, dict] | None = None
_POLICY = "average"
_RAW = False


def _query_rank(anchor: int, relation: int, direction: str, target: int,
                filter_set) -> tuple[float, float | None]:
    rules = _RULES.for_query(relation, direction)
    ranking = rank_entities(_G, rules, anchor, direction, filter_set)
    filtered_rank = rank_of(ranking, target, _POLICY)
    raw_rank = None
    if _RAW:
        raw = rank_entities(_G, rules, anchor, direction)
        raw_rank = rank_of(raw, target, _POLICY)
    return filtered_rank, raw_rank


def _eval_chunk(triples: list[Triple]) -> list[tuple]:
    known_tail, known_head = _KNOWN
    out = []
    for h, r, t in triples:
        tail_filter = known_tail.get((h, r), set()) - {t}
        head_filter = known_head.get((t, r), set()) - {h}
        tail_rank, tail_raw = _query_rank(h, r, TAIL, t, tail_filter)
        head_rank, head_raw = _query_rank(t, r, HEAD, h, head_filter)
        out.append((r, tail_rank, head_rank, tail_raw, head_raw))
    return out


class _Accumulator:
    def __init__(self):
        self.rr = 0.0
        self.hits = {k: 0 for k in HITS_LEVELS}
        self.n = 0

    def add(self, rank: float):
        self.rr += 1.0 / rank
        for k in HITS_LEVELS:
            if rank <= k:
                self.hits[k] += 1
        self.n += 1

    def metrics(self) -> dict[str, float]:
        if self.n == 0:
            return {"mrr": 0.0, **{f"hits@{k}": 0.0 for k in HITS_LEVELS}}
        out = {"mrr": self.rr / self.n}
        for k in HITS_LEVELS:
            out[f"hits@{k}"] = self.hits[k] / self.n
        return out


def evaluate(graph: KnowledgeGraph, ruleset: RuleSet, test_triples: list[Triple],
             filter_triples: list[Triple], tie_policy: str = "average",
             threads: int = 1, include_raw: bool = False) -> EvalReport:
    """Filtered MRR and HITS over both query directions of the test triples.

    filter_triples is the union of splits that defines "known" for
    filtering; the evaluated triples must be part of it for the protocol
    to exempt only the target.
    """
    global _G, _RULES, _KNOWN, _POLICY, _RAW
    if tie_policy not in TIE_POLICIES:
        raise ConfigError(f"tie policy must be one of {TIE_POLICIES}, got {tie_policy!r}")
    if threads < 1:
        raise ConfigError(f"threads must be positive, got {threads}")
    _G, _RULES, _KNOWN = graph, ruleset, _known_maps(filter_triples)
    _POLICY, _RAW = tie_policy, include_raw

    try:
        if threads > 1 and len(test_triples) > 1:
            size = max(1, -(-len(test_triples) // (threads * 4)))
            chunks = [test_triples[i:i + size] for i in range(0, len(test_triples), size)]
            pool = multiprocessing.get_context("fork").Pool(threads)
            try:
                rows_per_chunk = pool.map(_eval_chunk, chunks)
            finally:
                pool.close()
                pool.join()
            rows = [row for part in rows_per_chunk for row in part]
        else:
            rows = []
            for i in range(0, len(test_triples), 1000):
                rows.extend(_eval_chunk(test_triples[i:i + 1000]))
                if len(test_triples) > 1000:
                    logger.info("evaluated %d/%d test triples",
                                min(i + 1000, len(test_triples)), len(test_triples))
    finally:
        _G = _RULES = _KNOWN = None

    overall = _Accumulator()
    raw_overall = _Accumulator()
    by_rel: dict[tuple[int, str], _Accumulator] = {}
    for r, tail_rank, head_rank, tail_raw, head_raw in rows:
        for direction, rank in ((TAIL, tail_rank), (HEAD, head_rank)):
            overall.add(rank)
            by_rel.setdefault((r, direction), _Accumulator()).add(rank)
        if include_raw:
            raw_overall.add(tail_raw)
            raw_overall.add(head_raw)

    metrics = overall.metrics()
    if include_raw:
        metrics.update({f"raw_{k}": v for k, v in raw_overall.metrics().items()})
    names = graph.vocab.relation_names
    per_relation = []
    for (r, direction) in sorted(by_rel):
        acc = by_rel[(r, direction)]
        row = {"relation": names[r], "direction": direction, "queries": acc.n}
        row.update(acc.metrics())
        per_relation.append(row)
    return EvalReport(metrics=metrics, n_queries=overall.n, tie_policy=tie_policy,
                      per_relation=per_relation,
                      config=dict(ruleset.config))


@dataclass
class SelectLResult:
    best: int
    mrr_by_len: dict[int, float]
    ruleset_by_len: dict[int, RuleSet]


def select_max_len(split: DatasetSplit, config: MineConfig, candidates=(1, 2, 3),
                   tie_policy: str = "average") -> SelectLResult:
    """Pick the pattern length bound by validation MRR; ties go short.

    Rules are mined on train alone for each candidate bound, and validation
    queries filter against train plus valid only.
    """
    if not split.valid:
        raise ConfigError("length selection needs a validation split")
    graph = build_graph(split.train, split.vocab)
    filter_triples = split.train + split.valid
    mrr_by_len: dict[int, float] = {}
    ruleset_by_len: dict[int, RuleSet] = {}
    for max_len in candidates:
        cfg = MineConfig(measure=config.measure, max_len=max_len, top_k=config.top_k,
                         pair_sample_cap=config.pair_sample_cap, seed=config.seed,
                         threads=config.threads)
        ruleset = mine(graph, cfg)
        report = evaluate(graph, ruleset, split.valid, filter_triples,
                          tie_policy=tie_policy, threads=config.threads)
        mrr_by_len[max_len] = report.metrics["mrr"]
        ruleset_by_len[max_len] = ruleset
        logger.info("L=%d validation mrr=%.6f", max_len, report.metrics["mrr"])
    best = max(mrr_by_len, key=lambda length: (mrr_by_len[length], -length))
    return SelectLResult(best=best, mrr_by_len=mrr_by_len, ruleset_by_len=ruleset_by_len)


def write_report(report: EvalReport, path: str):
    """metric<TAB>value lines under a versioned header, config echoed first."""
    lines = [f"#gpar-report v{REPORT_VERSION}"]
    for key in sorted(report.config):
        lines.append(f"config.{key}\t{report.config[key]}")
    lines.append(f"tie_policy\t{report.tie_policy}")
    lines.append(f"queries\t{report.n_queries}")
    lines.append(f"mrr\t{report.metrics['mrr']:.17g}")
    for k in HITS_LEVELS:
        lines.append(f"hits@{k}\t{report.metrics[f'hits@{k}']:.17g}")
    for key in sorted(report.metrics):
        if key.startswith("raw_"):
            lines.append(f"{key}\t{report.metrics[key]:.17g}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_per_relation(report: EvalReport, path: str):
    cols = ["relation", "direction", "queries", "mrr"] + [f"hits@{k}" for k in HITS_LEVELS]
    lines = ["\t".join(cols)]
    for row in report.per_relation:
        cells = [str(row["relation"]), row["direction"], str(row["queries"]),
                 f"{row['mrr']:.17g}"]
        cells += [f"{row[f'hits@{k}']:.17g}" for k in HITS_LEVELS]
        lines.append("\t".join(cells))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
