"""Top-K rule mining per (relation, direction), with checkpointed resume.

Candidates come from instance paths between positive pairs; every
candidate is scored with the configured measure over the full query set
of the relation and direction. The K best survive, ordered by value
descending, then pattern length ascending, then canonical pattern string.
Results do not depend on the worker count: each candidate is scored in
one process with a fixed query order, and the final ordering is a sort.

Rule files are plain TSV under a versioned header:

    #gpar-rules v1 measure=dmap L=2 K=1000
    #config seed=0
    located_in<TAB>tail<TAB>0.5714...<TAB>2<TAB>x <-[member_of]- z1 -[nationality]-> y
"""

from __future__ import annotations

import json
import logging
import multiprocessing
import os
import re
from dataclasses import dataclass, field
from functools import lru_cache

from .errors import ConfigError, DataError, ParseError
from .kg import DIRECTIONS, KnowledgeGraph, queries_for_relation
from .measures import MEASURES, pattern_measure
from .patterns import (PathPattern, Step, paths_between, pattern_parse,
                       pattern_to_string, sample_pairs)

logger = logging.getLogger("gpar")

RULE_FILE_VERSION = 1


@dataclass
class MineConfig:
    measure: str = "dmap"
    max_len: int = 3          # L: longest pattern mined
    top_k: int = 1000         # K: rules kept per (relation, direction)
    pair_sample_cap: int | None = None
    seed: int = 0
    threads: int = 1

    def validate(self):
        if self.measure not in MEASURES:
            raise ConfigError(f"measure must be one of {MEASURES}, got {self.measure!r}")
        if self.max_len not in (1, 2, 3):
            raise ConfigError(f"L must be 1, 2 or 3, got {self.max_len}")
        if self.top_k < 1:
            raise ConfigError(f"K must be positive, got {self.top_k}")
        if self.pair_sample_cap is not None and self.pair_sample_cap < 1:
            raise ConfigError(f"pair sample cap must be positive, got {self.pair_sample_cap}")
        if self.threads < 1:
            raise ConfigError(f"threads must be positive, got {self.threads}")

    def echo(self) -> dict[str, str]:
        """Key=value form embedded in artifacts; thread count deliberately
        left out so worker count never changes output bytes."""
        cap = "none" if self.pair_sample_cap is None else str(self.pair_sample_cap)
        return {
            "measure": self.measure,
            "L": str(self.max_len),
            "K": str(self.top_k),
            "pair_sample_cap": cap,
            "seed": str(self.seed),
        }


@dataclass(frozen=True)
class Rule:
    relation: int
    direction: str
    pattern: PathPattern
    value: float
    support: int


@dataclass
class RuleSet:
    measure: str
    max_len: int
    top_k: int
    rules: dict[tuple[int, str], list[Rule]] = field(default_factory=dict)
    config: dict[str, str] = field(default_factory=dict)

    def for_query(self, relation: int, direction: str) -> list[Rule]:
        return self.rules.get((relation, direction), [])


# Worker globals, inherited by fork before the pool starts.
_G: KnowledgeGraph | None = None
_CFG: MineConfig | None = None


@lru_cache(maxsize=4)
def _worker_queries(relation: int, direction: str):
    return queries_for_relation(_G, relation, direction)


def _enum_chunk(args) -> set[tuple[Step, ...]]:
    relation, pairs = args
    found: set[tuple[Step, ...]] = set()
    for h, t in pairs:
        found |= paths_between(_G, h, t, _CFG.max_len)
    return found


def _score_chunk(args) -> list[tuple[float, int]]:
    relation, direction, patterns = args
    qs = _worker_queries(relation, direction)
    return [tuple(pattern_measure(_G, p, qs, _CFG.measure)) for p in patterns]


def _chunks(items: list, n_workers: int) -> list[list]:
    if not items:
        return []
    size = max(1, -(-len(items) // (n_workers * 4)))
    return [items[i:i + size] for i in range(0, len(items), size)]


def _sort_key(graph: KnowledgeGraph):
    names = graph.vocab.relation_names

    def key(rule: Rule):
        return (-rule.value, len(rule.pattern), pattern_to_string(rule.pattern, names))

    return key


def _mine_direction(graph, relation, direction, candidates, config, pool) -> list[Rule]:
    work = [(relation, direction, chunk) for chunk in _chunks(candidates, config.threads)]
    if pool is None:
        scored_chunks = [_score_chunk(w) for w in work]
    else:
        scored_chunks = pool.map(_score_chunk, work)
    rules = []
    for (_, _, patterns), scores in zip(work, scored_chunks):
        for pattern, (value, support) in zip(patterns, scores):
            rules.append(Rule(relation=relation, direction=direction, pattern=pattern,
                              value=float(value), support=support))
    rules.sort(key=_sort_key(graph))
    return rules[:config.top_k]


def _enumerate(graph, relation, config, pool) -> list[PathPattern]:
    pairs = sample_pairs(graph, relation, config.pair_sample_cap, config.seed)
    found: set[tuple[Step, ...]] = set()
    if pool is None:
        found = _enum_chunk((relation, pairs))
    else:
        for part in pool.map(_enum_chunk, [(relation, c) for c in _chunks(pairs, config.threads)]):
            found |= part
    found.discard((Step(relation, True),))
    # canonical order so chunking is reproducible
    return sorted((PathPattern(steps) for steps in found), key=lambda p: p.steps)


def mine(graph: KnowledgeGraph, config: MineConfig,
         checkpoint_dir: str | None = None) -> RuleSet:
    """Mine top-K rules for every relation with training triples.

    With a checkpoint directory, finished (relation, direction) results
    are written as fragment files and a rerun resumes past them; the
    fragment content is byte-identical to the matching final rule lines.
    """
    global _G, _CFG
    config.validate()
    ruleset = RuleSet(measure=config.measure, max_len=config.max_len,
                      top_k=config.top_k, config=config.echo())
    ckpt = _Checkpoint(checkpoint_dir, graph, config) if checkpoint_dir else None

    _G, _CFG = graph, config
    _worker_queries.cache_clear()
    pool = None
    if config.threads > 1:
        pool = multiprocessing.get_context("fork").Pool(config.threads)
    try:
        relations = graph.relations_with_triples()
        for i, relation in enumerate(relations, start=1):
            done = ckpt.load(relation) if ckpt else None
            if done is not None:
                for direction in DIRECTIONS:
                    ruleset.rules[(relation, direction)] = done[direction]
                logger.info("relation %d/%d resumed from checkpoint", i, len(relations))
                continue
            candidates = _enumerate(graph, relation, config, pool)
            for direction in DIRECTIONS:
                ruleset.rules[(relation, direction)] = _mine_direction(
                    graph, relation, direction, candidates, config, pool)
            if ckpt:
                ckpt.save(relation, {d: ruleset.rules[(relation, d)] for d in DIRECTIONS})
            logger.info("relation %d/%d done: %s (%d candidates)",
                        i, len(relations), graph.vocab.relation_names[relation],
                        len(candidates))
    finally:
        if pool is not None:
            pool.close()
            pool.join()
        _G = _CFG = None
    return ruleset


def _format_rule(rule: Rule, names: list[str]) -> str:
    return "\t".join([
        names[rule.relation],
        rule.direction,
        f"{rule.value:.17g}",
        str(rule.support),
        pattern_to_string(rule.pattern, names),
    ])


def _parse_rule_line(line: str, lineno: int, path: str, vocab) -> Rule:
    fields = line.split("\t")
    if len(fields) != 5:
        raise ParseError(f"{path}:{lineno}: expected 5 tab-separated fields, got {len(fields)}")
    rel_name, direction, value_text, support_text, pattern_text = fields
    relation = vocab.relation_ids.get(rel_name)
    if relation is None:
        raise DataError(f"{path}:{lineno}: unknown relation {rel_name!r} in rule file")
    if direction not in DIRECTIONS:
        raise ParseError(f"{path}:{lineno}: direction must be head or tail, got {direction!r}")
    try:
        value = float(value_text)
    except ValueError as exc:
        raise ParseError(f"{path}:{lineno}: bad measure value {value_text!r}") from exc
    try:
        support = int(support_text)
    except ValueError as exc:
        raise ParseError(f"{path}:{lineno}: bad support {support_text!r}") from exc
    try:
        pattern = pattern_parse(pattern_text, vocab.relation_ids)
    except ParseError as exc:
        raise ParseError(f"{path}:{lineno}: {exc}") from exc
    return Rule(relation=relation, direction=direction, pattern=pattern,
                value=value, support=support)


def save_rules(ruleset: RuleSet, graph: KnowledgeGraph, path: str):
    """Write a rule file; line order is fixed so equal configs give equal bytes."""
    names = graph.vocab.relation_names
    lines = [f"#gpar-rules v{RULE_FILE_VERSION} measure={ruleset.measure} "
             f"L={ruleset.max_len} K={ruleset.top_k}"]
    for key in sorted(ruleset.config):
        if key in ("measure", "L", "K"):
            continue
        lines.append(f"#config {key}={ruleset.config[key]}")
    for relation, direction in sorted(ruleset.rules):
        for rule in ruleset.rules[(relation, direction)]:
            lines.append(_format_rule(rule, names))
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


_HEADER_RE = re.compile(r"^#gpar-rules v(\d+) measure=(\S+) L=(\d+) K=(\d+)$")


def load_rules(graph: KnowledgeGraph, path: str) -> RuleSet:
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read rule file {path}: {exc}") from exc
    with fh:
        header = fh.readline().rstrip("\n")
        m = _HEADER_RE.match(header)
        if not m:
            raise ParseError(f"{path}:1: not a rule file (bad header {header!r})")
        version = int(m.group(1))
        if version != RULE_FILE_VERSION:
            raise DataError(f"{path}: unsupported rule file version {version}, "
                            f"this build reads v{RULE_FILE_VERSION}")
        ruleset = RuleSet(measure=m.group(2), max_len=int(m.group(3)), top_k=int(m.group(4)))
        ruleset.config = {"measure": m.group(2), "L": m.group(3), "K": m.group(4)}
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#config "):
                key, _, value = line[len("#config "):].partition("=")
                ruleset.config[key] = value
                continue
            if line.startswith("#"):
                continue
            rule = _parse_rule_line(line, lineno, path, graph.vocab)
            ruleset.rules.setdefault((rule.relation, rule.direction), []).append(rule)
    return ruleset


class _Checkpoint:
    """Fragment store for resumable mining runs.

    One TSV fragment per finished relation plus a manifest that pins the
    mining config and graph shape; resuming under a different config or
    dataset is refused rather than silently mixed.
    """

    def __init__(self, directory: str, graph: KnowledgeGraph, config: MineConfig):
        self.dir = directory
        self.graph = graph
        os.makedirs(directory, exist_ok=True)
        manifest = {
            "config": config.echo(),
            "graph": {"entities": graph.n_entities, "relations": graph.n_relations,
                      "triples": len(graph)},
        }
        mpath = os.path.join(directory, "manifest.json")
        if os.path.exists(mpath):
            with open(mpath, encoding="utf-8") as fh:
                previous = json.load(fh)
            if previous != manifest:
                raise DataError(
                    f"checkpoint directory {directory} was written by a different "
                    f"run configuration; remove it or pick another directory")
        else:
            with open(mpath, "w", encoding="utf-8") as fh:
                json.dump(manifest, fh, indent=1, sort_keys=True)

    def _path(self, relation: int) -> str:
        return os.path.join(self.dir, f"rel{relation:06d}.tsv")

    def load(self, relation: int) -> dict[str, list[Rule]] | None:
        path = self._path(relation)
        if not os.path.exists(path):
            return None
        out: dict[str, list[Rule]] = {d: [] for d in DIRECTIONS}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                rule = _parse_rule_line(line, lineno, path, self.graph.vocab)
                out[rule.direction].append(rule)
        return out

    def save(self, relation: int, by_direction: dict[str, list[Rule]]):
        names = self.graph.vocab.relation_names
        lines = []
        for direction in sorted(by_direction):
            lines.extend(_format_rule(r, names) for r in by_direction[direction])
        tmp = self._path(relation) + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + ("\n" if lines else ""))
        os.replace(tmp, self._path(relation))
