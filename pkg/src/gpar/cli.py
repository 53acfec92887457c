"""Command line interface.

Subcommands: mine, evaluate, predict, explain, select-l, stats.
Exit codes: 0 success, 1 usage or configuration error, 2 data error.
Progress goes to stderr; artifacts carry the run configuration so equal
configurations reproduce equal bytes.
"""

from __future__ import annotations

import argparse
import difflib
import logging
import os
import shutil
import sys

from .errors import ConfigError, DataError
from .evaluate import evaluate, select_max_len, write_per_relation, write_report
from .kg import HEAD, TAIL, build_graph, load_dataset
from .measures import MEASURES
from .mining import MineConfig, load_rules, mine, save_rules
from .predict import TIE_POLICIES, rank_entities, rank_of

logger = logging.getLogger("gpar")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _resolve(name: str, table: dict[str, int], kind: str) -> int:
    ident = table.get(name)
    if ident is not None:
        return ident
    close = difflib.get_close_matches(name, list(table), n=5)
    hint = f" (similar: {', '.join(close)})" if close else ""
    raise DataError(f"unknown {kind} {name!r}{hint}")


def _parse_query(query: str, vocab) -> tuple[int, int, str]:
    """'h r ?' or '? r t' -> (anchor id, relation id, direction)."""
    tokens = query.split()
    if len(tokens) != 3:
        raise ConfigError(f"query must have three tokens, got {query!r}")
    h, r, t = tokens
    if (h == "?") == (t == "?"):
        raise ConfigError(f"query needs exactly one '?' endpoint: {query!r}")
    relation = _resolve(r, vocab.relation_ids, "relation")
    if t == "?":
        return _resolve(h, vocab.entity_ids, "entity"), relation, TAIL
    return _resolve(t, vocab.entity_ids, "entity"), relation, HEAD


def _add_mine_options(sub, with_l=True):
    sub.add_argument("--measure", choices=MEASURES, default="dmap")
    if with_l:
        sub.add_argument("--L", dest="max_len", type=int, default=3,
                         help="longest pattern mined (1-3)")
    sub.add_argument("--K", dest="top_k", type=int, default=1000,
                     help="rules kept per relation and direction")
    sub.add_argument("--pair-cap", type=int, default=0,
                     help="positive pairs sampled per relation during "
                          "candidate generation (0 = all)")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--threads", type=int, default=1)


def _mine_config(args) -> MineConfig:
    cfg = MineConfig(measure=args.measure,
                     max_len=getattr(args, "max_len", 3),
                     top_k=args.top_k,
                     pair_sample_cap=args.pair_cap or None,
                     seed=args.seed,
                     threads=args.threads)
    cfg.validate()
    return cfg


def _cmd_mine(args) -> int:
    config = _mine_config(args)
    split = load_dataset(args.train)
    graph = build_graph(split.train, split.vocab)
    ruleset = mine(graph, config, checkpoint_dir=args.checkpoint_dir)
    save_rules(ruleset, graph, args.out)
    if args.checkpoint_dir and os.path.isdir(args.checkpoint_dir):
        shutil.rmtree(args.checkpoint_dir)
        logger.info("checkpoint directory %s cleared", args.checkpoint_dir)
    n_rules = sum(len(v) for v in ruleset.rules.values())
    logger.info("wrote %d rules to %s", n_rules, args.out)
    return 0


def _cmd_evaluate(args) -> int:
    split = load_dataset(args.train, args.valid, args.test)
    graph = build_graph(split.train, split.vocab)
    ruleset = load_rules(graph, args.rules)
    filter_triples = split.train + split.valid + split.test
    report = evaluate(graph, ruleset, split.test, filter_triples,
                      tie_policy=args.tie_policy, threads=args.threads,
                      include_raw=args.raw)
    report.config.update({"rules_file": args.rules, "train": args.train,
                          "valid": args.valid, "test": args.test})
    for key in ("mrr", "hits@1", "hits@3", "hits@10"):
        print(f"{key}\t{report.metrics[key]:.17g}")
    if args.out:
        write_report(report, args.out)
        logger.info("report written to %s", args.out)
        if args.per_relation:
            write_per_relation(report, args.per_relation)
        if not args.no_figures:
            from . import figures
            stem, _ = os.path.splitext(args.out)
            figures.metrics_figure(report, stem + "_metrics.png")
            figures.per_relation_figure(report, stem + "_relations.png")
            logger.info("figures written next to %s", args.out)
    return 0


def _format_explanation(pairs) -> str:
    return ";".join(f"{rank}:{count}" for rank, count in pairs)


def _cmd_predict(args) -> int:
    split = load_dataset(args.train)
    graph = build_graph(split.train, split.vocab)
    anchor, relation, direction = _parse_query(args.query, split.vocab)
    ruleset = load_rules(graph, args.rules)
    rules = ruleset.for_query(relation, direction)
    ranking = rank_entities(graph, rules, anchor, direction)
    names = split.vocab.entity_names
    for entity in ranking.top(args.top):
        rank = rank_of(ranking, entity, args.tie_policy)
        rank_text = f"{rank:g}"
        explanation = _format_explanation(ranking.explanation(entity))
        print(f"{args.query}\t{rank_text}\t{names[entity]}\t{explanation}")
    return 0


def _cmd_explain(args) -> int:
    split = load_dataset(args.train)
    graph = build_graph(split.train, split.vocab)
    anchor, relation, direction = _parse_query(args.query, split.vocab)
    entity = _resolve(args.entity, split.vocab.entity_ids, "entity")
    ruleset = load_rules(graph, args.rules)
    rules = ruleset.for_query(relation, direction)
    ranking = rank_entities(graph, rules, anchor, direction)
    pairs = ranking.explanation(entity)
    if not pairs:
        print(f"no supporting rules for {args.entity} on {args.query!r}")
        return 0
    from .patterns import pattern_to_string
    rank = rank_of(ranking, entity, args.tie_policy)
    print(f"{args.query}\t{args.entity}\trank {rank:g}")
    for rule_rank, count in pairs:
        rule = rules[rule_rank - 1]
        pattern = pattern_to_string(rule.pattern, split.vocab.relation_names)
        print(f"  rule {rule_rank} matched {count}x  value={rule.value:.6g}  {pattern}")
    return 0


def _cmd_select_l(args) -> int:
    config = _mine_config(args)
    split = load_dataset(args.train, args.valid)
    result = select_max_len(split, config, tie_policy=args.tie_policy)
    for max_len in sorted(result.mrr_by_len):
        print(f"L={max_len}\tvalidation_mrr\t{result.mrr_by_len[max_len]:.17g}")
    print(f"selected\t{result.best}")
    if args.out:
        graph = build_graph(split.train, split.vocab)
        save_rules(result.ruleset_by_len[result.best], graph, args.out)
        logger.info("rules for L=%d written to %s", result.best, args.out)
    if args.figure:
        from . import figures
        figures.length_selection_figure(result.mrr_by_len, result.best, args.figure)
    return 0


def _cmd_stats(args) -> int:
    split = load_dataset(args.train, args.valid, args.test)
    print(f"entities\t{split.vocab.n_entities}")
    print(f"relations\t{split.vocab.n_relations}")
    for name, triples in (("train", split.train), ("valid", split.valid),
                          ("test", split.test)):
        if triples or name == "train":
            raw, kept = split.counts.get(name, (0, 0))
            print(f"{name}\t{kept}" + (f"\t({raw - kept} duplicates dropped)"
                                       if raw != kept else ""))
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="gpar", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mine", help="mine top-K rules per relation and direction")
    p.add_argument("--train", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--checkpoint-dir", default=None,
                   help="store per-relation fragments for resumable runs")
    _add_mine_options(p)
    p.set_defaults(func=_cmd_mine)

    p = sub.add_parser("evaluate", help="filtered MRR/HITS of a rule file")
    p.add_argument("--rules", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--valid", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--tie-policy", choices=TIE_POLICIES, default="average")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--raw", action="store_true",
                   help="additionally report unfiltered metrics")
    p.add_argument("--out", default=None, help="write the report TSV here")
    p.add_argument("--per-relation", default=None,
                   help="write a per-relation breakdown TSV here")
    p.add_argument("--no-figures", action="store_true",
                   help="skip PNG figures next to the report")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("predict", help="rank entities for a single query")
    p.add_argument("query", help="'head relation ?' or '? relation tail'")
    p.add_argument("--rules", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--tie-policy", choices=TIE_POLICIES, default="average")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("explain", help="show the rules behind one prediction")
    p.add_argument("query")
    p.add_argument("entity")
    p.add_argument("--rules", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--tie-policy", choices=TIE_POLICIES, default="average")
    p.set_defaults(func=_cmd_explain)

    p = sub.add_parser("select-l", help="choose the pattern length bound on validation MRR")
    p.add_argument("--train", required=True)
    p.add_argument("--valid", required=True)
    p.add_argument("--tie-policy", choices=TIE_POLICIES, default="average")
    p.add_argument("--out", default=None, help="write the selected rule file here")
    p.add_argument("--figure", default=None, help="write an L-curve PNG here")
    _add_mine_options(p, with_l=False)
    p.set_defaults(func=_cmd_select_l)

    p = sub.add_parser("stats", help="dataset size summary")
    p.add_argument("--train", required=True)
    p.add_argument("--valid", default=None)
    p.add_argument("--test", default=None)
    p.set_defaults(func=_cmd_stats)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
