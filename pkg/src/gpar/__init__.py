"""Rule mining and entity-ranking link prediction over knowledge graphs."""

from .errors import ConfigError, DataError, ParseError
from .evaluate import (EvalReport, SelectLResult, evaluate, select_max_len,
                       write_per_relation, write_report)
from .kg import (HEAD, TAIL, DatasetSplit, KnowledgeGraph, QuerySet, Vocabulary,
                 build_graph, load_dataset, queries_for_relation)
from .measures import (DistributedRanking, MeasureValue, RankBlock, conf,
                       d_average_precision, distributed_ranking, dmap, fdmap,
                       pattern_measure)
from .mining import (MineConfig, Rule, RuleSet, load_rules, mine, save_rules)
from .patterns import (PathPattern, Step, enumerate_candidates, match_count,
                       pattern_parse, pattern_to_string, paths_between,
                       score_frontier)
from .predict import (PredictionRanking, TIE_POLICIES, explain, rank_entities,
                      rank_of)

__version__ = "0.1.0"
