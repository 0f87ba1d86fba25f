"""Agreement rankings, divisiveness metrics and audits for pairwise preference data."""

__version__ = "0.1.0"

from .aggregation import Ranking, ScoreTable, ahp, bootstrap, copeland, elo, get_scorer, rank_from_scores, win_percentage
from .corpus import PreferenceCorpus, parse_preflib_soc, read_corpus, write_corpus
from .divisiveness import (
    DivisivenessTable, SplitSpec, aggregate_divisiveness, pairwise_divisiveness, split_divisiveness,
)
from .pairwise import PairwiseRecords, PairwiseTally, build_tally, corpus_to_pairs

__all__ = [
    "__version__", "Ranking", "ScoreTable", "ahp", "bootstrap", "copeland", "elo", "get_scorer",
    "rank_from_scores", "win_percentage", "PreferenceCorpus", "parse_preflib_soc", "read_corpus",
    "write_corpus", "DivisivenessTable", "SplitSpec", "aggregate_divisiveness", "pairwise_divisiveness",
    "split_divisiveness", "PairwiseRecords", "PairwiseTally", "build_tally", "corpus_to_pairs",
]
