"""2-Poisson eliteness retrieval."""

from .corpus import (CorpusIndex, Document, TokenizerConfig, build_index, normalized_tf,
                     tf_histogram, tokenize)
from .mixture import (EMConfig, ElitenessModel, FitResult, TwoPoissonParams, e_step, em_fit,
                      fit_model, init_params, log_likelihood, m_step)
from .ranking import (QueryRepr, RankedList, make_query, rank, score_final, score_idf,
                      score_logical_inclusion, score_strict_identity)

__version__ = "0.1.0"

__all__ = [
    "CorpusIndex", "Document", "TokenizerConfig", "build_index", "normalized_tf",
    "tf_histogram", "tokenize", "EMConfig", "ElitenessModel", "FitResult",
    "TwoPoissonParams", "e_step", "em_fit", "fit_model", "init_params",
    "log_likelihood", "m_step", "QueryRepr", "RankedList", "make_query", "rank",
    "score_final", "score_idf", "score_logical_inclusion", "score_strict_identity",
]
