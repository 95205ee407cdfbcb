"""Neural hypernym discovery: term encoders, max-margin ranking and IR evaluation."""
from .embed import (
    EmbeddingTable,
    TermSequence,
    UnrepresentableTermError,
    load_sense_embeddings,
    load_word_embeddings,
    lookup_term,
)
from .encoders import EncoderConfig, encode, encoder_backward, forward, init_encoder
from .metrics import EvalReport, average_precision, evaluate, precision_at_k, reciprocal_rank
from .ranker import Model, RankedList, TrainerConfig, TrainingPair, cosine, fit, rank_candidates, score, train_epoch

__version__ = "0.1.0"
