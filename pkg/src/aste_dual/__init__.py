"""Dual-encoder aspect sentiment triplet extraction."""

from .config import ModelConfig, load_config, save_config
from .corpus import (
    AnnotatedSentence,
    DependencyGraph,
    GoldTriplet,
    PosClass,
    Sentence,
    Sentiment,
    build_dependency_graph,
    load_corpus,
    map_pos_tag,
    merge_annotations,
    parse_aste_file,
    serialize_aste,
)
from .metrics import Metrics, score_corpus
from .model import TripletModel
from .training import (
    Checkpoint,
    evaluate,
    load_checkpoint,
    predict_sentences,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotatedSentence",
    "Checkpoint",
    "DependencyGraph",
    "GoldTriplet",
    "Metrics",
    "ModelConfig",
    "PosClass",
    "Sentence",
    "Sentiment",
    "TripletModel",
    "build_dependency_graph",
    "evaluate",
    "load_checkpoint",
    "load_config",
    "load_corpus",
    "map_pos_tag",
    "merge_annotations",
    "parse_aste_file",
    "predict_sentences",
    "save_checkpoint",
    "save_config",
    "score_corpus",
    "serialize_aste",
    "train",
]
