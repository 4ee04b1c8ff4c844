"""Dependency-link learning and prediction for two-party chat transcripts."""

from .corpus import (
    AnnotationSet,
    Chat,
    CorpusFormatError,
    DEFAULT_VOCAB_CAP,
    DEFAULT_WINDOW,
    LinkLabel,
    Message,
    Speaker,
    Vocab,
    build_vocab,
    exchange_ratio,
    filter_chats,
    load_annotations,
    load_corpus,
    majority_distances,
    normalize_chat,
    normalize_message,
    save_corpus,
)
from .evaluation import (
    MetricReport,
    accuracy_vs_random_annotator,
    agreement_upper_bound,
    corpus_accuracy,
    fleiss_kappa,
    human_performance,
    kfold_split,
    rule1,
    rule2,
    weighted_f1,
)
from .features import (
    FEATURE_NAMES,
    NUM_FEATURES,
    ParamIndexer,
    active_indices,
    annotate_features,
    candidate_set,
    message_features,
)
from .lexicons import LexiconSet, bundled_lexicons, load_lexicons
from .model import (
    LinkClassifier,
    Mode,
    Parameters,
    TrainConfig,
    link_distribution,
    link_score,
    load_model,
    nll_and_gradient,
    predict_links,
    save_model,
)
from .optim import OptimConfig, OptimReport, Status, grad_check, minimize
from .synth import SynthConfig, make_annotations, oracle_accuracy, preset_theta, sample_corpus
from .topics import (
    LdaConfig,
    LdaModel,
    MessageLda,
    cross_feature,
    gibbs_train,
    load_lda,
    message_topic_dist,
    save_lda,
    topic_dist_map,
    train_message_lda,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotationSet",
    "Chat",
    "CorpusFormatError",
    "DEFAULT_VOCAB_CAP",
    "DEFAULT_WINDOW",
    "FEATURE_NAMES",
    "LdaConfig",
    "LdaModel",
    "LexiconSet",
    "LinkClassifier",
    "LinkLabel",
    "Message",
    "MessageLda",
    "MetricReport",
    "Mode",
    "NUM_FEATURES",
    "OptimConfig",
    "OptimReport",
    "ParamIndexer",
    "Parameters",
    "Speaker",
    "Status",
    "SynthConfig",
    "TrainConfig",
    "Vocab",
    "accuracy_vs_random_annotator",
    "active_indices",
    "agreement_upper_bound",
    "annotate_features",
    "build_vocab",
    "bundled_lexicons",
    "candidate_set",
    "corpus_accuracy",
    "cross_feature",
    "exchange_ratio",
    "filter_chats",
    "fleiss_kappa",
    "gibbs_train",
    "grad_check",
    "human_performance",
    "kfold_split",
    "link_distribution",
    "link_score",
    "load_annotations",
    "load_corpus",
    "load_lda",
    "load_lexicons",
    "load_model",
    "majority_distances",
    "make_annotations",
    "message_features",
    "message_topic_dist",
    "minimize",
    "nll_and_gradient",
    "normalize_chat",
    "normalize_message",
    "oracle_accuracy",
    "predict_links",
    "preset_theta",
    "rule1",
    "rule2",
    "sample_corpus",
    "save_corpus",
    "save_lda",
    "save_model",
    "topic_dist_map",
    "train_message_lda",
    "weighted_f1",
]
