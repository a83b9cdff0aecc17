"""Self-supervised token embeddings for plain-text tables."""

from ._sc2t import (
    Config,
    DataError,
    Document,
    InvalidArgument,
    Model,
    NumericError,
    align,
    disrupt,
    evaluate,
    homogeneity,
    kmeans,
    synthesize,
    synthesize_text,
    token_labels,
    tokenize,
)

__all__ = [
    "Config",
    "DataError",
    "Document",
    "InvalidArgument",
    "Model",
    "NumericError",
    "align",
    "disrupt",
    "evaluate",
    "homogeneity",
    "kmeans",
    "synthesize",
    "synthesize_text",
    "token_labels",
    "tokenize",
]
