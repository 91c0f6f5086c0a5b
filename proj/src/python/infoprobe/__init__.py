"""Information-theoretic probing toolkit."""

from ._infoprobe import (
    AlignmentError,
    CountMismatchError,
    DataError,
    Error,
    FormatError,
    HashMismatchError,
    InvalidArgument,
    ParseError,
    SearchFailure,
    ShapeError,
    conditional_mi,
    conllu_forms,
    corpus_token_hash,
    decode_pemb,
    encode_pemb,
    fnv1a64,
    plugin_entropy,
    run_cli,
    run_sweep,
    true_quantities,
)

__version__ = "0.1.0"
