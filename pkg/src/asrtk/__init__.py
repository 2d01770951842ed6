"""Toolkit for low-resource speech-recognition pipelines.

Submodules
----------
corpus
    Tokenization, vocabulary selection and n-gram counting.
ngram_lm
    Smoothed backoff n-gram models, perplexity, ARPA I/O.
interp
    Linear interpolation of language models with EM-fitted weights.
metrics
    Word-error-rate alignment and relative-improvement reporting.
lattice
    Word lattices, forward-backward arc posteriors, keyword spotting.
selftrain
    Confidence-thresholded semi-supervised training loop and the
    pluggable decoder/trainer seam, including desk-scale simulators.
cli
    Command-line surface (``asrtk`` entry point).
"""

from . import corpus, interp, lattice, metrics, ngram_lm, selftrain
from .corpus import (
    BOS,
    EOS,
    UNK,
    CountTable,
    Vocabulary,
    build_vocabulary,
    count_ngrams,
    load_corpus,
    tokenize,
)
from .interp import InterpolatedModel, em_fit
from .lattice import Lattice, forward_backward, parse_lattices, search_keyword
from .metrics import align, corpus_wer, relative_improvement
from .ngram_lm import (
    MODIFIED_KNESER_NEY,
    WITTEN_BELL,
    NGramModel,
    Perplexity,
    perplexity,
    read_arpa_file,
    train,
    write_arpa_file,
)
from .selftrain import (
    Hypothesis,
    PassReport,
    SelectionResult,
    Utterance,
    mean_confidence_threshold,
    run_pass,
    segment_fixed,
    select,
)

__version__ = "0.1.0"
