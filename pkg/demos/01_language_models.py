#!/usr/bin/env python3
"""Build a smoothed n-gram language model from raw text and evaluate it.

Walks the full path: tokenize -> vocabulary -> counts -> smoothed model ->
perplexity -> ARPA file on disk and back.
"""

import io
import tempfile
from pathlib import Path

from asrtk.corpus import build_vocabulary, count_ngrams, tokenize
from asrtk.ngram_lm import (
    MODIFIED_KNESER_NEY,
    perplexity,
    read_arpa_file,
    sum_event_probs,
    train,
    write_arpa_file,
)
from asrtk.selftrain import SyntheticLanguage


def main():
    lang = SyntheticLanguage(seed=2024, vocab_size=200, branching=10)
    train_text = lang.sample_corpus(1500, seed=1)
    heldout = lang.sample_corpus(200, seed=2)

    print("== corpus ==")
    raw = "hello there\nhello   again\n\n"
    print(f"tokenize({raw!r}) -> {tokenize(raw)}")
    n_tokens = sum(len(s) for s in train_text)
    print(f"training corpus: {len(train_text)} sentences, {n_tokens} tokens")

    print("\n== vocabulary (min-count rule) ==")
    small_pool = train_text[:60]
    for min_count in (1, 2, 4):
        vocab = build_vocabulary(small_pool, min_count=min_count)
        print(f"  on 60 sentences, min_count={min_count}: "
              f"{len(vocab)} types (reserved included)")
    vocab = build_vocabulary(train_text, min_count=2)
    print(f"  full corpus at min_count=2: {len(vocab)} types")

    print("\n== training a trigram model ==")
    counts = count_ngrams(train_text, order=3, vocab=vocab)
    model = train(counts, vocab, order=3, smoothing=MODIFIED_KNESER_NEY)
    for line in model.smoothing_log:
        print(f"  {line}")
    for n in (1, 2, 3):
        print(f"  {n}-grams stored: {model.num_entries(n)}")

    print("\n== the model is a proper conditional distribution ==")
    some_word = sorted(vocab.event_words)[5]
    for ctx in [(), (some_word,), ("never-seen-context",)]:
        print(f"  sum_w P(w | {ctx}) = {sum_event_probs(model, ctx):.12f}")

    print("\n== perplexity on held-out text ==")
    result = perplexity(model, heldout)
    print(f"  PP = {result.value:.3f} over {result.n_scored} events "
          f"({result.oov_count} mapped to <unk>)")

    print("\n== ARPA round trip ==")
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "demo.arpa"
        write_arpa_file(model, path)
        print(f"  wrote {path.stat().st_size} bytes")
        again = read_arpa_file(path)
        check = perplexity(again, heldout)
        print(f"  reloaded model PP = {check.value:.3f} (identical scoring)")


if __name__ == "__main__":
    main()
