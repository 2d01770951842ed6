#!/usr/bin/env python3
"""Mix language models from different sources with EM-fitted weights.

Trains one model per text source, fits mixture weights on a tuning set, and
shows how the choice of tuning text moves the weights.
"""

from asrtk.corpus import build_vocabulary, count_ngrams
from asrtk.interp import em_fit
from asrtk.ngram_lm import WITTEN_BELL, perplexity, train
from asrtk.selftrain import SyntheticLanguage


def train_lm(text, vocab):
    return train(count_ngrams(text, 2, vocab), vocab, 2, WITTEN_BELL)


def main():
    in_domain = SyntheticLanguage(seed=10, vocab_size=120, branching=8)
    out_domain = SyntheticLanguage(seed=20, vocab_size=120, branching=8)

    text_in = in_domain.sample_corpus(300, seed=1)
    text_out = out_domain.sample_corpus(3000, seed=2)
    vocab = build_vocabulary(text_in + text_out, min_count=1)
    lm_in = train_lm(text_in, vocab)
    lm_out = train_lm(text_out, vocab)

    tuning = in_domain.sample_corpus(80, seed=3)
    evaluation = in_domain.sample_corpus(200, seed=4)

    print("== components ==")
    for name, lm in [("in-domain (small)", lm_in), ("out-of-domain (large)", lm_out)]:
        print(f"  {name}: tuning PP = {perplexity(lm, tuning).value:.2f}")

    print("\n== EM fit on in-domain tuning text ==")
    mix = em_fit([lm_in, lm_out], tuning, tuning_set_id="in-domain-heldout")
    for it, ll in enumerate(mix.log_likelihood_trace):
        print(f"  iteration {it}: total log-likelihood {ll:.4f}")
    print(f"  weights = {[round(w, 4) for w in mix.weights]} "
          f"(tuning_set_id={mix.tuning_set_id!r})")
    print(f"  mixture tuning PP = {perplexity(mix, tuning).value:.2f} "
          f"(never worse than the best single component)")
    print(f"  mixture evaluation PP = {perplexity(mix, evaluation).value:.2f} vs "
          f"in-domain alone {perplexity(lm_in, evaluation).value:.2f}")

    print("\n== the tuning set decides the weights ==")
    tuning_out = out_domain.sample_corpus(80, seed=5)
    mix_out = em_fit([lm_in, lm_out], tuning_out, tuning_set_id="out-domain")
    print(f"  tuned on in-domain text:  weights {[round(w, 3) for w in mix.weights]}")
    print(f"  tuned on out-domain text: weights {[round(w, 3) for w in mix_out.weights]}")


if __name__ == "__main__":
    main()
