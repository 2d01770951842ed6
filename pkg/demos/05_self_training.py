#!/usr/bin/env python3
"""Run the full confidence-thresholded self-training loop at desk scale.

A simulated decoder stands in for the acoustic system: it corrupts hidden
reference texts at a rate set by its training-pool size, so each pass that
adds selected data yields a better decoder.  The loop mirrors the production
recipe: decode the untranscribed pool, keep hypotheses at or above the mean
confidence, retrain, repeat; the last pass is evaluated both with and without
the threshold, and the selected transcriptions augment the language model.
"""

import math

from asrtk.corpus import build_vocabulary, count_ngrams
from asrtk.interp import em_fit
from asrtk.ngram_lm import MODIFIED_KNESER_NEY, perplexity, train
from asrtk.selftrain import (
    MEAN_THRESHOLD,
    NO_THRESHOLD,
    SimulatedTrainer,
    SslPlan,
    SyntheticLanguage,
    hours,
    run_plan,
    segment_fixed,
)


def main():
    print("== fixed-length segmentation of a raw recording ==")
    spans = segment_fixed(127.0, segment_seconds=30.0, min_seconds=5.0)
    print(f"  127s recording at 30s segments -> {spans}")

    lang = SyntheticLanguage(seed=404, vocab_size=400, branching=14)
    mant = lang.sample_utterances(1200, seed=1, id_prefix="mant")
    pool = lang.sample_utterances(1200, seed=2, id_prefix="pool")
    test_utts = lang.sample_utterances(80, seed=3, id_prefix="test")
    print(f"\n== data pools ==")
    print(f"  transcribed (ManT): {len(mant)} utterances, {hours(mant):.2f}h")
    print(f"  untranscribed:      {len(pool)} utterances, {hours(pool):.2f}h")

    trainer = SimulatedTrainer(seed=99, floor_quality=0.5, max_quality=0.93,
                               hours_scale=hours(mant) / math.log(3.0))
    plan = SslPlan(
        mant=mant, untranscribed=pool,
        passes=[MEAN_THRESHOLD, MEAN_THRESHOLD, [NO_THRESHOLD, MEAN_THRESHOLD]],
        trainer=trainer, test_set=test_utts,
    )
    result = run_plan(plan)

    print("\n== pass ladder ==")
    print(f"  {'pass':>4s} {'policy':>15s} {'threshold':>9s} "
          f"{'kept':>12s} {'test WER':>9s}")
    for r in result.reports:
        print(f"  {r.pass_index:>4d} {r.policy:>15s} "
              f"{r.selection.threshold:>9.3f} "
              f"{r.autot_hours:>7.2f}/{r.selection.total_hours:.2f}h "
              f"{r.wer_on_test:>8.2f}%")

    print("\n== language-model augmentation with the selected transcriptions ==")
    seed_text = [u.reference_text for u in mant]
    autot_text = result.autot_corpus(2, MEAN_THRESHOLD)
    heldout = lang.sample_corpus(300, seed=4)
    test_text = lang.sample_corpus(300, seed=5)

    vocab = build_vocabulary(seed_text, min_count=1)
    baseline = train(count_ngrams(seed_text, 3, vocab), vocab, 3,
                     MODIFIED_KNESER_NEY)
    autot_lm = train(count_ngrams(autot_text, 3, vocab), vocab, 3,
                     MODIFIED_KNESER_NEY)
    mixture = em_fit([baseline, autot_lm], heldout, tuning_set_id="heldout")
    pp_base = perplexity(baseline, test_text).value
    pp_mix = perplexity(mixture, test_text).value
    print(f"  automatic transcriptions kept: {len(autot_text)} sentences")
    print(f"  mixture weights (seed LM, AutoT LM): "
          f"{[round(w, 3) for w in mixture.weights]}")
    print(f"  test PP: baseline {pp_base:.2f} -> mixture {pp_mix:.2f} "
          f"({100 * (pp_base - pp_mix) / pp_base:.2f}% better)")


if __name__ == "__main__":
    main()
