#!/usr/bin/env python3
"""Score transcriptions: alignment, pooled WER, relative improvement."""

from asrtk.metrics import align, corpus_wer, relative_improvement


def show_alignment(ref, hyp):
    result = align(ref.split(), hyp.split())
    print(f"  ref: {ref!r}  hyp: {hyp!r}")
    rows = [
        (r if r is not None else "***", h if h is not None else "***", op)
        for r, h, op in result.aligned_pairs
    ]
    for r, h, op in rows:
        print(f"    {r:>10s} | {h:<10s} {op}")
    print(f"    S={result.substitutions} D={result.deletions} "
          f"I={result.insertions} -> WER {result.wer_percent:.2f}%")


def main():
    print("== single-utterance alignments ==")
    show_alignment("the cat sat on the mat", "the cat sat on mat")
    show_alignment("warning issued for the region", "warning was issued for region")

    print("\n== corpus WER pools errors over reference tokens ==")
    pairs = [
        ("one two three".split(), "one two three".split()),
        ("four five".split(), "four nine".split()),
        ("six".split(), "six seven".split()),
    ]
    for ref, hyp in pairs:
        print(f"  {' '.join(ref):>16s} vs {' '.join(hyp):<16s} "
              f"-> {align(ref, hyp).wer_percent:6.2f}%")
    print(f"  pooled corpus WER: {corpus_wer(pairs):.2f}% "
          f"(sum of errors / sum of reference lengths)")

    print("\n== relative improvement between two systems ==")
    baseline, improved = 41.80, 38.25
    print(f"  WER {baseline} -> {improved}: "
          f"{relative_improvement(baseline, improved):.2f}% relative")
    ppl_before, ppl_after = 280.4, 261.9
    print(f"  PP {ppl_before} -> {ppl_after}: "
          f"{relative_improvement(ppl_before, ppl_after):.2f}% relative")


if __name__ == "__main__":
    main()
