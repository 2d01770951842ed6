#!/usr/bin/env python3
"""Spot keywords in decoder lattices via forward-backward arc posteriors.

Builds a small lattice with two competing readings, computes arc posteriors,
verifies cut conservation, and searches for single- and multi-word keywords
at different thresholds.
"""

import math

from asrtk.lattice import (
    EPSILON,
    Arc,
    Lattice,
    cut_check,
    format_lattice,
    forward_backward,
    search_keyword,
)


def build_lattice():
    # two readings of the middle word: "flood" (60%) vs "food" (40%),
    # with an optional epsilon before the final word
    arcs = [
        Arc(0, 1, "heavy", math.log(1.0)),
        Arc(1, 2, "flood", math.log(0.6)),
        Arc(1, 2, "food", math.log(0.4)),
        Arc(2, 3, EPSILON, math.log(0.5)),
        Arc(2, 4, "warning", math.log(0.5)),
        Arc(3, 4, "warning", math.log(1.0)),
    ]
    return Lattice(utterance_id="seg042", num_nodes=5, start=0, end=4, arcs=arcs)


def main():
    lat = build_lattice()
    print("== lattice (text format) ==")
    print(format_lattice(lat))

    print("== arc posteriors ==")
    post = forward_backward(lat, scale=1.0)
    for arc, p in zip(lat.arcs, post):
        print(f"  {arc.from_node}->{arc.to_node} {arc.word:<8s} posterior {p:.4f}")
    print(f"  cut conservation holds: {cut_check(lat, post)}")

    print("\n== keyword search ==")
    for keyword in (["flood"], ["food"], ["flood", "warning"], ["drought"]):
        hits = search_keyword(lat, keyword, threshold=0.0)
        label = " ".join(keyword)
        if not hits:
            print(f"  {label!r}: no hits")
        for hit in hits:
            print(f"  {label!r}: posterior {hit.posterior:.4f} via arcs {hit.arc_span}")

    print("\n== thresholding ==")
    for threshold in (0.3, 0.5):
        found = [" ".join(h.keyword)
                 for kw in (["flood"], ["food"])
                 for h in search_keyword(lat, kw, threshold=threshold)]
        print(f"  threshold {threshold}: kept {found}")

    print("\n== sharpening with the scale parameter ==")
    for scale in (0.5, 1.0, 3.0):
        hit = search_keyword(lat, ["flood"], scale=scale)[0]
        print(f"  scale {scale}: P(flood) = {hit.posterior:.4f}")


if __name__ == "__main__":
    main()
