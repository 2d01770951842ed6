"""Linear interpolation of language models with EM-fitted mixture weights.

A mixture scores P(w|h) = sum_k weight_k * P_k(w|h) over components that each
expose ``log10_prob(word, context)``.  Weights live on the probability
simplex and are fitted to maximize the likelihood of a tuning text via the
standard mixture EM update: each weight becomes the mean posterior
responsibility of its component over all tuning events.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .corpus import Sentence
from .ngram_lm import ZeroProbabilityError, sentence_events

SIMPLEX_TOL = 1e-12


class InterpolatedModel:
    """Simplex-weighted mixture of scoring components.

    Components may be :class:`~asrtk.ngram_lm.NGramModel` instances or nested
    mixtures; anything with ``log10_prob(word, context)`` works.
    ``tuning_set_id`` records which text the weights were optimized on.
    """

    def __init__(self, components: Sequence, weights: Sequence[float],
                 tuning_set_id: str = "", log_likelihood_trace: Sequence[float] = ()):
        if len(components) < 2:
            raise ValueError("a mixture needs at least 2 components")
        if len(weights) != len(components):
            raise ValueError(
                f"{len(weights)} weights for {len(components)} components"
            )
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0.0):
            raise ValueError(f"negative mixture weight in {list(w)}")
        if abs(float(w.sum()) - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"mixture weights sum to {w.sum()!r}, not 1")
        self.components = list(components)
        self.weights = [float(x) for x in w]
        self.tuning_set_id = tuning_set_id
        self.log_likelihood_trace = list(log_likelihood_trace)

    @property
    def context_pads(self) -> int:
        return max(getattr(c, "context_pads", 0) for c in self.components)

    @property
    def vocab(self):
        """Union of component vocabularies, or None if none declares one."""
        union = None
        for comp in self.components:
            v = getattr(comp, "vocab", None)
            if v is None:
                continue
            words = getattr(v, "words", v)
            union = set(words) if union is None else union | set(words)
        if union is None:
            return None
        from .corpus import Vocabulary

        return Vocabulary(words=frozenset(union))

    def log10_prob(self, word, context=()) -> float:
        """log10 of the weighted sum of component probabilities.

        Computed in linear space after shifting by the largest component
        log-probability, so very small probabilities do not underflow.
        """
        logps = [c.log10_prob(word, context) for c in self.components]
        finite = [lp for lp in logps if lp != float("-inf")]
        if not finite:
            raise ZeroProbabilityError(word, context)
        shift = max(finite)
        acc = 0.0
        for w, lp in zip(self.weights, logps):
            if lp != float("-inf"):
                acc += w * 10.0 ** (lp - shift)
        if acc <= 0.0:
            raise ZeroProbabilityError(word, context)
        return shift + math.log10(acc)

    def prob(self, word, context=()) -> float:
        return 10.0 ** self.log10_prob(word, context)


def _event_prob_matrix(components, tuning_text, include_sentence_end):
    """Rows = tuning events, columns = linear component probabilities."""
    pads = max(getattr(c, "context_pads", 0) for c in components)
    rows = []
    events = []
    for sent in tuning_text:
        for word, context in sentence_events(sent, pads):
            if not include_sentence_end and word == "</s>":
                continue
            row = []
            for comp in components:
                try:
                    row.append(10.0 ** comp.log10_prob(word, context))
                except ZeroProbabilityError:
                    row.append(0.0)
            rows.append(row)
            events.append((word, context))
    if not rows:
        raise ValueError("tuning text provides no events")
    probs = np.asarray(rows, dtype=float)
    dead = np.flatnonzero(probs.max(axis=1) <= 0.0)
    if dead.size:
        word, context = events[int(dead[0])]
        raise ZeroProbabilityError(word, context)
    return probs


def em_fit(components: Sequence, tuning_text: Sequence[Sentence],
           tol: float = 1e-6, max_iter: int = 100, tuning_set_id: str = "",
           include_sentence_end: bool = True) -> InterpolatedModel:
    """Fit mixture weights by EM on a tuning text.

    Weights start uniform; iteration stops when the tuning-set log-likelihood
    improves by less than ``tol`` nats per event, or after ``max_iter``
    iterations.  The returned model carries the per-iteration total natural
    log-likelihood in ``log_likelihood_trace`` (first entry = uniform
    weights); the trace is non-decreasing.

    ``include_sentence_end=False`` drops the per-sentence ``</s>`` event,
    for components that only define probabilities over plain words.
    """
    if len(components) < 2:
        raise ValueError("a mixture needs at least 2 components")
    if tol <= 0.0:
        raise ValueError(f"tol must be > 0, got {tol}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")

    probs = _event_prob_matrix(components, tuning_text, include_sentence_end)
    n_events, k = probs.shape
    weights = np.full(k, 1.0 / k)

    def total_ll(w):
        return float(np.log(probs @ w).sum())

    trace = [total_ll(weights)]
    for _ in range(max_iter):
        mix = probs @ weights                      # (n,)
        resp = probs * weights / mix[:, None]      # posterior responsibilities
        new_weights = resp.mean(axis=0)
        new_weights /= new_weights.sum()
        ll = total_ll(new_weights)
        trace.append(ll)
        weights = new_weights
        if ll - trace[-2] < tol * n_events:
            break

    return InterpolatedModel(
        components=components,
        weights=[float(x) for x in weights],
        tuning_set_id=tuning_set_id,
        log_likelihood_trace=trace,
    )
