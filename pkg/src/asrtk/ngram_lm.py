"""Backoff n-gram language models: estimation, scoring, perplexity, ARPA I/O.

Models store log10 probabilities and log10 backoff weights, following the
ARPA convention.  Two estimators are provided:

* interpolated modified Kneser-Ney with three discount parameters per level
  derived from count-of-counts (D1 = 1 - 2Y*n2/n1, D2 = 2 - 3Y*n3/n2,
  D3+ = 3 - 4Y*n4/n3 with Y = n1/(n1 + 2*n2)), falling back per level to
  Witten-Bell whenever the required count-of-counts are degenerate;
* interpolated Witten-Bell, p(w|h) = (c(hw) + T(h)*p(w|h')) / (c(h) + T(h)),
  where T(h) is the number of distinct types observed after h.

Both estimators interpolate down to a uniform distribution over the
predictable vocabulary, so every in-vocabulary word has nonzero probability
in every context.
"""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass

from .corpus import BOS, EOS, UNK, CountTable, Vocabulary

logger = logging.getLogger(__name__)

MODIFIED_KNESER_NEY = "modified_kneser_ney"
WITTEN_BELL = "witten_bell"
SMOOTHING_METHODS = (MODIFIED_KNESER_NEY, WITTEN_BELL)

# log10 placeholder for entries that exist only to carry a backoff weight
# (<s> and start-of-sentence pad contexts); never returned for a scored event.
DUMMY_LOG10 = -99.0

ARPA_DECIMALS = 10


class ZeroProbabilityError(ValueError):
    """An event received probability zero under the model."""

    def __init__(self, word, context):
        self.word = word
        self.context = tuple(context)
        super().__init__(
            f"zero probability for event {word!r} in context {list(context)!r}"
        )


class ArpaFormatError(ValueError):
    """Malformed ARPA input; carries the offending line number."""

    def __init__(self, lineno, message):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


@dataclass
class Perplexity:
    """10**(-mean log10 probability) over scored events."""

    value: float
    n_scored: int
    oov_count: int
    log10_total: float


class NGramModel:
    """Immutable backoff n-gram model over a closed vocabulary."""

    def __init__(self, order, vocab, probs, backoffs, smoothing_log=()):
        if order < 1:
            raise ValueError(f"order must be >= 1, got {order}")
        self.order = order
        self.vocab = vocab
        self._probs = dict(probs)        # ngram tuple -> log10 prob
        self._backoffs = dict(backoffs)  # context tuple -> log10 backoff weight
        self.smoothing_log = list(smoothing_log)

    @property
    def context_pads(self) -> int:
        """Number of leading <s> tokens callers should pad contexts with."""
        return self.order - 1

    def entries(self):
        """Yield (ngram, log10_prob, log10_backoff or None), sorted."""
        for gram in sorted(self._probs):
            bow = self._backoffs.get(gram) if len(gram) < self.order else None
            yield gram, self._probs[gram], bow

    def num_entries(self, length: int) -> int:
        return sum(1 for g in self._probs if len(g) == length)

    def log10_prob(self, word, context=()) -> float:
        """Backoff-recursive log10 probability of one event.

        Contexts longer than order-1 are truncated to their last order-1
        tokens; OOV tokens (in the event or the context) are mapped to
        ``<unk>``.  ``<s>`` is never a valid event.
        """
        if word == BOS:
            raise ValueError("<s> is conditioned on, never scored as an event")
        w = word if word in self.vocab else UNK
        ctx = tuple(t if t in self.vocab else UNK for t in context)
        if self.order == 1:
            ctx = ()
        else:
            ctx = ctx[-(self.order - 1):]
        bow_sum = 0.0
        while True:
            stored = self._probs.get(ctx + (w,))
            if stored is not None:
                return bow_sum + stored
            if not ctx:
                raise ZeroProbabilityError(word, context)
            bow_sum += self._backoffs.get(ctx, 0.0)
            ctx = ctx[1:]

    def prob(self, word, context=()) -> float:
        return 10.0 ** self.log10_prob(word, context)


def sentence_events(sentence, pads: int):
    """Yield (word, context) scoring events for one sentence.

    Events are every word plus one ``</s>``; contexts carry ``pads`` leading
    ``<s>`` tokens followed by the words already seen.  ``<s>`` itself is
    never yielded as an event.
    """
    context = (BOS,) * pads
    for word in list(sentence) + [EOS]:
        yield word, context
        context = context + (word,)


def perplexity(model, text) -> Perplexity:
    """Perplexity of ``text`` under any scorer exposing ``log10_prob``.

    Scored events are all words (OOV mapped to ``<unk>``) plus one ``</s>``
    per sentence.  Raises :class:`ZeroProbabilityError` naming the event if
    any event has probability zero.
    """
    pads = getattr(model, "context_pads", 0)
    vocab = getattr(model, "vocab", None)
    total = 0.0
    n_scored = 0
    oov = 0
    for sent in text:
        for word, context in sentence_events(sent, pads):
            lp = model.log10_prob(word, context)
            if lp == float("-inf"):
                raise ZeroProbabilityError(word, context)
            total += lp
            n_scored += 1
            if vocab is not None and word not in vocab:
                oov += 1
    if n_scored == 0:
        raise ValueError("no events to score: text is empty")
    return Perplexity(
        value=10.0 ** (-total / n_scored),
        n_scored=n_scored,
        oov_count=oov,
        log10_total=total,
    )


def _grams_by_level(counts: CountTable, order: int):
    """levels[n] = {ngram of length n: raw count}, n = 1..order."""
    levels = [None] + [dict() for _ in range(order)]
    for gram, c in counts.counts.items():
        if 1 <= len(gram) <= order and c > 0:
            levels[len(gram)][gram] = c
    return levels


def _continuation_counts(raw_level_n, raw_level_np1):
    """Kneser-Ney adjusted counts for one non-highest level.

    The adjusted count of g is the number of distinct left extensions
    (v + g) observed one level up; grams starting with <s> keep their raw
    count since nothing can precede <s>.
    """
    left_ext = Counter()
    for gram in raw_level_np1:
        left_ext[gram[1:]] += 1
    used = {}
    for gram, c in raw_level_n.items():
        used[gram] = c if gram[0] == BOS else left_ext.get(gram, 0)
    return used


def _mkn_discounts(count_values):
    """(D1, D2, D3plus) from count-of-counts, or (None, reason) if degenerate."""
    stats = Counter()
    for c in count_values:
        if 1 <= c <= 4:
            stats[c] += 1
    n1, n2, n3, n4 = stats[1], stats[2], stats[3], stats[4]
    if n1 == 0 or n2 == 0 or n3 == 0:
        return None, f"count-of-counts degenerate (n1={n1}, n2={n2}, n3={n3})"
    y = n1 / (n1 + 2.0 * n2)
    d1 = 1.0 - 2.0 * y * n2 / n1
    d2 = 2.0 - 3.0 * y * n3 / n2
    d3 = 3.0 - 4.0 * y * n4 / n3
    if d2 < 0.0 or d3 < 0.0:
        return None, f"negative discount (D2={d2:.4f}, D3={d3:.4f})"
    return (d1, d2, d3), None


def _discount_for(count, discounts):
    d1, d2, d3 = discounts
    if count >= 3:
        return d3
    if count == 2:
        return d2
    if count == 1:
        return d1
    return 0.0


def train(counts: CountTable, vocab: Vocabulary, order: int,
          smoothing: str = MODIFIED_KNESER_NEY) -> NGramModel:
    """Estimate a smoothed backoff model from a count table.

    With modified Kneser-Ney, any level whose count-of-counts cannot support
    the three-discount formulas falls back to Witten-Bell for that level;
    every such event is recorded in the returned model's ``smoothing_log``
    and emitted on this module's logger.
    """
    if smoothing not in SMOOTHING_METHODS:
        raise ValueError(f"unknown smoothing method {smoothing!r}")
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    if counts.order < order:
        raise ValueError(
            f"count table has order {counts.order}, cannot train order {order}"
        )
    raw = _grams_by_level(counts, order)
    if not raw[1]:
        raise ValueError("count table holds no events; cannot train")

    event_words = sorted(vocab.event_words)
    uniform = 1.0 / len(event_words)

    # Per-level counts actually estimated from: continuation counts below the
    # highest level under Kneser-Ney, raw counts otherwise.
    used = [None] * (order + 1)
    methods = [None] * (order + 1)
    discounts = [None] * (order + 1)
    smoothing_log = []
    for n in range(1, order + 1):
        if smoothing == WITTEN_BELL:
            used[n] = raw[n]
            methods[n] = WITTEN_BELL
            continue
        used[n] = raw[n] if n == order else _continuation_counts(raw[n], raw[n + 1])
        disc, reason = _mkn_discounts(used[n].values())
        if disc is None:
            used[n] = raw[n]
            methods[n] = WITTEN_BELL
            line = f"level {n}: witten_bell fallback ({reason})"
            smoothing_log.append(line)
            logger.info("train: %s", line)
        else:
            methods[n] = MODIFIED_KNESER_NEY
            discounts[n] = disc
            smoothing_log.append(f"level {n}: modified_kneser_ney")

    probs = {}     # ngram -> log10 prob
    backoffs = {}  # context -> log10 backoff weight

    def lower_prob(word, context):
        """Linear-space probability from the already-built lower levels."""
        if not context:
            return 10.0 ** probs[(word,)]
        bow_sum = 0.0
        ctx = context
        while True:
            stored = probs.get(ctx + (word,))
            if stored is not None:
                return 10.0 ** (bow_sum + stored)
            if not ctx:
                return 10.0 ** (bow_sum + probs[(word,)])
            bow_sum += backoffs.get(ctx, 0.0)
            ctx = ctx[1:]

    # Unigram level.
    level1 = used[1]
    total1 = sum(level1.values())
    if methods[1] == WITTEN_BELL:
        t1 = len(level1)
        for w in event_words:
            c = level1.get((w,), 0)
            p = (c + t1 * uniform) / (total1 + t1)
            probs[(w,)] = math.log10(p)
    else:
        d = discounts[1]
        gamma = sum(_discount_for(c, d) for c in level1.values()) / total1
        for w in event_words:
            c = level1.get((w,), 0)
            p = max(c - _discount_for(c, d), 0.0) / total1 + gamma * uniform
            probs[(w,)] = math.log10(p)
    probs[(BOS,)] = DUMMY_LOG10

    # Higher levels, bottom-up; each context's backoff weight lands on the
    # (n-1)-gram entry for that context.
    for n in range(2, order + 1):
        by_context = defaultdict(dict)
        for gram, c in used[n].items():
            by_context[gram[:-1]][gram[-1]] = c
        for context in sorted(by_context):
            cont = by_context[context]
            denom = sum(cont.values())
            if denom == 0:
                continue
            lower_ctx = context[1:]
            if methods[n] == WITTEN_BELL:
                t = len(cont)
                bow = t / (denom + t)
                for w, c in cont.items():
                    p = (c + t * lower_prob(w, lower_ctx)) / (denom + t)
                    probs[context + (w,)] = math.log10(p)
            else:
                d = discounts[n]
                gamma_mass = sum(_discount_for(c, d) for c in cont.values())
                bow = gamma_mass / denom
                for w, c in cont.items():
                    p = (max(c - _discount_for(c, d), 0.0) / denom
                         + bow * lower_prob(w, lower_ctx))
                    probs[context + (w,)] = math.log10(p)
            backoffs[context] = math.log10(bow) if bow > 0.0 else float("-inf")
            if context not in probs:
                # start-of-sentence pad contexts are not counted as grams but
                # must exist to carry their backoff weight
                probs[context] = DUMMY_LOG10

    # -inf backoff (context with zero leftover mass) cannot happen with the
    # interpolated estimators above; guard against it anyway.
    for ctx, b in backoffs.items():
        if not math.isfinite(b):
            raise ArithmeticError(f"non-finite backoff weight for context {ctx!r}")

    return NGramModel(order=order, vocab=vocab, probs=probs,
                      backoffs=backoffs, smoothing_log=smoothing_log)


def sum_event_probs(model, context=()) -> float:
    """Sum of P(w|context) over the predictable vocabulary (sanity check)."""
    return sum(model.prob(w, context) for w in model.vocab.event_words)


# --- ARPA serialization -----------------------------------------------------


def write_arpa(model: NGramModel, stream) -> None:
    """Write the model in ARPA text form.

    Sections are sorted for byte-identical output; numbers carry 10 decimal
    places so that a write/read round trip preserves log10 values to 1e-9.
    """
    per_level = [[] for _ in range(model.order + 1)]
    for gram, lp, bow in model.entries():
        per_level[len(gram)].append((gram, lp, bow))

    stream.write("\\data\\\n")
    for n in range(1, model.order + 1):
        stream.write(f"ngram {n}={len(per_level[n])}\n")
    for n in range(1, model.order + 1):
        stream.write(f"\n\\{n}-grams:\n")
        for gram, lp, bow in per_level[n]:
            words = " ".join(gram)
            if n < model.order:
                stream.write(f"{lp:.{ARPA_DECIMALS}f}\t{words}\t{0.0 if bow is None else bow:.{ARPA_DECIMALS}f}\n")
            else:
                stream.write(f"{lp:.{ARPA_DECIMALS}f}\t{words}\n")
    stream.write("\n\\end\\\n")


def write_arpa_file(model: NGramModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_arpa(model, fh)


def read_arpa(stream) -> NGramModel:
    """Parse an ARPA file into a model; errors carry line numbers."""
    lines = stream.read().split("\n")
    i = 0
    n_lines = len(lines)

    def current():
        return lines[i].strip()

    # Locate \data\ header.
    while i < n_lines and current() != "\\data\\":
        if current() != "":
            raise ArpaFormatError(i + 1, f"expected \\data\\ header, got {current()!r}")
        i += 1
    if i == n_lines:
        raise ArpaFormatError(n_lines, "missing \\data\\ header")
    i += 1

    declared = {}
    while i < n_lines and current().startswith("ngram "):
        body = current()[len("ngram "):]
        if "=" not in body:
            raise ArpaFormatError(i + 1, f"malformed ngram count line {current()!r}")
        n_str, count_str = body.split("=", 1)
        try:
            declared[int(n_str)] = int(count_str)
        except ValueError:
            raise ArpaFormatError(i + 1, f"malformed ngram count line {current()!r}") from None
        i += 1
    if not declared:
        raise ArpaFormatError(i + 1, "no ngram count declarations after \\data\\")
    order = max(declared)
    if sorted(declared) != list(range(1, order + 1)):
        raise ArpaFormatError(i + 1, f"non-contiguous ngram orders {sorted(declared)}")

    probs = {}
    backoffs = {}
    seen = {n: 0 for n in declared}
    section = None
    ended = False
    while i < n_lines:
        line = current()
        i += 1
        if line == "":
            continue
        if line == "\\end\\":
            ended = True
            break
        if line.startswith("\\") and line.endswith("-grams:"):
            try:
                section = int(line[1:-len("-grams:")])
            except ValueError:
                raise ArpaFormatError(i, f"malformed section header {line!r}") from None
            if section not in declared:
                raise ArpaFormatError(i, f"section {section} was not declared")
            continue
        if section is None:
            raise ArpaFormatError(i, f"entry before any section header: {line!r}")
        fields = line.split("\t")
        if len(fields) == 1:
            # tolerate space-separated entries from other toolkits
            parts = line.split()
            if len(parts) not in (section + 1, section + 2):
                raise ArpaFormatError(i, f"wrong field count in entry {line!r}")
            fields = [parts[0], " ".join(parts[1:section + 1])]
            if len(parts) == section + 2:
                fields.append(parts[-1])
        if len(fields) not in (2, 3):
            raise ArpaFormatError(i, f"expected 2 or 3 tab fields, got {len(fields)}")
        try:
            lp = float(fields[0])
        except ValueError:
            raise ArpaFormatError(i, f"bad log10 probability {fields[0]!r}") from None
        if lp > 0.0:
            raise ArpaFormatError(i, f"positive log10 probability {lp}")
        gram = tuple(fields[1].split())
        if len(gram) != section:
            raise ArpaFormatError(
                i, f"{len(gram)}-gram {fields[1]!r} in \\{section}-grams: section"
            )
        probs[gram] = lp
        seen[section] += 1
        if len(fields) == 3:
            if section == order:
                raise ArpaFormatError(i, "backoff weight on a highest-order entry")
            try:
                bow = float(fields[2])
            except ValueError:
                raise ArpaFormatError(i, f"bad backoff weight {fields[2]!r}") from None
            if bow != 0.0:
                backoffs[gram] = bow
    if not ended:
        raise ArpaFormatError(n_lines, "missing \\end\\ terminator")
    for n, expected in declared.items():
        if seen[n] != expected:
            raise ArpaFormatError(
                n_lines, f"declared {expected} {n}-grams but found {seen[n]}"
            )
    vocab_words = {g[0] for g in probs if len(g) == 1}
    vocab = Vocabulary(words=frozenset(vocab_words))
    return NGramModel(order=order, vocab=vocab, probs=probs, backoffs=backoffs)


def read_arpa_file(path) -> NGramModel:
    with open(path, encoding="utf-8") as fh:
        return read_arpa(fh)
