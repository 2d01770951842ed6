import math

import pytest

from asrtk.corpus import BOS, EOS, UNK, Vocabulary, build_vocabulary, count_ngrams
from asrtk.ngram_lm import (
    MODIFIED_KNESER_NEY,
    WITTEN_BELL,
    NGramModel,
    ZeroProbabilityError,
    perplexity,
    sum_event_probs,
    train,
)

import oracles


def train_on(sentences, order, smoothing, min_count=1):
    vocab = build_vocabulary(sentences, min_count=min_count)
    counts = count_ngrams(sentences, order, vocab)
    return train(counts, vocab, order, smoothing), vocab


class TestWittenBellHandExample:
    # corpus "a a a b", order 1: counts a:3 b:1 </s>:1, so c=5, T=3 and the
    # uniform base is 1/4 over {a, b, </s>, <unk>}:
    #   p(a)     = (3 + 3/4) / 8 = 0.46875
    #   p(b)     = (1 + 3/4) / 8 = 0.21875
    #   p(</s>)  = (1 + 3/4) / 8 = 0.21875
    #   p(<unk>) = (0 + 3/4) / 8 = 0.09375
    EXPECTED = {"a": 0.46875, "b": 0.21875, EOS: 0.21875, UNK: 0.09375}

    def test_frozen_values(self):
        model, _ = train_on([["a", "a", "a", "b"]], order=1, smoothing=WITTEN_BELL)
        for word, expected in self.EXPECTED.items():
            assert model.prob(word) == pytest.approx(expected, abs=1e-12)

    def test_oracle_agrees_with_frozen_values(self):
        raw = oracles.raw_levels_from_sentences(
            [["a", "a", "a", "b"]], order=1, vocab_words={"a", "b", BOS, EOS, UNK})
        for word, expected in self.EXPECTED.items():
            got = oracles.smoothed_prob(word, (), raw, 1, "witten_bell", 4)
            assert got == pytest.approx(expected, abs=1e-12)

    def test_sums_to_one(self):
        model, _ = train_on([["a", "a", "a", "b"]], order=1, smoothing=WITTEN_BELL)
        assert sum_event_probs(model) == pytest.approx(1.0, abs=1e-12)


SMALL_CORPORA = {
    # all well under 50 tokens
    "repeat": [["a", "a", "a", "b"]],
    "two_sents": [["a", "b", "a"], ["b", "a", "b", "b"]],
    "with_oov_at_count": [["a", "x", "a"], ["b", "a"], ["x", "b"]],
    "singletons": [["c"], ["d"], ["c", "d"], ["a", "b", "c", "d", "a", "b"]],
}


class TestOracleEquivalence:
    @pytest.mark.parametrize("name", sorted(SMALL_CORPORA))
    @pytest.mark.parametrize("order", [1, 2, 3])
    @pytest.mark.parametrize("smoothing", [WITTEN_BELL, MODIFIED_KNESER_NEY])
    def test_trained_probs_match_direct_formula(self, name, order, smoothing):
        sentences = SMALL_CORPORA[name]
        model, vocab = train_on(sentences, order, smoothing, min_count=1)
        raw = oracles.raw_levels_from_sentences(sentences, order, vocab.words)
        n_events = len(vocab.event_words)
        words = sorted(vocab.event_words)
        contexts = [()]
        if order >= 2:
            contexts += [(w,) for w in words] + [(BOS,)]
        if order >= 3:
            contexts += [(BOS, BOS), (BOS, words[0]), (words[0], words[1])]
        for ctx in contexts:
            for w in words:
                want = oracles.smoothed_prob(w, ctx, raw, order, smoothing, n_events)
                got = model.prob(w, ctx)
                assert got == pytest.approx(want, abs=1e-9), (ctx, w)


class TestNormalization:
    @pytest.mark.parametrize("smoothing", [WITTEN_BELL, MODIFIED_KNESER_NEY])
    def test_observed_contexts_sum_to_one(self, fixture_corpora, smoothing):
        sentences = fixture_corpora["small100"]
        model, vocab = train_on(sentences, order=3, smoothing=smoothing, min_count=2)
        seen_contexts = {g[:-1] for g, _, _ in model.entries() if len(g) == 3}
        for ctx in sorted(seen_contexts)[:40]:
            assert sum_event_probs(model, ctx) == pytest.approx(1.0, abs=1e-6), ctx

    def test_unseen_and_oov_contexts_sum_to_one(self, fixture_corpora):
        sentences = fixture_corpora["small100"]
        model, vocab = train_on(sentences, order=3, smoothing=MODIFIED_KNESER_NEY,
                                min_count=2)
        words = sorted(vocab.event_words)
        for ctx in [("no-such-word",), ("no-such", "words-at-all"),
                    (words[0], "no-such-word"), (EOS, words[0])]:
            assert sum_event_probs(model, ctx) == pytest.approx(1.0, abs=1e-6), ctx

    def test_seen_event_beats_unseen_after_sentence_start(self):
        model, vocab = train_on([["a"]], order=2, smoothing=WITTEN_BELL)
        vocab_b = Vocabulary(words=frozenset({"a", "b"}))
        counts = count_ngrams([["a"]], 2, vocab_b)
        model = train(counts, vocab_b, 2, WITTEN_BELL)
        assert model.prob("a", (BOS,)) > model.prob("b", (BOS,))

    def test_backoff_reachability(self, fixture_corpora):
        sentences = fixture_corpora["tiny10"]
        model, vocab = train_on(sentences, order=3, smoothing=MODIFIED_KNESER_NEY)
        words = sorted(vocab.event_words)
        for w in words:
            assert model.prob(w, (words[0], words[-1])) > 0.0
            assert model.prob(w, ()) > 0.0


class TestSmoothingFallback:
    def test_tiny_corpus_falls_back_and_stays_finite(self):
        model, vocab = train_on([["a", "a", "a", "b"]], order=2,
                                smoothing=MODIFIED_KNESER_NEY)
        assert any("witten_bell fallback" in line for line in model.smoothing_log)
        for gram, lp, bow in model.entries():
            assert math.isfinite(lp)
            assert bow is None or math.isfinite(bow)

    def test_rich_corpus_uses_kneser_ney(self, fixture_corpora):
        model, _ = train_on(fixture_corpora["huge10k"], order=3,
                            smoothing=MODIFIED_KNESER_NEY, min_count=1)
        assert any(line.endswith("modified_kneser_ney") for line in model.smoothing_log)


class TestScoring:
    def make_manual_model(self):
        vocab = Vocabulary(words=frozenset({"a", "b"}))
        probs = {
            ("a",): -1.0,
            ("b",): -0.5,
            (EOS,): -0.7,
            (UNK,): -2.0,
            (BOS,): -99.0,
            ("a", "b"): -0.2,
        }
        backoffs = {("a",): -0.301}
        return NGramModel(order=2, vocab=vocab, probs=probs, backoffs=backoffs)

    def test_stored_bigram_lookup(self):
        model = self.make_manual_model()
        assert model.log10_prob("b", ("a",)) == -0.2

    def test_backoff_zero_is_identity(self):
        model = self.make_manual_model()
        # ("b",) has no stored backoff weight -> implicit 0.0
        assert model.log10_prob("a", ("b",)) == -1.0

    def test_backoff_adds_weights(self):
        model = self.make_manual_model()
        assert model.log10_prob("a", ("a",)) == pytest.approx(-1.301)

    def test_bos_is_never_an_event(self):
        model = self.make_manual_model()
        with pytest.raises(ValueError):
            model.log10_prob(BOS, ("a",))

    def test_long_context_truncated(self):
        model = self.make_manual_model()
        assert model.log10_prob("b", ("x", "y", "a")) == -0.2

    def test_oov_scores_as_unk(self):
        model = self.make_manual_model()
        assert model.log10_prob("zzz", ("b",)) == -2.0


class TestPerplexity:
    def uniform_third_model(self):
        third = math.log10(1.0 / 3.0)
        vocab = Vocabulary(words=frozenset({"a", "b"}))
        probs = {("a",): third, ("b",): third, (EOS,): third,
                 (UNK,): -99.0, (BOS,): -99.0}
        return NGramModel(order=1, vocab=vocab, probs=probs, backoffs={})

    def test_uniform_third_gives_three(self):
        result = perplexity(self.uniform_third_model(), [["a", "b"]])
        assert result.value == pytest.approx(3.0, abs=1e-12)
        assert result.n_scored == 3
        assert result.oov_count == 0

    def test_certain_model_gives_one(self):
        vocab = Vocabulary(words=frozenset({"a"}))
        probs = {("a",): 0.0, (EOS,): 0.0, (UNK,): 0.0, (BOS,): -99.0}
        model = NGramModel(order=1, vocab=vocab, probs=probs, backoffs={})
        assert perplexity(model, [["a", "a"], ["a"]]).value == pytest.approx(1.0)

    def test_oov_events_counted(self):
        result = perplexity(self.uniform_third_model(), [["a", "zzz"]])
        assert result.oov_count == 1
        assert result.n_scored == 3

    def test_zero_probability_event_is_named(self):
        vocab = Vocabulary(words=frozenset({"a"}))
        probs = {("a",): -0.5, (EOS,): -0.5, (BOS,): -99.0}  # no <unk>
        model = NGramModel(order=1, vocab=vocab, probs=probs, backoffs={})
        with pytest.raises(ZeroProbabilityError, match="zzz"):
            perplexity(model, [["zzz"]])

    def test_empty_text_rejected(self):
        with pytest.raises(ValueError):
            perplexity(self.uniform_third_model(), [])

    def test_adding_mass_to_events_never_hurts(self, fixture_corpora):
        sentences = fixture_corpora["small100"]
        model, _ = train_on(sentences[:50], order=2, smoothing=WITTEN_BELL)
        text = sentences[50:70]

        class Boosted:
            context_pads = model.context_pads
            vocab = model.vocab

            def log10_prob(self, word, context=()):
                return math.log10(10.0 ** model.log10_prob(word, context) + 0.05)

        base = perplexity(model, text)
        boosted = perplexity(Boosted(), text)
        assert boosted.value <= base.value

    def test_trained_model_perplexity_runs(self, fixture_corpora):
        sentences = fixture_corpora["mid500"]
        model, _ = train_on(sentences[:400], order=3,
                            smoothing=MODIFIED_KNESER_NEY, min_count=2)
        result = perplexity(model, sentences[400:])
        assert result.value > 1.0
        assert result.n_scored == sum(len(s) + 1 for s in sentences[400:])


class TestTrainValidation:
    def test_order_zero_rejected(self):
        vocab = build_vocabulary([["a"]], 1)
        counts = count_ngrams([["a"]], 1, vocab)
        with pytest.raises(ValueError):
            train(counts, vocab, 0, WITTEN_BELL)

    def test_counts_order_too_low(self):
        vocab = build_vocabulary([["a"]], 1)
        counts = count_ngrams([["a"]], 1, vocab)
        with pytest.raises(ValueError):
            train(counts, vocab, 2, WITTEN_BELL)

    def test_unknown_smoothing(self):
        vocab = build_vocabulary([["a"]], 1)
        counts = count_ngrams([["a"]], 1, vocab)
        with pytest.raises(ValueError):
            train(counts, vocab, 1, "laplace")

    def test_empty_counts_rejected(self):
        vocab = build_vocabulary([], 1)
        from asrtk.corpus import CountTable

        with pytest.raises(ValueError):
            train(CountTable(order=1, counts={}), vocab, 1, WITTEN_BELL)
