import itertools

import pytest

from asrtk.metrics import (
    align,
    corpus_wer,
    read_id_text_file,
    relative_improvement,
    score_files,
)

import oracles


class TestAlign:
    def test_identity(self):
        result = align(["a", "b", "c"], ["a", "b", "c"])
        assert result.wer_percent == 0.0
        assert result.errors == 0
        assert [op for _, _, op in result.aligned_pairs] == ["match"] * 3

    def test_single_substitution(self):
        result = align(["a", "b", "c"], ["a", "x", "c"])
        assert (result.substitutions, result.deletions, result.insertions) == (1, 0, 0)
        assert result.wer_percent == pytest.approx(33.33, abs=0.005)

    def test_single_insertion(self):
        result = align(["a", "b"], ["a", "b", "c"])
        assert (result.substitutions, result.deletions, result.insertions) == (0, 0, 1)
        assert result.wer_percent == pytest.approx(50.0)

    def test_single_deletion(self):
        result = align(["a", "b", "c"], ["a", "c"])
        assert (result.substitutions, result.deletions, result.insertions) == (0, 1, 0)

    def test_empty_hypothesis(self):
        result = align(["a", "b"], [])
        assert result.deletions == 2
        assert result.wer_percent == pytest.approx(100.0)

    def test_empty_reference_rejected(self):
        with pytest.raises(ValueError):
            align([], ["a"])

    def test_counts_are_consistent(self):
        result = align("a b c d".split(), "x b d e".split())
        assert result.matches + result.substitutions + result.deletions == result.ref_len
        assert result.matches + result.substitutions + result.insertions == result.hyp_len

    def test_backtrace_prefers_match_over_sub(self):
        result = align(["a"], ["a"])
        assert result.aligned_pairs == [("a", "a", "match")]

    def test_wer_can_exceed_100(self):
        result = align(["a"], ["x", "y", "z"])
        assert result.errors == 3
        assert result.wer_percent == pytest.approx(300.0)

    def test_matches_brute_force_on_exhaustive_small_space(self):
        alphabet = "ab"
        for rl in range(1, 4):
            for hl in range(0, 4):
                for ref in itertools.product(alphabet, repeat=rl):
                    for hyp in itertools.product(alphabet, repeat=hl):
                        want = oracles.brute_force_edit_distance(ref, hyp)
                        assert align(list(ref), list(hyp)).errors == want

    def test_alignment_invariants_on_random_pairs(self):
        import random

        rng = random.Random(77)
        for _ in range(300):
            ref = [rng.choice("abc") for _ in range(rng.randint(1, 7))]
            hyp = [rng.choice("abc") for _ in range(rng.randint(0, 7))]
            result = align(ref, hyp)
            assert result.errors == oracles.brute_force_edit_distance(ref, hyp)
            assert result.wer_percent >= 0.0
            assert result.wer_percent <= 100.0 * max(len(hyp), len(ref)) / len(ref)
            assert align(ref, ref).errors == 0


class TestCorpusWer:
    def test_single_pair_equals_align(self):
        pair = (["a", "b", "c"], ["a", "x", "c"])
        assert corpus_wer([pair]) == pytest.approx(align(*pair).wer_percent)

    def test_pooled_not_averaged(self):
        pairs = [(["a", "b"], ["a", "x"]), (["c", "d"], ["c", "d"])]
        assert corpus_wer(pairs) == pytest.approx(25.0)

    def test_duplication_invariance(self):
        pairs = [(["a", "b"], ["a", "x"]), (["c", "d"], ["c", "d"])]
        assert corpus_wer(pairs) == pytest.approx(corpus_wer(pairs * 3))

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            corpus_wer([])


class TestRelativeImprovement:
    @pytest.mark.parametrize("baseline,improved,expected", [
        (53.75, 49.59, 7.74),
        (321.31, 300.25, 6.55),
        (53.68, 51.91, 3.30),
        (51.91, 50.95, 1.85),
    ])
    def test_reference_pairs(self, baseline, improved, expected):
        assert relative_improvement(baseline, improved) == expected

    def test_identity_is_zero(self):
        assert relative_improvement(42.0, 42.0) == 0.0

    def test_regression_is_negative(self):
        assert relative_improvement(50.0, 55.0) == -10.0

    def test_nonpositive_baseline_rejected(self):
        with pytest.raises(ValueError):
            relative_improvement(0.0, 1.0)
        with pytest.raises(ValueError):
            relative_improvement(-1.0, 1.0)


class TestFileScoring:
    def write(self, tmp_path, name, rows):
        path = tmp_path / name
        path.write_text("".join(f"{i}\t{t}\n" for i, t in rows), encoding="utf-8")
        return path

    def test_pairing_by_id(self, tmp_path):
        ref = self.write(tmp_path, "ref.txt", [("u1", "a b"), ("u2", "c d")])
        hyp = self.write(tmp_path, "hyp.txt", [("u2", "c d"), ("u1", "a x")])
        report = score_files(ref, hyp)
        assert report["substitutions"] == 1
        assert report["wer_percent"] == pytest.approx(25.0)

    def test_missing_hypothesis_id_rejected(self, tmp_path):
        ref = self.write(tmp_path, "ref.txt", [("u1", "a b"), ("u2", "c")])
        hyp = self.write(tmp_path, "hyp.txt", [("u1", "a b")])
        with pytest.raises(ValueError, match="u2"):
            score_files(ref, hyp)

    def test_extra_hypothesis_ids_ignored(self, tmp_path):
        ref = self.write(tmp_path, "ref.txt", [("u1", "a b")])
        hyp = self.write(tmp_path, "hyp.txt", [("u1", "a b"), ("u9", "x")])
        assert score_files(ref, hyp)["wer_percent"] == 0.0

    def test_per_utterance_breakdown(self, tmp_path):
        ref = self.write(tmp_path, "ref.txt", [("u1", "a b"), ("u2", "c")])
        hyp = self.write(tmp_path, "hyp.txt", [("u1", "a b"), ("u2", "x")])
        report = score_files(ref, hyp, per_utterance=True)
        assert len(report["per_utterance"]) == 2
        by_id = {r["utterance_id"]: r for r in report["per_utterance"]}
        assert by_id["u2"]["substitutions"] == 1

    def test_duplicate_id_rejected(self, tmp_path):
        path = self.write(tmp_path, "dup.txt", [("u1", "a"), ("u1", "b")])
        with pytest.raises(ValueError, match="duplicate"):
            read_id_text_file(path)
