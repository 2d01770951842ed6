import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from asrtk.selftrain import SyntheticLanguage


@pytest.fixture(scope="session")
def synth_language():
    return SyntheticLanguage(seed=7, vocab_size=150, branching=9)


@pytest.fixture(scope="session")
def fixture_corpora(synth_language):
    """Five corpora of 10..10k sentences from two synthetic languages."""
    small_lang = SyntheticLanguage(seed=31, vocab_size=40, branching=5)
    return {
        "tiny10": small_lang.sample_corpus(10, seed=1),
        "small100": small_lang.sample_corpus(100, seed=2),
        "mid500": synth_language.sample_corpus(500, seed=3),
        "big2k": synth_language.sample_corpus(2000, seed=4),
        "huge10k": synth_language.sample_corpus(10000, seed=5),
    }
