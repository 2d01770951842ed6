"""Word-error-rate scoring and relative-improvement reporting.

WER uses the standard dynamic-programming alignment with unit costs for
substitutions, deletions and insertions; corpus WER pools error counts over
all utterances (sum of errors / sum of reference lengths), matching the usual
ASR reporting convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field

MATCH = "match"
SUB = "sub"
DELETION = "del"
INSERTION = "ins"


@dataclass
class AlignmentResult:
    substitutions: int
    deletions: int
    insertions: int
    matches: int
    ref_len: int
    hyp_len: int
    wer_percent: float
    # (ref token or None, hyp token or None, op label), in sentence order
    aligned_pairs: list = field(default_factory=list)

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions


def align(ref, hyp) -> AlignmentResult:
    """Minimum-edit-distance alignment of one hypothesis against a reference.

    Backtrace ties are broken preferring match > substitution > deletion >
    insertion.  The reference must be nonempty (WER is undefined otherwise).
    """
    ref = list(ref)
    hyp = list(hyp)
    if not ref:
        raise ValueError("reference is empty; WER undefined")
    m, n = len(ref), len(hyp)
    dist = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        dist[i][0] = i
    for j in range(1, n + 1):
        dist[0][j] = j
    for i in range(1, m + 1):
        row = dist[i]
        prev = dist[i - 1]
        r = ref[i - 1]
        for j in range(1, n + 1):
            diag = prev[j - 1] + (r != hyp[j - 1])
            up = prev[j] + 1
            left = row[j - 1] + 1
            row[j] = diag if diag <= up and diag <= left else (up if up <= left else left)

    pairs = []
    subs = dels = ins = matches = 0
    i, j = m, n
    while i > 0 or j > 0:
        if (i > 0 and j > 0 and ref[i - 1] == hyp[j - 1]
                and dist[i][j] == dist[i - 1][j - 1]):
            pairs.append((ref[i - 1], hyp[j - 1], MATCH))
            matches += 1
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and dist[i][j] == dist[i - 1][j - 1] + 1:
            pairs.append((ref[i - 1], hyp[j - 1], SUB))
            subs += 1
            i, j = i - 1, j - 1
        elif i > 0 and dist[i][j] == dist[i - 1][j] + 1:
            pairs.append((ref[i - 1], None, DELETION))
            dels += 1
            i -= 1
        else:
            pairs.append((None, hyp[j - 1], INSERTION))
            ins += 1
            j -= 1
    pairs.reverse()

    return AlignmentResult(
        substitutions=subs,
        deletions=dels,
        insertions=ins,
        matches=matches,
        ref_len=m,
        hyp_len=n,
        wer_percent=100.0 * (subs + dels + ins) / m,
        aligned_pairs=pairs,
    )


def corpus_wer(pairs) -> float:
    """Pooled WER over (ref, hyp) pairs: 100 * sum(errors) / sum(ref lengths)."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("no utterance pairs to score")
    errors = 0
    ref_tokens = 0
    for ref, hyp in pairs:
        result = align(ref, hyp)
        errors += result.errors
        ref_tokens += result.ref_len
    return 100.0 * errors / ref_tokens


def relative_improvement(baseline: float, improved: float) -> float:
    """100 * (baseline - improved) / baseline, rounded to 2 decimals."""
    if baseline <= 0.0:
        raise ValueError(f"baseline must be > 0, got {baseline}")
    return round(100.0 * (baseline - improved) / baseline, 2)


def read_id_text_file(path) -> dict:
    """Parse an utterance file: ``<utterance-id><TAB><text>`` per line.

    Returns {id: token list}.  A line without a tab is an id with empty text.
    """
    table = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            utt_id, _, text = line.partition("\t")
            utt_id = utt_id.strip()
            if not utt_id:
                raise ValueError(f"{path}: line {lineno}: missing utterance id")
            if utt_id in table:
                raise ValueError(f"{path}: line {lineno}: duplicate id {utt_id!r}")
            table[utt_id] = text.split()
    return table


def score_files(ref_path, hyp_path, per_utterance: bool = False) -> dict:
    """Align two id-prefixed files by utterance id and report pooled WER.

    Every reference id must be present in the hypothesis file; hypothesis
    ids without a reference are ignored.
    """
    refs = read_id_text_file(ref_path)
    hyps = read_id_text_file(hyp_path)
    if not refs:
        raise ValueError(f"{ref_path}: no reference utterances")
    missing = sorted(set(refs) - set(hyps))
    if missing:
        raise ValueError(f"{hyp_path}: no hypothesis for id {missing[0]!r}")
    subs = dels = ins = ref_tokens = 0
    breakdown = []
    for utt_id in sorted(refs):
        result = align(refs[utt_id], hyps[utt_id])
        subs += result.substitutions
        dels += result.deletions
        ins += result.insertions
        ref_tokens += result.ref_len
        if per_utterance:
            breakdown.append({
                "utterance_id": utt_id,
                "substitutions": result.substitutions,
                "deletions": result.deletions,
                "insertions": result.insertions,
                "ref_len": result.ref_len,
                "wer_percent": result.wer_percent,
            })
    report = {
        "substitutions": subs,
        "deletions": dels,
        "insertions": ins,
        "ref_tokens": ref_tokens,
        "num_utterances": len(refs),
        "wer_percent": 100.0 * (subs + dels + ins) / ref_tokens,
    }
    if per_utterance:
        report["per_utterance"] = breakdown
    return report
