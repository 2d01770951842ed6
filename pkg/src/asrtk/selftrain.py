"""Confidence-thresholded semi-supervised training loop.

The loop trains a recognizer on the manually transcribed pool, transcribes
the untranscribed pool with it, keeps the hypotheses whose decoder confidence
reaches the mean confidence over all hypotheses, retrains on the union, and
repeats.  Selected sets do not accumulate: each pass re-transcribes the full
untranscribed pool and its selection replaces the previous one.

Acoustic modelling itself is out of scope; decoders and trainers plug in
behind two small interfaces.  A decoder exposes ``decode(utterances) ->
list[Hypothesis]`` and a ``decoder_id``; a trainer exposes ``train(pool) ->
decoder``.  Plug-ins may be in-process objects (the simulators below) or
external subprocesses speaking the dataset-manifest / hypothesis-JSONL
formats on standard streams.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import subprocess
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .corpus import Sentence

logger = logging.getLogger(__name__)

MEAN_THRESHOLD = "mean_threshold"
NO_THRESHOLD = "none"
POLICIES = (MEAN_THRESHOLD, NO_THRESHOLD)


@dataclass
class Utterance:
    """One audio segment; the audio itself is never dereferenced here."""

    id: str
    duration_seconds: float
    audio_ref: str = ""
    reference_text: Sentence | None = None

    def __post_init__(self):
        if self.duration_seconds <= 0.0:
            raise ValueError(
                f"utterance {self.id!r}: duration must be > 0, "
                f"got {self.duration_seconds}"
            )


@dataclass
class Hypothesis:
    """Automatic transcription of one utterance."""

    utterance_id: str
    text: Sentence
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(
                f"hypothesis {self.utterance_id!r}: confidence "
                f"{self.confidence} outside [0, 1]"
            )


@dataclass
class SelectionResult:
    threshold: float
    selected: list = field(default_factory=list)
    rejected: list = field(default_factory=list)
    selected_hours: float = 0.0
    total_hours: float = 0.0


@dataclass
class PassReport:
    pass_index: int
    mant_hours: float
    autot_hours: float
    decoder_id: str
    selection: SelectionResult
    policy: str = MEAN_THRESHOLD
    wer_on_test: float | None = None


def hours(utterances: Iterable[Utterance]) -> float:
    return sum(u.duration_seconds for u in utterances) / 3600.0


def segment_fixed(total_duration_seconds: float, segment_seconds: float,
                  min_seconds: float = 5.0):
    """Cut [0, total) into contiguous fixed-length spans.

    The final span may be shorter; a tail shorter than ``min_seconds`` is
    merged into the previous span.  If the whole input is shorter than the
    minimum, a single full-length span is returned.
    """
    if total_duration_seconds <= 0.0:
        raise ValueError(f"total duration must be > 0, got {total_duration_seconds}")
    if segment_seconds <= 0.0:
        raise ValueError(f"segment length must be > 0, got {segment_seconds}")
    spans = []
    start = 0.0
    while start < total_duration_seconds:
        end = min(start + segment_seconds, total_duration_seconds)
        spans.append((start, end))
        start = end
    last_start, last_end = spans[-1]
    if last_end - last_start < min_seconds and len(spans) > 1:
        prev_start, _ = spans[-2]
        spans[-2:] = [(prev_start, last_end)]
    return spans


def mean_confidence_threshold(hyps: Sequence[Hypothesis]) -> float:
    """Arithmetic mean of all hypothesis confidences."""
    if not hyps:
        raise ValueError("cannot take the mean confidence of no hypotheses")
    return sum(h.confidence for h in hyps) / len(hyps)


def select(hyps: Sequence[Hypothesis], durations, policy: str) -> SelectionResult:
    """Split hypotheses into selected/rejected under the given policy.

    ``durations`` maps utterance id to seconds.  Under ``mean_threshold``,
    a hypothesis is selected iff its confidence is >= the mean confidence
    (ties select, so an all-equal pool keeps everything).  Under ``none``
    everything is selected and the threshold is recorded as 0.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown selection policy {policy!r}")
    for h in hyps:
        if h.utterance_id not in durations:
            raise ValueError(f"no duration for utterance {h.utterance_id!r}")
    if policy == NO_THRESHOLD:
        threshold = 0.0
        selected = list(hyps)
        rejected = []
    else:
        threshold = mean_confidence_threshold(hyps)
        selected = [h for h in hyps if h.confidence >= threshold]
        rejected = [h for h in hyps if h.confidence < threshold]
    sel_hours = sum(durations[h.utterance_id] for h in selected) / 3600.0
    rej_hours = sum(durations[h.utterance_id] for h in rejected) / 3600.0
    return SelectionResult(
        threshold=threshold,
        selected=selected,
        rejected=rejected,
        selected_hours=sel_hours,
        total_hours=sel_hours + rej_hours,
    )


def run_pass(mant: Sequence[Utterance], autot: Sequence[Utterance],
             untranscribed: Sequence[Utterance], trainer, policy: str,
             pass_index: int = 1, test_set: Sequence[Utterance] | None = None):
    """One semi-supervised pass: train, transcribe, select.

    The trainer consumes ManT plus the previous pass's selected AutoT and
    returns a decoder; that decoder transcribes the full untranscribed pool,
    and selection is applied to the result.  Utterances the decoder fails to
    transcribe are recorded as rejected with confidence 0.  Returns
    ``(PassReport, decoder)``; if ``test_set`` is given (utterances with
    reference texts), the report carries the decoder's pooled WER on it.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown selection policy {policy!r}")
    pool = list(mant) + list(autot)
    decoder = trainer.train(pool)
    decoder_id = getattr(decoder, "decoder_id", "decoder")

    ordered = sorted(untranscribed, key=lambda u: u.id)
    durations = {u.id: u.duration_seconds for u in ordered}
    produced = {h.utterance_id: h for h in decoder.decode(ordered)}
    ok = []
    failed = []
    for utt in ordered:
        hyp = produced.get(utt.id)
        if hyp is None:
            logger.warning(
                "pass %d: decoder %s produced no hypothesis for %s; "
                "recording it as rejected with confidence 0",
                pass_index, decoder_id, utt.id,
            )
            failed.append(Hypothesis(utterance_id=utt.id, text=[], confidence=0.0))
        else:
            ok.append(hyp)

    if ok:
        selection = select(ok, durations, policy)
    else:
        selection = SelectionResult(threshold=0.0)
    if failed:
        failed_hours = sum(durations[h.utterance_id] for h in failed) / 3600.0
        selection = SelectionResult(
            threshold=selection.threshold,
            selected=selection.selected,
            rejected=selection.rejected + failed,
            selected_hours=selection.selected_hours,
            total_hours=selection.total_hours + failed_hours,
        )

    wer = None
    if test_set:
        from .metrics import corpus_wer

        refs = {u.id: u.reference_text for u in test_set}
        test_hyps = {h.utterance_id: h for h in decoder.decode(sorted(test_set, key=lambda u: u.id))}
        pairs = []
        for utt_id in sorted(refs):
            hyp = test_hyps.get(utt_id)
            pairs.append((refs[utt_id], hyp.text if hyp else []))
        wer = corpus_wer(pairs)

    report = PassReport(
        pass_index=pass_index,
        mant_hours=hours(mant),
        autot_hours=selection.selected_hours,
        decoder_id=decoder_id,
        selection=selection,
        policy=policy,
        wer_on_test=wer,
    )
    return report, decoder


@dataclass
class SslPlan:
    """Multi-pass plan; ``passes`` lists the selection policies per pass.

    A pass may carry several policies (the final pass is typically evaluated
    both with and without thresholding); the first listed policy of a pass is
    the one whose selection feeds the next pass.
    """

    mant: list
    untranscribed: list
    passes: list
    trainer: object
    test_set: list | None = None


@dataclass
class SslRunResult:
    reports: list            # PassReport, in execution order
    autot_corpora: dict      # (pass_index, policy) -> list[Sentence]

    def autot_corpus(self, pass_index: int, policy: str = MEAN_THRESHOLD):
        return self.autot_corpora[(pass_index, policy)]


def run_plan(plan: SslPlan) -> SslRunResult:
    """Run all passes of a plan, re-transcribing the pool each pass."""
    if not plan.passes:
        raise ValueError("plan has no passes")
    norm_passes = []
    for entry in plan.passes:
        policies = [entry] if isinstance(entry, str) else list(entry)
        if not policies:
            raise ValueError("a pass needs at least one policy")
        for p in policies:
            if p not in POLICIES:
                raise ValueError(f"unknown selection policy {p!r}")
        norm_passes.append(policies)

    reports = []
    corpora = {}
    autot_utts = []
    for k, policies in enumerate(norm_passes, start=1):
        feeder = None
        for policy in policies:
            report, _ = run_pass(
                mant=plan.mant,
                autot=autot_utts,
                untranscribed=plan.untranscribed,
                trainer=plan.trainer,
                policy=policy,
                pass_index=k,
                test_set=plan.test_set,
            )
            reports.append(report)
            corpora[(k, policy)] = [list(h.text) for h in report.selection.selected]
            if feeder is None:
                feeder = report
        durations = {u.id: u.duration_seconds for u in plan.untranscribed}
        autot_utts = [
            Utterance(
                id=h.utterance_id,
                duration_seconds=durations[h.utterance_id],
                reference_text=list(h.text),
            )
            for h in feeder.selection.selected
        ]
    return SslRunResult(reports=reports, autot_corpora=corpora)


# --- simulation harness ------------------------------------------------------


def _utterance_key(seed: int, utt_id: str) -> list:
    digest = hashlib.sha256(f"{seed}:{utt_id}".encode("utf-8")).digest()
    return [seed & 0xFFFFFFFF, int.from_bytes(digest[:8], "big")]


class SimulatedDecoder:
    """Deterministic stand-in for a real recognizer.

    Each reference token is corrupted independently with probability
    (1 - quality).  The corruption mode (substitution from the word list,
    deletion, or insertion after the token) is drawn once per utterance;
    keeping deletions and insertions out of the same utterance stops the
    aligner from collapsing del+ins pairs into substitutions, so a fully
    corrupted stream really scores ~100% WER.  Confidence is a noisy
    monotone function of per-utterance accuracy; all randomness derives from
    (seed, utterance id), so runs are reproducible and two decoders sharing a
    seed corrupt the same token positions whenever their rates allow.
    Utterances without a hidden reference text cannot be simulated and are
    skipped (the loop records them as failures).
    """

    def __init__(self, quality: float, seed: int, vocab: Sequence[str],
                 decoder_id: str = "sim", confidence_noise: float = 0.06):
        if not 0.0 <= quality <= 1.0:
            raise ValueError(f"quality must be in [0, 1], got {quality}")
        if not vocab:
            raise ValueError("simulated decoder needs a nonempty word list")
        self.quality = quality
        self.seed = seed
        self.vocab = list(vocab)
        self.decoder_id = decoder_id
        self.confidence_noise = confidence_noise

    def transcribe(self, utt: Utterance) -> Hypothesis:
        if utt.reference_text is None:
            raise ValueError(f"utterance {utt.id!r} has no reference to simulate from")
        ref = list(utt.reference_text)
        n = len(ref)
        rng = np.random.default_rng(_utterance_key(self.seed, utt.id))
        op = int(rng.integers(0, 3))
        gate = rng.random(n)
        repl = rng.integers(0, len(self.vocab), n)
        noise = float(rng.standard_normal())

        rate = 1.0 - self.quality
        out = []
        intact = 0
        for i, token in enumerate(ref):
            if gate[i] >= rate:
                out.append(token)
                intact += 1
            elif op == 0:        # substitution
                out.append(self.vocab[repl[i]])
            elif op == 1:        # deletion
                pass
            else:                # insertion after the token
                out.append(token)
                out.append(self.vocab[repl[i]])
        accuracy = intact / n if n else 1.0
        # clipped noise shrinking with accuracy keeps perfect decodes clearly
        # above noisy ones
        sigma = self.confidence_noise
        eps = max(-2.5, min(2.5, noise)) * sigma * (1.0 - 0.8 * accuracy)
        confidence = min(max(0.1 + 0.8 * accuracy + eps, 0.0), 1.0)
        return Hypothesis(utterance_id=utt.id, text=out, confidence=confidence)

    def decode(self, utterances) -> list:
        hyps = []
        for utt in utterances:
            if utt.reference_text is None:
                continue
            hyps.append(self.transcribe(utt))
        return hyps


class SimulatedTrainer:
    """Produces simulated decoders whose quality grows with training hours.

    quality(h) = max_quality - (max_quality - floor_quality) * exp(-h / hours_scale)

    The decoder seed is the trainer seed, so successive passes share their
    corruption draws: more hours can only un-corrupt tokens, which makes the
    simulated WER monotone in training-pool size.
    """

    def __init__(self, seed: int, floor_quality: float = 0.5,
                 max_quality: float = 0.95, hours_scale: float = 3.0,
                 confidence_noise: float = 0.06):
        if not 0.0 <= floor_quality <= max_quality <= 1.0:
            raise ValueError(
                f"need 0 <= floor_quality <= max_quality <= 1, "
                f"got {floor_quality}, {max_quality}"
            )
        if hours_scale <= 0.0:
            raise ValueError(f"hours_scale must be > 0, got {hours_scale}")
        self.seed = seed
        self.floor_quality = floor_quality
        self.max_quality = max_quality
        self.hours_scale = hours_scale
        self.confidence_noise = confidence_noise

    def quality_for_hours(self, h: float) -> float:
        span = self.max_quality - self.floor_quality
        return self.max_quality - span * math.exp(-h / self.hours_scale)

    def train(self, pool: Sequence[Utterance]):
        h = hours(pool)
        quality = self.quality_for_hours(h)
        words = sorted({t for u in pool if u.reference_text for t in u.reference_text})
        if not words:
            raise ValueError("training pool has no transcribed text")
        return SimulatedDecoder(
            quality=quality,
            seed=self.seed,
            vocab=words,
            decoder_id=f"sim-h{h:.2f}-q{quality:.3f}",
            confidence_noise=self.confidence_noise,
        )


class ConstantTrainer:
    """Trainer that ignores the pool and always returns the same decoder."""

    def __init__(self, decoder):
        self.decoder = decoder

    def train(self, pool):
        return self.decoder


class SyntheticLanguage:
    """Deterministic bigram-chain language for desk-scale fixtures.

    Words are random two/three-syllable strings; each word has a sparse
    successor distribution, so corpora drawn from the language have realistic
    n-gram sparsity at small sample sizes.
    """

    def __init__(self, seed: int = 0, vocab_size: int = 120, branching: int = 8,
                 mean_length: float = 9.0):
        rng = np.random.default_rng([seed, 0x5347])
        syllables = [c + v for c in "bdfgjklmnprstw" for v in "aeiou"]
        words = set()
        while len(words) < vocab_size:
            k = 2 + int(rng.integers(0, 2))
            idx = rng.integers(0, len(syllables), k)
            words.add("".join(syllables[i] for i in idx))
        self.words = sorted(words)
        self.mean_length = mean_length
        self._init_probs = rng.dirichlet(np.ones(vocab_size))
        self._succ = []
        self._succ_probs = []
        for _ in range(vocab_size):
            succ = rng.choice(vocab_size, size=min(branching, vocab_size), replace=False)
            self._succ.append(succ)
            self._succ_probs.append(rng.dirichlet(np.ones(len(succ))))

    def sample_sentence(self, rng) -> Sentence:
        length = int(np.clip(rng.geometric(1.0 / self.mean_length), 3, 18))
        idx = rng.choice(len(self.words), p=self._init_probs)
        sent = [self.words[idx]]
        for _ in range(length - 1):
            pos = rng.choice(len(self._succ[idx]), p=self._succ_probs[idx])
            idx = self._succ[idx][pos]
            sent.append(self.words[idx])
        return sent

    def sample_corpus(self, n_sentences: int, seed: int) -> list:
        rng = np.random.default_rng([seed, 0xC0])
        return [self.sample_sentence(rng) for _ in range(n_sentences)]

    def sample_utterances(self, n: int, seed: int, id_prefix: str = "utt",
                          seconds_per_token: float = 0.45) -> list:
        rng = np.random.default_rng([seed, 0x07])
        utts = []
        for i in range(n):
            text = self.sample_sentence(rng)
            jitter = 0.8 + 0.4 * rng.random()
            utts.append(Utterance(
                id=f"{id_prefix}{i:05d}",
                duration_seconds=round(len(text) * seconds_per_token * jitter, 3),
                audio_ref=f"synthetic://{id_prefix}{i:05d}",
                reference_text=text,
            ))
        return utts


# --- subprocess plug-in seam -------------------------------------------------


def utterances_to_manifest(utterances: Sequence[Utterance]) -> list:
    """Dataset manifest payload: list of {id, duration_seconds, audio_ref, text?}."""
    out = []
    for u in utterances:
        entry = {
            "id": u.id,
            "duration_seconds": u.duration_seconds,
            "audio_ref": u.audio_ref,
        }
        if u.reference_text is not None:
            entry["text"] = " ".join(u.reference_text)
        out.append(entry)
    return out


def utterances_from_manifest(entries) -> list:
    utts = []
    for entry in entries:
        for key in ("id", "duration_seconds"):
            if key not in entry:
                raise ValueError(f"manifest entry missing key {key!r}: {entry!r}")
        text = entry.get("text")
        utts.append(Utterance(
            id=entry["id"],
            duration_seconds=float(entry["duration_seconds"]),
            audio_ref=entry.get("audio_ref", ""),
            reference_text=text.split() if text is not None else None,
        ))
    return utts


def load_utterances(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return utterances_from_manifest(json.load(fh))


def save_utterances(utterances, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(utterances_to_manifest(utterances), fh, indent=2, sort_keys=True)
        fh.write("\n")


def hypotheses_to_jsonl(hyps: Sequence[Hypothesis]) -> str:
    lines = [
        json.dumps({
            "utterance_id": h.utterance_id,
            "text": " ".join(h.text),
            "confidence": h.confidence,
        }, sort_keys=True)
        for h in hyps
    ]
    return "".join(line + "\n" for line in lines)


def hypotheses_from_jsonl(text: str) -> list:
    hyps = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"hypothesis line {lineno}: invalid JSON") from exc
        for key in ("utterance_id", "text", "confidence"):
            if key not in obj:
                raise ValueError(f"hypothesis line {lineno}: missing key {key!r}")
        hyps.append(Hypothesis(
            utterance_id=obj["utterance_id"],
            text=str(obj["text"]).split(),
            confidence=float(obj["confidence"]),
        ))
    return hyps


class SubprocessDecoder:
    """Decoder plug-in run as a child process.

    The process receives the dataset manifest (JSON) on stdin and must write
    hypothesis JSONL on stdout.  Utterances missing from its output are
    treated as decode failures by the loop.
    """

    def __init__(self, command: Sequence[str], decoder_id: str | None = None):
        self.command = list(command)
        self.decoder_id = decoder_id or " ".join(self.command)

    def decode(self, utterances) -> list:
        payload = json.dumps(utterances_to_manifest(utterances))
        proc = subprocess.run(
            self.command, input=payload, capture_output=True, text=True,
        )
        if proc.returncode != 0:
            raise RuntimeError(
                f"decoder command {self.command!r} exited "
                f"{proc.returncode}: {proc.stderr.strip()}"
            )
        return hypotheses_from_jsonl(proc.stdout)


class SubprocessTrainer:
    """Trainer plug-in run as a child process.

    The process receives the training-pool manifest (JSON) on stdin and must
    write a JSON object ``{"model_ref": ...}`` on stdout.  The decoder
    command template is instantiated by substituting ``{model}`` with the
    returned reference.
    """

    def __init__(self, command: Sequence[str], decoder_command: Sequence[str]):
        self.command = list(command)
        self.decoder_command = list(decoder_command)

    def train(self, pool):
        payload = json.dumps(utterances_to_manifest(pool))
        proc = subprocess.run(
            self.command, input=payload, capture_output=True, text=True,
        )
        if proc.returncode != 0:
            raise RuntimeError(
                f"trainer command {self.command!r} exited "
                f"{proc.returncode}: {proc.stderr.strip()}"
            )
        try:
            result = json.loads(proc.stdout)
        except json.JSONDecodeError as exc:
            raise ValueError("trainer output is not valid JSON") from exc
        if "model_ref" not in result:
            raise ValueError("trainer output missing key 'model_ref'")
        model_ref = str(result["model_ref"])
        command = [arg.replace("{model}", model_ref) for arg in self.decoder_command]
        return SubprocessDecoder(command, decoder_id=model_ref)
