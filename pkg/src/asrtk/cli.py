"""Command-line surface: ``asrtk <subcommand>``.

Exit codes: 0 success, 2 unreadable file, 64 usage error, 65 data/format
error.  Log verbosity is taken from the ``SSL_ASR_LOG`` environment variable
(DEBUG/INFO/WARNING/ERROR).  File outputs are written atomically (temp file
plus rename) and are byte-identical for identical inputs and seeds.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

from . import __version__, corpus, interp, lattice, metrics, ngram_lm, selftrain

logger = logging.getLogger(__name__)

EX_OK = 0
EX_UNREADABLE = 2
EX_USAGE = 64
EX_DATA = 65


class UsageError(Exception):
    """Invalid flag or argument value; exits 64."""


class DataError(Exception):
    """Malformed or incomplete input data; exits 65."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def _configure_logging():
    level_name = os.environ.get("SSL_ASR_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _atomic_write_text(path, text: str):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from exc


def _require(mapping, key, where):
    if key not in mapping:
        raise DataError(f"{where}: missing manifest key {key!r}")
    return mapping[key]


def _resolve(base_dir: Path, path_str: str) -> Path:
    p = Path(path_str)
    return p if p.is_absolute() else base_dir / p


# --- train-lm ----------------------------------------------------------------


def _train_one(sentences, vocab, order, smoothing):
    counts = corpus.count_ngrams(sentences, order, vocab)
    return ngram_lm.train(counts, vocab, order, smoothing)


def _arpa_text(model) -> str:
    import io

    buf = io.StringIO()
    ngram_lm.write_arpa(model, buf)
    return buf.getvalue()


def cmd_train_lm(args) -> int:
    if args.order < 1:
        raise UsageError(f"--order must be >= 1, got {args.order}")
    if args.min_count < 1:
        raise UsageError(f"--min-count must be >= 1, got {args.min_count}")
    if bool(args.manifest) == bool(args.corpora):
        raise UsageError("give either corpus files or --manifest, not both")

    log_lines = []
    if args.manifest:
        base = Path(args.manifest).parent
        manifest = _read_json(args.manifest)
        corpora = _require(manifest, "corpora", args.manifest)
        vocab_rule = _require(manifest, "vocabulary", args.manifest)
        min_count = _require(vocab_rule, "min_count", args.manifest)
        pool_labels = _require(vocab_rule, "pool", args.manifest)
        lm_conf = manifest.get("lm", {})
        order = lm_conf.get("order", args.order)
        smoothing = lm_conf.get("smoothing", args.smoothing)
        texts = {}
        for label, path in sorted(corpora.items()):
            texts[label] = corpus.load_corpus(_resolve(base, path))
        pool = []
        for label in pool_labels:
            if label not in texts:
                raise DataError(f"{args.manifest}: vocabulary pool label {label!r} "
                                f"is not a corpus")
            pool.extend(texts[label])
        vocab = corpus.build_vocabulary(pool, min_count)
        out_dir = Path(args.output or ".")
        out_dir.mkdir(parents=True, exist_ok=True)
        vocab.save(out_dir / "vocab.txt")
        for label in sorted(texts):
            model = _train_one(texts[label], vocab, order, smoothing)
            _atomic_write_text(out_dir / f"{label}.arpa", _arpa_text(model))
            for line in model.smoothing_log:
                log_lines.append(f"{label}: {line}")
            print(f"{label}: {model.num_entries(1)} unigrams -> {label}.arpa")
    else:
        sentences = []
        for path in args.corpora:
            sentences.extend(corpus.load_corpus(path))
        if args.vocab:
            vocab = corpus.Vocabulary.load(args.vocab)
        else:
            vocab = corpus.build_vocabulary(sentences, args.min_count)
        model = _train_one(sentences, vocab, args.order, args.smoothing)
        out = args.output or "lm.arpa"
        _atomic_write_text(out, _arpa_text(model))
        log_lines.extend(model.smoothing_log)
        print(f"wrote {out} ({sum(model.num_entries(n) for n in range(1, model.order + 1))} entries)")

    for line in log_lines:
        logger.info("train-lm: %s", line)
    if args.log:
        _atomic_write_text(args.log, "".join(line + "\n" for line in log_lines))
    return EX_OK


# --- interpolate -------------------------------------------------------------


def _load_mixture(weights_path):
    base = Path(weights_path).parent
    payload = _read_json(weights_path)
    comp_paths = _require(payload, "components", weights_path)
    weights = _require(payload, "weights", weights_path)
    models = [ngram_lm.read_arpa_file(_resolve(base, p)) for p in comp_paths]
    return interp.InterpolatedModel(
        components=models,
        weights=weights,
        tuning_set_id=payload.get("tuning_set_id", ""),
    )


def cmd_interpolate(args) -> int:
    manifest_path = args.manifest
    base = Path(manifest_path).parent
    manifest = _read_json(manifest_path)
    comp_paths = _require(manifest, "components", manifest_path)
    tuning_path = _require(manifest, "tuning_text", manifest_path)
    if len(comp_paths) < 2:
        raise DataError(f"{manifest_path}: need at least 2 components")
    tol = float(manifest.get("tol", 1e-6))
    max_iter = int(manifest.get("max_iter", 100))
    tuning_set_id = manifest.get("tuning_set_id", str(tuning_path))

    components = [ngram_lm.read_arpa_file(_resolve(base, p)) for p in comp_paths]
    tuning_text = corpus.load_corpus(_resolve(base, tuning_path))
    model = interp.em_fit(components, tuning_text, tol=tol, max_iter=max_iter,
                          tuning_set_id=tuning_set_id)
    for it, ll in enumerate(model.log_likelihood_trace):
        print(f"iteration {it}: log-likelihood {ll:.6f}")
    print("weights: " + " ".join(f"{w:.6f}" for w in model.weights))

    payload = {
        "components": list(comp_paths),
        "weights": model.weights,
        "tuning_set_id": model.tuning_set_id,
        "tol": tol,
        "max_iter": max_iter,
        "log_likelihood_trace": model.log_likelihood_trace,
    }
    out = args.output or "weights.json"
    _atomic_write_text(out, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return EX_OK


# --- ppl ---------------------------------------------------------------------


def cmd_ppl(args) -> int:
    if bool(args.model) == bool(args.mixture):
        raise UsageError("give exactly one of --model or --mixture")
    if args.model:
        model = ngram_lm.read_arpa_file(args.model)
    else:
        model = _load_mixture(args.mixture)
    text = corpus.load_corpus(args.text)
    result = ngram_lm.perplexity(model, text)
    if args.json:
        print(json.dumps({
            "perplexity": result.value,
            "n_scored": result.n_scored,
            "oov_count": result.oov_count,
            "log10_total": result.log10_total,
        }, sort_keys=True))
    else:
        print(f"perplexity {result.value:.4f} over {result.n_scored} events "
              f"({result.oov_count} OOV)")
    return EX_OK


# --- wer / report ------------------------------------------------------------


def cmd_wer(args) -> int:
    report = metrics.score_files(args.ref, args.hyp, per_utterance=args.per_utterance)
    if args.json:
        print(json.dumps(report, sort_keys=True))
    else:
        print(f"WER {report['wer_percent']:.2f}% "
              f"(S={report['substitutions']} D={report['deletions']} "
              f"I={report['insertions']} / {report['ref_tokens']} ref tokens, "
              f"{report['num_utterances']} utterances)")
    return EX_OK


def cmd_report(args) -> int:
    try:
        value = metrics.relative_improvement(args.baseline, args.improved)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    print(f"{value:.2f}%")
    return EX_OK


# --- kws ---------------------------------------------------------------------


def cmd_kws(args) -> int:
    if not 0.0 <= args.threshold <= 1.0:
        raise UsageError(f"--threshold must be in [0, 1], got {args.threshold}")
    if args.scale <= 0.0:
        raise UsageError(f"--scale must be > 0, got {args.scale}")
    lattices = lattice.load_lattices(args.lattices)
    keywords = []
    with open(args.keywords, encoding="utf-8") as fh:
        for line in fh:
            tokens = line.split()
            if tokens:
                keywords.append(tokens)
    lines = []
    for lat in lattices:
        for kw in keywords:
            for hit in lattice.search_keyword(lat, kw, threshold=args.threshold,
                                              scale=args.scale):
                lines.append(lattice.hit_to_json(hit))
    text = "".join(line + "\n" for line in lines)
    if args.output:
        _atomic_write_text(args.output, text)
        print(f"wrote {len(lines)} hits to {args.output}")
    else:
        sys.stdout.write(text)
    return EX_OK


# --- ssl-run -----------------------------------------------------------------


def _selection_to_dict(sel: selftrain.SelectionResult) -> dict:
    def hyps(items):
        return [
            {"utterance_id": h.utterance_id, "confidence": h.confidence,
             "text": " ".join(h.text)}
            for h in items
        ]

    return {
        "threshold": sel.threshold,
        "selected_hours": sel.selected_hours,
        "total_hours": sel.total_hours,
        "num_selected": len(sel.selected),
        "num_rejected": len(sel.rejected),
        "selected": hyps(sel.selected),
        "rejected": hyps(sel.rejected),
    }


def pass_report_to_dict(report: selftrain.PassReport) -> dict:
    return {
        "pass_index": report.pass_index,
        "policy": report.policy,
        "mant_hours": report.mant_hours,
        "autot_hours": report.autot_hours,
        "decoder_id": report.decoder_id,
        "wer_on_test": report.wer_on_test,
        "selection": _selection_to_dict(report.selection),
    }


def _build_trainer(config, seed, where):
    kind = _require(config, "kind", where)
    if kind == "simulated":
        return selftrain.SimulatedTrainer(
            seed=seed,
            floor_quality=float(config.get("floor_quality", 0.5)),
            max_quality=float(config.get("max_quality", 0.95)),
            hours_scale=float(config.get("hours_scale", 3.0)),
            confidence_noise=float(config.get("confidence_noise", 0.06)),
        )
    if kind == "subprocess":
        return selftrain.SubprocessTrainer(
            command=_require(config, "train_command", where),
            decoder_command=_require(config, "decoder_command", where),
        )
    raise DataError(f"{where}: unknown trainer kind {kind!r}")


def cmd_ssl_run(args) -> int:
    manifest_path = args.manifest
    base = Path(manifest_path).parent
    manifest = _read_json(manifest_path)
    seed = int(_require(manifest, "seed", manifest_path))
    mant = selftrain.load_utterances(_resolve(base, _require(manifest, "mant", manifest_path)))
    untranscribed = selftrain.load_utterances(
        _resolve(base, _require(manifest, "untranscribed", manifest_path)))
    passes = _require(manifest, "passes", manifest_path)
    trainer = _build_trainer(_require(manifest, "trainer", manifest_path),
                             seed, manifest_path)
    test_set = None
    if manifest.get("test_set"):
        test_set = selftrain.load_utterances(_resolve(base, manifest["test_set"]))

    plan = selftrain.SslPlan(
        mant=mant, untranscribed=untranscribed, passes=passes,
        trainer=trainer, test_set=test_set,
    )
    result = selftrain.run_plan(plan)

    out_dir = Path(args.output or "ssl-out")
    out_dir.mkdir(parents=True, exist_ok=True)
    for report in result.reports:
        name = f"pass{report.pass_index}_{report.policy}"
        _atomic_write_text(
            out_dir / f"report_{name}.json",
            json.dumps(pass_report_to_dict(report), indent=2, sort_keys=True) + "\n",
        )
        text = result.autot_corpora[(report.pass_index, report.policy)]
        _atomic_write_text(
            out_dir / f"autot_{name}.txt",
            "".join(" ".join(sent) + "\n" for sent in text),
        )
        wer = "-" if report.wer_on_test is None else f"{report.wer_on_test:.2f}%"
        print(f"pass {report.pass_index} [{report.policy}] decoder={report.decoder_id} "
              f"selected {report.autot_hours:.2f}h of "
              f"{report.selection.total_hours:.2f}h, test WER {wer}")

    final = manifest.get("autot_corpus", {})
    final_pass = int(final.get("pass", result.reports[-1].pass_index))
    final_policy = final.get("policy", selftrain.MEAN_THRESHOLD)
    key = (final_pass, final_policy)
    if key not in result.autot_corpora:
        raise DataError(f"{manifest_path}: autot_corpus names pass {final_pass} "
                        f"policy {final_policy!r}, which was never run")
    _atomic_write_text(
        out_dir / "autot.txt",
        "".join(" ".join(sent) + "\n" for sent in result.autot_corpora[key]),
    )
    print(f"wrote {out_dir}/autot.txt from pass {final_pass} [{final_policy}]")
    return EX_OK


# --- parser ------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="asrtk", description=__doc__)
    parser.add_argument("--version", action="version", version=f"asrtk {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train-lm", help="estimate a backoff n-gram LM, write ARPA")
    p.add_argument("corpora", nargs="*", help="corpus text files (one sentence per line)")
    p.add_argument("--manifest", help="build manifest JSON (one ARPA per named corpus)")
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--smoothing", choices=ngram_lm.SMOOTHING_METHODS,
                   default=ngram_lm.MODIFIED_KNESER_NEY)
    p.add_argument("--min-count", type=int, default=1,
                   help="vocabulary min occurrence count")
    p.add_argument("--vocab", help="use an existing vocabulary file")
    p.add_argument("-o", "--output", help="output ARPA file (or directory with --manifest)")
    p.add_argument("--log", help="write the training log (smoothing fallbacks) here")
    p.set_defaults(func=cmd_train_lm)

    p = sub.add_parser("interpolate", help="fit mixture weights by EM")
    p.add_argument("--manifest", required=True,
                   help="mixture manifest JSON (components, tuning_text, tol, max_iter)")
    p.add_argument("-o", "--output", help="weights JSON output (default weights.json)")
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("ppl", help="perplexity of a text under a model")
    p.add_argument("text", help="evaluation text file")
    p.add_argument("--model", help="ARPA model file")
    p.add_argument("--mixture", help="weights JSON from 'interpolate'")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_ppl)

    p = sub.add_parser("wer", help="pooled word error rate of hyp against ref")
    p.add_argument("ref", help="reference file: <utterance-id><TAB><text> per line")
    p.add_argument("hyp", help="hypothesis file, same format")
    p.add_argument("--per-utterance", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_wer)

    p = sub.add_parser("report", help="relative improvement of a metric")
    p.add_argument("baseline", type=float)
    p.add_argument("improved", type=float)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("kws", help="keyword spotting over a lattice batch")
    p.add_argument("--lattices", required=True, help="lattice batch file")
    p.add_argument("--keywords", required=True, help="keyword file, one per line")
    p.add_argument("--threshold", type=float, default=0.0)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("-o", "--output", help="hits JSONL output (default stdout)")
    p.set_defaults(func=cmd_kws)

    p = sub.add_parser("ssl-run", help="run a semi-supervised training plan")
    p.add_argument("--manifest", required=True, help="SSL plan manifest JSON")
    p.add_argument("-o", "--output", help="output directory (default ssl-out)")
    p.set_defaults(func=cmd_ssl_run)

    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"asrtk: error: {exc}", file=sys.stderr)
        return EX_USAGE
    except (DataError, ValueError) as exc:
        print(f"asrtk: {exc}", file=sys.stderr)
        return EX_DATA
    except OSError as exc:
        name = getattr(exc, "filename", None)
        print(f"asrtk: cannot read {name or exc}", file=sys.stderr)
        return EX_UNREADABLE


if __name__ == "__main__":
    sys.exit(main())
