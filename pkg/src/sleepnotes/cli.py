"""Batch command line for the sleep-notes pipeline.

Every stage reads and writes plain files (JSON lines and CSV) so stages
can be re-run individually from intermediates. Data goes to files or
stdout; run logs (inputs, seeds, counts, wall time) go to stderr.

Exit codes: 0 success, 1 usage error, 2 input or data error (messages
cite file and line where known), 3 unexpected internal error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import json
import sys
import time
from pathlib import Path
from typing import Iterable, NoReturn, Sequence

from ._jsonl import InputFormatError
from .corpus import (
    ClinicalDocument,
    deduplicate,
    merge_note_lines,
    read_documents,
    read_note_lines,
    write_documents,
    write_removed_pairs,
)
from .evaluation import (
    GoldRecord,
    cohens_kappa,
    evaluate_systems,
    read_gold,
    render_text_report,
    write_csv_report,
)
from .extract import (
    DocumentLabels,
    aggregate,
    extract_mentions,
    read_labels,
    write_labels,
    write_mentions,
)
from .models import (
    KnnModel,
    LogregParams,
    TokenPipelineConfig,
    knn_predict_batch,
    load_artifact,
    predict_logreg,
    preprocess,
    save_artifact,
    train_logreg_many,
    transform,
    fit_vectorizer,
)
from .retrieval import KeywordLexicon, load_lexicon, retrieve
from .rules import BINARY_CONCEPTS, RuleCompileError, RuleSet, default_ruleset, load_rules
from .synth import SynthConfig, SynthConfigError, generate, write_bundle


class DataError(Exception):
    """Inconsistent or unusable input data (exit code 2)."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage problems; the documented contract
    # reserves 2 for input-format errors and uses 1 for usage.
    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _log(stage: str, **fields: object) -> None:
    rendered = " ".join(f"{key}={value}" for key, value in fields.items())
    print(f"sleepnotes {stage}: {rendered}", file=sys.stderr)


def _load_ruleset(path: str | None) -> RuleSet:
    return load_rules(path) if path else default_ruleset()


def _load_lexicon(path: str | None) -> KeywordLexicon:
    return load_lexicon(path) if path else KeywordLexicon.build()


# ---------------------------------------------------------------------------
# Stage implementations shared by subcommands and the pipeline


def _stage_merge(notes_path: str | Path, out_path: str | Path) -> list[ClinicalDocument]:
    start = time.perf_counter()
    conflicts: list[str] = []
    lines = read_note_lines(notes_path)
    documents = merge_note_lines(
        lines, on_error=lambda doc_id, message: conflicts.append(f"{doc_id}: {message}")
    )
    write_documents(out_path, documents)
    _log(
        "merge",
        notes=notes_path,
        lines=len(lines),
        documents=len(documents),
        skipped_conflicts=len(conflicts),
        out=out_path,
        seconds=f"{time.perf_counter() - start:.3f}",
    )
    for message in conflicts:
        _log("merge", conflict=message)
    return documents


def _stage_dedup(
    documents: list[ClinicalDocument],
    out_path: str | Path,
    removed_path: str | Path | None,
    threshold: float,
    seed: int,
) -> list[ClinicalDocument]:
    start = time.perf_counter()
    kept, removed = deduplicate(documents, threshold=threshold, seed=seed)
    write_documents(out_path, kept)
    if removed_path is not None:
        write_removed_pairs(removed_path, removed)
    _log(
        "dedup",
        documents=len(documents),
        kept=len(kept),
        removed=len(removed),
        threshold=threshold,
        seed=seed,
        out=out_path,
        seconds=f"{time.perf_counter() - start:.3f}",
    )
    return kept


def _stage_retrieve(
    documents: list[ClinicalDocument],
    out_path: str | Path,
    lexicon: KeywordLexicon,
    hits_path: str | Path | None = None,
) -> list[ClinicalDocument]:
    start = time.perf_counter()
    pairs = retrieve(documents, lexicon)
    relevant = [document for document, _ in pairs]
    write_documents(out_path, relevant)
    if hits_path is not None:
        with open(hits_path, "w", encoding="utf-8") as handle:
            for document, hit in pairs:
                record = {
                    "doc_id": document.doc_id,
                    "matched_keywords": list(hit.matched_keywords),
                    "token_count": hit.token_count,
                }
                handle.write(json.dumps(record, ensure_ascii=True))
                handle.write("\n")
    _log(
        "retrieve",
        documents=len(documents),
        relevant=len(relevant),
        out=out_path,
        seconds=f"{time.perf_counter() - start:.3f}",
    )
    return relevant


_worker_ruleset: RuleSet | None = None


def _init_extract_worker(rules_path: str | None) -> None:
    global _worker_ruleset
    _worker_ruleset = _load_ruleset(rules_path)


def _extract_one(document: ClinicalDocument):
    mentions = extract_mentions(document, _worker_ruleset)
    return mentions, aggregate(document.doc_id, mentions)


def _stage_extract(
    documents: list[ClinicalDocument],
    mentions_path: str | Path,
    labels_path: str | Path,
    rules_path: str | None,
    workers: int,
) -> list[DocumentLabels]:
    start = time.perf_counter()
    if workers < 1:
        raise DataError("workers must be at least 1")
    if workers == 1:
        _init_extract_worker(rules_path)
        results = [_extract_one(document) for document in documents]
    else:
        # map() preserves input order, so output is deterministic for any
        # worker count.
        chunk = max(1, len(documents) // (workers * 4))
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=workers,
            initializer=_init_extract_worker,
            initargs=(rules_path,),
        ) as pool:
            results = list(pool.map(_extract_one, documents, chunksize=chunk))
    all_mentions = [mention for mentions, _ in results for mention in mentions]
    labels = [label for _, label in results]
    write_mentions(mentions_path, all_mentions)
    write_labels(labels_path, labels)
    _log(
        "extract",
        documents=len(documents),
        mentions=len(all_mentions),
        workers=workers,
        out=labels_path,
        seconds=f"{time.perf_counter() - start:.3f}",
    )
    return labels


def _stage_train(
    documents: list[ClinicalDocument],
    gold: list[GoldRecord],
    out_path: str | Path,
    params: LogregParams,
    k: int,
) -> None:
    start = time.perf_counter()
    train_records = [record for record in gold if record.split == "train"]
    if not train_records:
        raise DataError("gold data contains no train-split records")
    by_id = {document.doc_id: document for document in documents}
    missing = [record.doc_id for record in train_records if record.doc_id not in by_id]
    if missing:
        raise DataError(
            "train gold references documents not present: " + ", ".join(sorted(missing)[:5])
        )
    config = TokenPipelineConfig()
    token_docs = [preprocess(by_id[record.doc_id].text, config) for record in train_records]
    vectorizer = fit_vectorizer(token_docs)
    vectors = [transform(vectorizer, tokens) for tokens in token_docs]
    targets = {
        concept.value: [bool(record.labels.get(concept)) for record in train_records]
        for concept in BINARY_CONCEPTS
    }
    logregs = train_logreg_many(vectors, targets, vectorizer.dimension, params)
    models: dict[str, object] = {}
    shared_vectors = tuple(vectors)
    try:
        for concept in BINARY_CONCEPTS:
            models[f"logreg:{concept.value}"] = logregs[concept.value]
            models[f"knn:{concept.value}"] = KnnModel(
                shared_vectors, tuple(targets[concept.value]), k=k
            )
    except ValueError as error:
        raise DataError(str(error)) from None
    save_artifact(out_path, config, vectorizer, models)  # type: ignore[arg-type]
    for concept, model in logregs.items():
        for warning in model.warnings:
            _log("train", concept=concept, warning=f"{warning!r}")
    _log(
        "train",
        train_documents=len(train_records),
        vocabulary=vectorizer.dimension,
        k=k,
        out=out_path,
        seconds=f"{time.perf_counter() - start:.3f}",
    )


def _stage_predict(
    documents: list[ClinicalDocument],
    model_path: str | Path,
    system: str,
    out_path: str | Path,
) -> list[DocumentLabels]:
    start = time.perf_counter()
    config, vectorizer, models = load_artifact(model_path)
    vectors = [transform(vectorizer, preprocess(document.text, config)) for document in documents]
    by_concept: dict[str, list[bool]] = {}
    if system == "logreg":
        for concept in BINARY_CONCEPTS:
            model = models.get(f"logreg:{concept.value}")
            if model is None:
                raise DataError(f"artifact has no logistic model for {concept.value}")
            by_concept[concept.value] = [predict_logreg(model, vector)[1] for vector in vectors]
    else:
        knn_models = {}
        for concept in BINARY_CONCEPTS:
            model = models.get(f"knn:{concept.value}")
            if model is None:
                raise DataError(f"artifact has no knn model for {concept.value}")
            knn_models[concept.value] = model
        try:
            by_concept = knn_predict_batch(knn_models, vectors)
        except ValueError as error:
            raise DataError(str(error)) from None
    labels = [
        DocumentLabels(
            doc_id=document.doc_id,
            sleep_duration=None,
            **{concept.value: by_concept[concept.value][row] for concept in BINARY_CONCEPTS},
        )
        for row, document in enumerate(documents)
    ]
    write_labels(out_path, labels)
    _log(
        "predict",
        system=system,
        model=model_path,
        documents=len(documents),
        out=out_path,
        seconds=f"{time.perf_counter() - start:.3f}",
    )
    return labels


def _stage_evaluate(
    predictions: dict[str, list[DocumentLabels]],
    gold: list[GoldRecord],
    split: str,
    out_dir: str | Path,
    figures: bool,
) -> str:
    start = time.perf_counter()
    if split != "all":
        gold = [record for record in gold if record.split == split]
    if not gold:
        raise DataError(f"no gold records in split {split!r}")
    try:
        results = evaluate_systems(predictions, gold)
    except ValueError as error:
        raise DataError(str(error)) from None
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = render_text_report(results)
    (out_dir / "report.txt").write_text(report, encoding="utf-8")
    write_csv_report(out_dir / "report.csv", results)
    figure_paths: list[Path] = []
    if figures:
        from .figures import render_metric_figures

        figure_paths = render_metric_figures(results, out_dir / "figures")
    _log(
        "evaluate",
        systems=",".join(predictions),
        split=split,
        gold_documents=len(gold),
        out=out_dir,
        figures=len(figure_paths),
        seconds=f"{time.perf_counter() - start:.3f}",
    )
    return report


# ---------------------------------------------------------------------------
# Subcommand handlers


def _cmd_merge(args: argparse.Namespace) -> int:
    _stage_merge(args.notes, args.out)
    return 0


def _cmd_dedup(args: argparse.Namespace) -> int:
    documents = read_documents(args.docs)
    _stage_dedup(documents, args.out, args.removed, args.threshold, args.seed)
    return 0


def _cmd_retrieve(args: argparse.Namespace) -> int:
    documents = read_documents(args.docs)
    _stage_retrieve(documents, args.out, _load_lexicon(args.keywords), args.hits)
    return 0


def _cmd_extract(args: argparse.Namespace) -> int:
    documents = read_documents(args.docs)
    _stage_extract(documents, args.mentions, args.labels, args.rules, args.workers)
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    documents = read_documents(args.docs)
    gold = read_gold(args.gold)
    params = LogregParams(
        learning_rate=args.lr, epochs=args.epochs, l2=args.l2, threshold=args.threshold
    )
    _stage_train(documents, gold, args.out, params, args.k)
    return 0


def _cmd_predict(args: argparse.Namespace) -> int:
    documents = read_documents(args.docs)
    _stage_predict(documents, args.model, args.system, args.out)
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    predictions: dict[str, list[DocumentLabels]] = {}
    for item in args.pred:
        name, _, path = item.partition("=")
        if not name or not path:
            raise DataError(f"--pred expects NAME=PATH, got {item!r}")
        predictions[name] = read_labels(path)
    gold = read_gold(args.gold)
    report = _stage_evaluate(predictions, gold, args.split, args.out_dir, args.figures)
    sys.stdout.write(report)
    return 0


def _cmd_kappa(args: argparse.Namespace) -> int:
    labels_a = {item.doc_id: item for item in read_labels(args.labels_a)}
    labels_b = {item.doc_id: item for item in read_labels(args.labels_b)}
    if set(labels_a) != set(labels_b):
        raise DataError("label files cover different documents")
    doc_ids = sorted(labels_a)
    if not doc_ids:
        raise DataError("label files are empty")
    rows = []
    pooled_a: list[bool] = []
    pooled_b: list[bool] = []
    for concept in BINARY_CONCEPTS:
        seq_a = [labels_a[doc_id].get(concept) for doc_id in doc_ids]
        seq_b = [labels_b[doc_id].get(concept) for doc_id in doc_ids]
        pooled_a.extend(seq_a)
        pooled_b.extend(seq_b)
        rows.append((concept.value, cohens_kappa(seq_a, seq_b)))
    duration_a = [labels_a[doc_id].sleep_duration or "none" for doc_id in doc_ids]
    duration_b = [labels_b[doc_id].sleep_duration or "none" for doc_id in doc_ids]
    rows.append(("sleep_duration", cohens_kappa(duration_a, duration_b)))
    rows.append(("overall_binary", cohens_kappa(pooled_a, pooled_b)))
    for name, result in rows:
        flag = " (degenerate)" if result.degenerate else ""
        sys.stdout.write(f"{name} kappa={result.value:.6f}{flag}\n")
    _log("kappa", documents=len(doc_ids), rows=len(rows))
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    start = time.perf_counter()
    if args.n_docs == SynthConfig().n_docs:
        config = SynthConfig(seed=args.seed)
    else:
        config = SynthConfig.scaled(args.n_docs, seed=args.seed)
    config = dataclasses.replace(
        config,
        duplicate_pair_count=args.duplicate_pairs,
        distractor_keyword_rate=args.distractor_rate,
    )
    bundle = generate(config)
    paths = write_bundle(bundle, args.out_dir)
    _log(
        "synth",
        n_docs=config.n_docs,
        seed=config.seed,
        plants=len(bundle.plants),
        duplicate_pairs=len(bundle.duplicate_pairs),
        out=paths["notes"].parent,
        seconds=f"{time.perf_counter() - start:.3f}",
    )
    return 0


_PIPELINE_DEFAULTS = {
    "notes": None,
    "gold": None,
    "output_dir": None,
    "keywords": None,
    "rules": None,
    "dedup_threshold": 0.9,
    "dedup_seed": 0,
    "workers": 1,
    "split": "test",
    "figures": True,
    "ml": {
        "enabled": True,
        "learning_rate": 0.1,
        "epochs": 500,
        "l2": 1e-4,
        "threshold": 0.5,
        "k": 5,
    },
}


def _read_pipeline_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
    except json.JSONDecodeError as error:
        raise InputFormatError(path, error.lineno, f"invalid JSON: {error.msg}") from None
    if not isinstance(raw, dict):
        raise InputFormatError(path, 1, "pipeline config must be a JSON object")
    config = {key: value for key, value in _PIPELINE_DEFAULTS.items()}
    config["ml"] = dict(_PIPELINE_DEFAULTS["ml"])
    for key, value in raw.items():
        if key not in _PIPELINE_DEFAULTS:
            raise InputFormatError(path, 1, f"unknown pipeline config key {key!r}")
        if key == "ml":
            if not isinstance(value, dict):
                raise InputFormatError(path, 1, "ml must be a JSON object")
            for ml_key, ml_value in value.items():
                if ml_key not in config["ml"]:
                    raise InputFormatError(path, 1, f"unknown ml config key {ml_key!r}")
                config["ml"][ml_key] = ml_value
        else:
            config[key] = value
    for required in ("notes", "output_dir"):
        if not config[required]:
            raise InputFormatError(path, 1, f"pipeline config is missing {required!r}")
    if config["split"] not in ("train", "test", "all"):
        raise InputFormatError(path, 1, "split must be train, test, or all")
    return config


def _cmd_pipeline(args: argparse.Namespace) -> int:
    start = time.perf_counter()
    config = _read_pipeline_config(args.config)
    out_dir = Path(config["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)

    documents = _stage_merge(config["notes"], out_dir / "documents.jsonl")
    kept = _stage_dedup(
        documents,
        out_dir / "kept.jsonl",
        out_dir / "removed.csv",
        config["dedup_threshold"],
        config["dedup_seed"],
    )
    relevant = _stage_retrieve(kept, out_dir / "relevant.jsonl", _load_lexicon(config["keywords"]))
    rule_labels = _stage_extract(
        relevant,
        out_dir / "mentions.jsonl",
        out_dir / "rule_labels.jsonl",
        config["rules"],
        config["workers"],
    )

    if config["gold"] is None:
        _log("pipeline", stages="merge,dedup,retrieve,extract", gold="none",
             seconds=f"{time.perf_counter() - start:.3f}")
        return 0

    gold = read_gold(config["gold"])
    predictions: dict[str, list[DocumentLabels]] = {"rules": rule_labels}
    ml = config["ml"]
    if ml["enabled"]:
        params = LogregParams(
            learning_rate=float(ml["learning_rate"]),
            epochs=int(ml["epochs"]),
            l2=float(ml["l2"]),
            threshold=float(ml["threshold"]),
        )
        _stage_train(relevant, gold, out_dir / "model.json", params, int(ml["k"]))
        if config["split"] == "all":
            eval_ids = {record.doc_id for record in gold}
        else:
            eval_ids = {record.doc_id for record in gold if record.split == config["split"]}
        eval_docs = [document for document in relevant if document.doc_id in eval_ids]
        predictions["logreg"] = _stage_predict(
            eval_docs, out_dir / "model.json", "logreg", out_dir / "predictions_logreg.jsonl"
        )
        predictions["knn"] = _stage_predict(
            eval_docs, out_dir / "model.json", "knn", out_dir / "predictions_knn.jsonl"
        )

    report = _stage_evaluate(predictions, gold, config["split"], out_dir, config["figures"])
    sys.stdout.write(report)
    _log("pipeline", out=out_dir, seconds=f"{time.perf_counter() - start:.3f}")
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sleepnotes", description=__doc__)
    commands = parser.add_subparsers(dest="command", metavar="command", required=True)

    merge = commands.add_parser("merge", help="group note lines into documents")
    merge.add_argument("--notes", required=True, help="note lines (jsonl)")
    merge.add_argument("--out", required=True, help="merged documents (jsonl)")
    merge.set_defaults(handler=_cmd_merge)

    dedup = commands.add_parser("dedup", help="drop near-duplicate documents per patient")
    dedup.add_argument("--docs", required=True, help="documents (jsonl)")
    dedup.add_argument("--out", required=True, help="kept documents (jsonl)")
    dedup.add_argument("--removed", default=None, help="removed pairs (csv)")
    dedup.add_argument("--threshold", type=float, default=0.9, help="cosine cutoff")
    dedup.add_argument("--seed", type=int, default=0, help="removal tie-break seed")
    dedup.set_defaults(handler=_cmd_dedup)

    retrieve_cmd = commands.add_parser("retrieve", help="keep documents with sleep keywords")
    retrieve_cmd.add_argument("--docs", required=True, help="documents (jsonl)")
    retrieve_cmd.add_argument("--out", required=True, help="relevant documents (jsonl)")
    retrieve_cmd.add_argument("--keywords", default=None, help="keyword list, one per line")
    retrieve_cmd.add_argument("--hits", default=None, help="matched keywords per document (jsonl)")
    retrieve_cmd.set_defaults(handler=_cmd_retrieve)

    extract = commands.add_parser("extract", help="run concept rules and label documents")
    extract.add_argument("--docs", required=True, help="documents (jsonl)")
    extract.add_argument("--mentions", required=True, help="mention output (jsonl)")
    extract.add_argument("--labels", required=True, help="document label output (jsonl)")
    extract.add_argument("--rules", default=None, help="rule definitions (jsonl)")
    extract.add_argument("--workers", type=int, default=1, help="parallel workers")
    extract.set_defaults(handler=_cmd_extract)

    train = commands.add_parser("train", help="fit TF-IDF baselines on the train split")
    train.add_argument("--docs", required=True, help="documents (jsonl)")
    train.add_argument("--gold", required=True, help="gold labels with splits (jsonl)")
    train.add_argument("--out", required=True, help="model artifact (json)")
    train.add_argument("--lr", type=float, default=0.1, help="learning rate")
    train.add_argument("--epochs", type=int, default=500, help="gradient descent epochs")
    train.add_argument("--l2", type=float, default=1e-4, help="L2 penalty")
    train.add_argument("--threshold", type=float, default=0.5, help="decision threshold")
    train.add_argument("--k", type=int, default=5, help="neighbors for KNN")
    train.set_defaults(handler=_cmd_train)

    predict = commands.add_parser("predict", help="label documents with a trained baseline")
    predict.add_argument("--docs", required=True, help="documents (jsonl)")
    predict.add_argument("--model", required=True, help="model artifact (json)")
    predict.add_argument("--system", choices=("logreg", "knn"), required=True)
    predict.add_argument("--out", required=True, help="predicted labels (jsonl)")
    predict.set_defaults(handler=_cmd_predict)

    evaluate = commands.add_parser("evaluate", help="score prediction files against gold")
    evaluate.add_argument("--gold", required=True, help="gold labels with splits (jsonl)")
    evaluate.add_argument(
        "--pred",
        action="append",
        required=True,
        metavar="NAME=PATH",
        help="predicted labels to score; repeatable",
    )
    evaluate.add_argument("--split", choices=("train", "test", "all"), default="test")
    evaluate.add_argument("--out-dir", required=True, help="report directory")
    evaluate.add_argument("--figures", action="store_true", help="also render metric figures")
    evaluate.set_defaults(handler=_cmd_evaluate)

    kappa = commands.add_parser("kappa", help="agreement between two label files")
    kappa.add_argument("--labels-a", required=True, help="labels (jsonl)")
    kappa.add_argument("--labels-b", required=True, help="labels (jsonl)")
    kappa.set_defaults(handler=_cmd_kappa)

    synth = commands.add_parser("synth", help="generate a synthetic corpus with gold labels")
    synth.add_argument("--out-dir", required=True, help="bundle directory")
    synth.add_argument("--n-docs", type=int, default=SynthConfig().n_docs)
    synth.add_argument("--seed", type=int, default=SynthConfig().seed)
    synth.add_argument("--duplicate-pairs", type=int, default=SynthConfig().duplicate_pair_count)
    synth.add_argument(
        "--distractor-rate", type=float, default=SynthConfig().distractor_keyword_rate
    )
    synth.set_defaults(handler=_cmd_synth)

    pipeline = commands.add_parser("pipeline", help="run all stages from one config file")
    pipeline.add_argument("--config", required=True, help="pipeline config (json)")
    pipeline.set_defaults(handler=_cmd_pipeline)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:
        return int(exit_.code or 0)
    try:
        return args.handler(args)
    except (InputFormatError, DataError, SynthConfigError, RuleCompileError) as error:
        print(f"sleepnotes: error: {error}", file=sys.stderr)
        return 2
    except FileNotFoundError as error:
        print(f"sleepnotes: error: no such file: {error.filename}", file=sys.stderr)
        return 2
    except Exception as error:  # pragma: no cover - defensive
        print(f"sleepnotes: internal error: {type(error).__name__}: {error}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entrypoint()
