"""Command-line entry point.

Subcommands: ingest, augment, render, evaluate, serve. A JSON config file
(--config) can predefine any long flag (keys use underscores); explicit
flags win. Exit codes: 0 success, 1 usage error, 2 data error, 3 internal
error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .annotation import AnnotationService, StudyConfig
from .augment import augment_corpus, load_rename_map
from .errors import ToolkitError
from .ingest import ingest_dialogs, ingest_schemas, write_dialogs, write_schemas
from .metrics import (
    attach_external_scores,
    evaluate,
    load_predictions,
    render_table,
    report_to_json,
)
from .prompting import default_template, emit_training_pairs, load_template, write_training_pairs
from .splits import SplitConfig, load_split_config

_FORMATS = {
    "sgd": ("SGD_JSON", "SGD_JSON"),
    "ketod": ("SGD_JSON", "KETOD_JSON"),
    "native": ("NATIVE_JSON", "NATIVE_JSONL"),
}


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _apply_config(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset flags from the JSON config file; explicit flags win."""
    if not getattr(args, "config", None):
        return args
    with open(args.config, encoding="utf-8") as handle:
        defaults = json.load(handle)
    for key, value in defaults.items():
        if getattr(args, key, None) in (None, False):
            setattr(args, key, value)
    return args


def _warn_all(warnings: list[str]) -> None:
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)


def cmd_ingest(args) -> int:
    schema_format, dialog_format = _FORMATS[args.format]
    catalog = ingest_schemas(args.schemas, format=schema_format)
    warnings: list[str] = []
    dialogs = ingest_dialogs(args.dialogs, catalog, format=dialog_format, warnings=warnings)
    _warn_all(warnings)
    out = Path(args.out)
    write_schemas(catalog, out / "schemas.json")
    write_dialogs(dialogs, out / "dialogs.jsonl")
    print(f"wrote {len(catalog)} schemas and {len(dialogs)} dialogs to {out}")
    return 0


def cmd_augment(args) -> int:
    catalog = ingest_schemas(args.schemas, format="NATIVE_JSON")
    dialogs = ingest_dialogs(args.dialogs, catalog, format="NATIVE_JSONL")
    rename_maps = [load_rename_map(path) for path in args.lexicons]
    warnings: list[str] = []
    corpus = augment_corpus(
        dialogs,
        catalog,
        rename_maps,
        rewrite_text=args.rewrite_text,
        include_unmatched=args.include_unmatched,
        warnings=warnings,
    )
    _warn_all(warnings)
    out = Path(args.out)
    write_schemas(corpus.variant_schemas, out / "schemas.json")
    write_dialogs(corpus.dialogs, out / "dialogs.jsonl")
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "provenance.json", "w", encoding="utf-8") as handle:
        json.dump(corpus.provenance, handle, ensure_ascii=False, indent=2, sort_keys=True)
        handle.write("\n")
    print(f"wrote {len(corpus.dialogs)} augmented dialogs to {out}")
    return 0


def cmd_render(args) -> int:
    catalog = ingest_schemas(args.schemas, format="NATIVE_JSON")
    dialogs = ingest_dialogs(args.dialogs, catalog, format="NATIVE_JSONL")
    template = load_template(args.template) if args.template else default_template()
    warnings: list[str] = []
    pairs = emit_training_pairs(dialogs, catalog, template, k=args.k, warnings=warnings)
    count = write_training_pairs(pairs, args.out)
    _warn_all(warnings)
    print(f"wrote {count} training pairs to {args.out}")
    return 0


def _load_external_scores(path) -> dict[tuple[str, int], float]:
    scores = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            scores[(record["dialog_id"], int(record["turn_index"]))] = float(record["score"])
    return scores


def cmd_evaluate(args) -> int:
    catalog = ingest_schemas(args.schemas, format="NATIVE_JSON")
    gold = ingest_dialogs(args.gold, catalog, format="NATIVE_JSONL")
    config = SplitConfig(load_split_config(args.seen).seen_domains)
    external = _load_external_scores(args.external_scores) if args.external_scores else None
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    for path in args.predictions:
        predictions = load_predictions(path)
        report = evaluate(
            gold, predictions, config, per_call_param_names=args.per_call_param_names
        )
        if external:
            report = attach_external_scores(report, external)
        table = render_table(report)
        print(table, end="")
        if report.missing_predictions:
            print(
                f"warning: {len(report.missing_predictions)} gold turns lack predictions",
                file=sys.stderr,
            )
        if out:
            stem = predictions.model_id
            with open(out / f"report-{stem}.json", "w", encoding="utf-8") as handle:
                json.dump(report_to_json(report), handle, ensure_ascii=False, indent=2)
                handle.write("\n")
            (out / f"report-{stem}.txt").write_text(table, encoding="utf-8")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    catalog = ingest_schemas(args.schemas, format="NATIVE_JSON")
    corpus = ingest_dialogs(args.corpus, catalog, format="NATIVE_JSONL")
    predictions = [load_predictions(path) for path in args.predictions]
    service = AnnotationService(corpus, predictions, args.log)
    if args.study_config:
        with open(args.study_config, encoding="utf-8") as handle:
            payload = json.load(handle)
        if args.seed is not None:
            payload["seed"] = args.seed
        study = StudyConfig(
            single_domain=payload["single_domain"],
            multi_domain=payload["multi_domain"],
            models=tuple(payload["models"]),
            seed=payload["seed"],
            criteria=tuple(payload.get("criteria", StudyConfig.__dataclass_fields__["criteria"].default)),
        )
        # flush so wrappers reading the pipe see the id before serving starts
        print(f"created {service.create_study(study)}", flush=True)
    uvicorn.run(create_app(service), host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="todkit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"todkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest", help="normalize a raw corpus into native files")
    ingest.add_argument("--config", help="JSON file of flag defaults")
    ingest.add_argument("--format", choices=sorted(_FORMATS), default="sgd")
    ingest.add_argument("--schemas", required=True, help="schema file (raw or native)")
    ingest.add_argument("--dialogs", required=True, help="dialog file or directory")
    ingest.add_argument("--out", required=True, help="output directory")
    ingest.set_defaults(func=cmd_ingest)

    augment = sub.add_parser("augment", help="apply rename lexicons to a native corpus")
    augment.add_argument("--config", help="JSON file of flag defaults")
    augment.add_argument("--schemas", required=True, help="native schema file")
    augment.add_argument("--dialogs", required=True, help="native dialog JSONL")
    augment.add_argument("--lexicons", required=True, nargs="+", help="rename lexicon files")
    augment.add_argument("--out", required=True, help="output directory")
    augment.add_argument("--rewrite-text", action="store_true", dest="rewrite_text",
                         help="also substitute schema names inside utterance text")
    augment.add_argument("--include-unmatched", action="store_true", dest="include_unmatched",
                         help="copy dialogs untouched by a lexicon into its variant corpus")
    augment.set_defaults(func=cmd_augment)

    render = sub.add_parser("render", help="emit (prompt, target) training pairs as JSONL")
    render.add_argument("--config", help="JSON file of flag defaults")
    render.add_argument("--schemas", required=True, help="native schema file")
    render.add_argument("--dialogs", required=True, help="native dialog JSONL")
    render.add_argument("--out", required=True, help="output JSONL path")
    render.add_argument("--template", help="template file; packaged default when omitted")
    render.add_argument("--k", type=int, default=5, help="history window in exchanges")
    render.set_defaults(func=cmd_render)

    evaluate_ = sub.add_parser("evaluate", help="score prediction files against gold dialogs")
    evaluate_.add_argument("--config", help="JSON file of flag defaults")
    evaluate_.add_argument("--schemas", required=True, help="native schema file")
    evaluate_.add_argument("--gold", required=True, help="native gold dialog JSONL")
    evaluate_.add_argument("--predictions", required=True, nargs="+",
                           help="prediction JSONL files, one model each")
    evaluate_.add_argument("--seen", required=True, help="JSON list of seen domain ids")
    evaluate_.add_argument("--out", help="directory for report JSON/tables")
    evaluate_.add_argument("--external-scores", dest="external_scores",
                           help="JSONL of externally computed per-turn semantic scores")
    evaluate_.add_argument("--per-call-param-names", action="store_true",
                           dest="per_call_param_names",
                           help="score param names as a per-call boolean instead of micro recall")
    evaluate_.set_defaults(func=cmd_evaluate)

    serve = sub.add_parser("serve", help="run the blind annotation service")
    serve.add_argument("--config", help="JSON file of flag defaults")
    serve.add_argument("--schemas", required=True, help="native schema file")
    serve.add_argument("--corpus", required=True, help="native dialog JSONL")
    serve.add_argument("--predictions", required=True, nargs="+", help="prediction JSONL files")
    serve.add_argument("--log", required=True, help="append-only rating log (JSONL)")
    serve.add_argument("--study-config", dest="study_config",
                       help="JSON study config to create at startup")
    serve.add_argument("--seed", type=int, help="overrides the study config seed")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8321)
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _apply_config(args)
        return args.func(args)
    except ToolkitError as exc:
        print(f"todkit: {exc.code}: {exc.message}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130
    except Exception as exc:  # noqa: BLE001 - last-resort diagnostic
        print(f"todkit: internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
