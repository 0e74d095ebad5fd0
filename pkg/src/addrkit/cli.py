"""Command line entry point wiring the pipeline end to end.

Every artifact-producing command writes a ``<artifact>.manifest.json``
next to its output: the exact command line, the effective configuration
(defaults, then config file, then flags), the seeds, and SHA-256 digests
of all inputs and outputs.  Re-running a seeded command with the same
inputs reproduces byte-identical artifacts.

Exit codes: 0 success, 1 data error (message names the offending
file:line where known), 2 usage error.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import sys
from pathlib import Path
from typing import Sequence

from . import align, augment, desk, ingest, interop, llm, metrics, tagger
from .schema import AddrkitError, BaseTag


def _digest(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(
    artifact: Path,
    config: dict,
    inputs: Sequence[Path],
    outputs: Sequence[Path],
) -> None:
    manifest = {
        "command": sys.argv,
        "config": config,
        "inputs": {str(p): _digest(Path(p)) for p in inputs},
        "outputs": {str(p): _digest(Path(p)) for p in outputs},
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    Path(str(artifact) + ".manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )


def _parse_tag_list(text: str) -> list[BaseTag]:
    return [BaseTag.from_string(t) for t in text.split(",") if t]


def _cmd_ingest(args: argparse.Namespace) -> int:
    spec = ingest.SplitSpec(
        per_country_cap=args.cap,
        test_size=args.test_size,
        zero_shot_countries=frozenset(
            c.strip().lower() for c in args.zero_shot.split(",") if c.strip()
        ),
        seed=args.seed,
    )
    corpus = ingest.load_corpus(
        args.input, format=args.format, default_country=args.default_country
    )
    if args.latin_only:
        corpus = ingest.filter_latin(corpus)
    if args.cap:
        corpus = ingest.sample_capped(corpus, spec)
    outputs = []
    config = {
        "format": args.format,
        "latin_only": args.latin_only,
        "cap": args.cap,
        "zero_shot_countries": sorted(spec.zero_shot_countries),
        "test_size": args.test_size,
        "seed": args.seed,
    }
    if spec.zero_shot_countries:
        corpus, zs = ingest.split_zero_shot(corpus, spec)
        if args.zero_shot_out:
            ingest.write_corpus(zs, args.zero_shot_out)
            outputs.append(Path(args.zero_shot_out))
    if args.test_out:
        corpus, test = ingest.split_train_test(corpus, spec)
        ingest.write_corpus(test, args.test_out)
        outputs.append(Path(args.test_out))
    ingest.write_corpus(corpus, args.out)
    outputs.insert(0, Path(args.out))
    if args.folds:
        for i, (fold_train, fold_val) in enumerate(
            ingest.kfold(corpus, args.folds, args.seed)
        ):
            train_path = Path(f"{args.folds_prefix}.fold{i}.train.jsonl")
            val_path = Path(f"{args.folds_prefix}.fold{i}.val.jsonl")
            ingest.write_corpus(fold_train, train_path)
            ingest.write_corpus(fold_val, val_path)
            outputs.extend([train_path, val_path])
    _write_manifest(Path(args.out), config, [Path(args.input)], outputs)
    print(f"wrote {len(corpus)} samples to {args.out}")
    return 0


def _load_noise_config(args: argparse.Namespace) -> augment.NoiseConfig:
    # precedence: defaults < config file < flags
    if args.config:
        cfg = augment.NoiseConfig.from_file(args.config)
    else:
        cfg = augment.NoiseConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.hardsep_fraction is not None:
        overrides["hardsep_fraction"] = args.hardsep_fraction
    if overrides:
        cfg = augment.NoiseConfig(
            country_form_dist=cfg.country_form_dist,
            country_language_dist=cfg.country_language_dist,
            ooa_kind_dist=cfg.ooa_kind_dist,
            name_kind_dist=cfg.name_kind_dist,
            hardsep_fraction=overrides.get(
                "hardsep_fraction", cfg.hardsep_fraction
            ),
            seed=overrides.get("seed", cfg.seed),
        )
    return cfg


def _cmd_augment(args: argparse.Namespace) -> int:
    cfg = _load_noise_config(args)
    corpus = ingest.load_corpus(args.input, format=args.format)
    inputs = [Path(args.input)]
    if args.version == "v0":
        masks = []
    elif args.masks:
        masks = augment.read_masks(args.masks)
        inputs.append(Path(args.masks))
    elif args.synthesize_masks:
        masks = augment.synthesize_masks(args.synthesize_masks, cfg, cfg.seed)
    else:
        masks = augment.default_masks()
    out_corpus, report = augment.build_version(
        corpus, args.version, masks, cfg
    )
    ingest.write_corpus(out_corpus, args.out)
    config = {
        "version": args.version,
        "masks": args.masks,
        "synthesize_masks": args.synthesize_masks,
        "noise": {
            "country_form_dist": dict(cfg.country_form_dist),
            "country_language_dist": dict(cfg.country_language_dist),
            "ooa_kind_dist": dict(cfg.ooa_kind_dist),
            "name_kind_dist": dict(cfg.name_kind_dist),
            "hardsep_fraction": cfg.hardsep_fraction,
            "seed": cfg.seed,
        },
        "skipped": report.skipped,
        "redraws": report.redraws,
    }
    _write_manifest(Path(args.out), config, inputs, [Path(args.out)])
    print(
        f"wrote {len(out_corpus)} samples to {args.out} "
        f"(skipped {report.skipped}, redraws {report.redraws})"
    )
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    train_corpus = ingest.load_corpus(args.train)
    dev_corpus = ingest.load_corpus(args.zero_shot)
    cfg = tagger.TrainConfig(
        max_epochs=args.max_epochs,
        eval_every_updates=args.eval_every,
        patience=args.patience,
        seed=args.seed,
        learning_rate=args.learning_rate,
        shuffle=not args.no_shuffle,
    )
    model = tagger.train(
        train_corpus, dev_corpus, cfg, train_version=args.train_version
    )
    tagger.save_model(model, args.out)
    config = {
        "max_epochs": cfg.max_epochs,
        "eval_every_updates": cfg.eval_every_updates,
        "patience": cfg.patience,
        "seed": cfg.seed,
        "learning_rate": cfg.learning_rate,
        "shuffle": cfg.shuffle,
        "train_version": args.train_version,
        "result": {
            k: model.meta.get(k)
            for k in ("steps_run", "early_stopped", "best_step", "best_dev_loss")
        },
    }
    _write_manifest(
        Path(args.out), config, [Path(args.train), Path(args.zero_shot)],
        [Path(args.out)],
    )
    print(
        f"model saved to {args.out} "
        f"(steps {model.meta['steps_run']}, "
        f"early_stopped={model.meta['early_stopped']}, "
        f"best step {model.meta['best_step']})"
    )
    return 0


def _iter_addresses(path: Path):
    """Prediction input: corpus JSON-Lines; "tags" is optional here."""
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path.name}:{lineno}"
            try:
                record = json.loads(line)
                address = record["address"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ingest.MalformedRecordError(f"{where}: {exc}")
            words = address.split()
            if not words:
                raise ingest.MalformedRecordError(f"{where}: empty address")
            yield record.get("id") or where, words


def _cmd_predict(args: argparse.Namespace) -> int:
    model = tagger.load_model(args.model)
    predictions = {
        sample_id: model.predict(words)
        for sample_id, words in _iter_addresses(Path(args.input))
    }
    metrics.write_predictions(predictions, args.out)
    _write_manifest(
        Path(args.out),
        {"model": args.model},
        [Path(args.model), Path(args.input)],
        [Path(args.out)],
    )
    print(f"wrote predictions for {len(predictions)} samples to {args.out}")
    return 0


def _cmd_align_export(args: argparse.Namespace) -> int:
    corpus = ingest.load_corpus(args.input)
    out = align.export_training_file(corpus, align.default_splitter(), args.out)
    sidecar = out.with_name(out.name + ".config.json")
    _write_manifest(
        out, dict(align.FINETUNE_DEFAULTS), [Path(args.input)], [out, sidecar]
    )
    print(f"wrote aligned export to {out} (config sidecar {sidecar.name})")
    return 0


def _cmd_import_preds(args: argparse.Namespace) -> int:
    version = interop.TagMapVersion.from_string(args.tag_version)
    gold = None
    inputs = [Path(args.input)]
    if args.gold:
        gold = {s.id: s for s in ingest.load_corpus(args.gold)}
        inputs.append(Path(args.gold))
    mapped = interop.import_predictions(args.input, version, gold)
    metrics.write_predictions(mapped, args.out)
    _write_manifest(
        Path(args.out), {"tag_version": version.value}, inputs, [Path(args.out)]
    )
    print(f"imported {len(mapped)} predictions to {args.out}")
    return 0


def _make_client(args: argparse.Namespace) -> llm.LlmClient:
    kwargs = {"model_label": args.model_label}
    if args.endpoint:
        kwargs["endpoint_url"] = args.endpoint
    return llm.LlmClient.from_env(fixtures_dir=args.fixtures, **kwargs)


def _cmd_llm_parse(args: argparse.Namespace) -> int:
    params = llm.GenParams.parse(args.params)
    client = _make_client(args)
    corpus = ingest.load_corpus(args.input)
    samples = list(corpus)[: args.sample_size] if args.sample_size else list(corpus)
    if not samples:
        raise AddrkitError(f"{args.input}: no samples to parse")
    outputs = llm.parse_dataset(samples, client, params)
    metrics.write_predictions(
        {sid: list(out.labels) for sid, out in outputs.items()}, args.out
    )
    out_paths = [Path(args.out)]
    if args.repair_log:
        with Path(args.repair_log).open("w", encoding="utf-8") as fh:
            for sid, out in outputs.items():
                for entry in out.repair_log:
                    fh.write(
                        json.dumps(
                            {
                                "id": sid,
                                "kind": entry.kind,
                                "detail": entry.detail,
                                "position": entry.position,
                            }
                        )
                        + "\n"
                    )
        out_paths.append(Path(args.repair_log))
    _write_manifest(
        Path(args.out),
        {
            "params": params.to_dict(),
            "model_label": args.model_label,
            "sample_size": args.sample_size,
            "fixtures": args.fixtures,
        },
        [Path(args.input)],
        out_paths,
    )
    unresolved = sum(
        1 for out in outputs.values() for l in out.labels if l is None
    )
    print(
        f"parsed {len(outputs)} samples to {args.out} "
        f"({unresolved} unresolved words)"
    )
    return 0


def _cmd_llm_sweep(args: argparse.Namespace) -> int:
    client = _make_client(args)
    corpus = ingest.load_corpus(args.input)
    samples = list(corpus)[: args.sample_size] if args.sample_size else list(corpus)
    if args.grid_file:
        grid = [
            llm.GenParams(**entry)
            for entry in json.loads(Path(args.grid_file).read_text("utf-8"))
        ]
    else:
        grid = llm.default_grid()
    result = llm.sweep(grid, samples, client)
    table = result.render()
    if args.out:
        Path(args.out).write_text(table + "\n", encoding="utf-8")
        _write_manifest(
            Path(args.out),
            {
                "grid": [p.to_dict() for p in grid],
                "model_label": args.model_label,
                "sample_size": args.sample_size,
                "fixtures": args.fixtures,
            },
            [Path(args.input)],
            [Path(args.out)],
        )
    print(table)
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    gold = ingest.load_corpus(args.gold)
    predictions = metrics.read_predictions(args.pred)
    exclude = _parse_tag_list(args.exclude_tags) if args.exclude_tags else []
    result = metrics.score(
        list(gold), predictions, strip=not args.no_strip, exclude=exclude
    )
    print(metrics.render_eval(result, title=f"{args.pred} vs {args.gold}"))
    chosen = result.macro_f1 if args.average == "macro" else result.micro_f1
    print(f"selected average ({args.average}): {chosen:.4f}")
    if args.out:
        metrics.write_result(result, args.out)
        _write_manifest(
            Path(args.out),
            {
                "average": args.average,
                "strip": not args.no_strip,
                "exclude_tags": args.exclude_tags,
            },
            [Path(args.gold), Path(args.pred)],
            [Path(args.out)],
        )
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    macro_values = []
    for path in args.results:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        macro_values.append(float(data["macro_f1"]))
    summary = metrics.FoldSummary.of(macro_values)
    row = metrics.ReportRow.from_summary(
        args.model, args.data_version, args.split, summary
    )
    rendered = metrics.render_report([row], format=args.format)
    if args.out:
        Path(args.out).write_bytes(rendered)
        _write_manifest(
            Path(args.out),
            {
                "model": args.model,
                "data_version": args.data_version,
                "split": args.split,
                "format": args.format,
            },
            [Path(p) for p in args.results],
            [Path(args.out)],
        )
    sys.stdout.write(rendered.decode("utf-8"))
    return 0


def _cmd_desk(args: argparse.Namespace) -> int:
    countries = (
        tuple(c.strip().lower() for c in args.countries.split(",") if c.strip())
        if args.countries
        else desk.DESK_TRAIN_COUNTRIES
    )
    corpus = desk.generate_corpus(args.n, countries, seed=args.seed)
    ingest.write_corpus(corpus, args.out)
    _write_manifest(
        Path(args.out),
        {"n": args.n, "countries": list(countries), "seed": args.seed},
        [],
        [Path(args.out)],
    )
    print(f"wrote {len(corpus)} synthetic samples to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="addrkit",
        description="Address corpus noising, tagging, and benchmarking toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load, filter, cap, and split a corpus")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("jsonl", "tsv"), default="jsonl")
    p.add_argument("--default-country")
    p.add_argument("--latin-only", action="store_true")
    p.add_argument("--cap", type=int, default=0,
                   help="per-country sample cap (0 = unlimited)")
    p.add_argument("--zero-shot", default="",
                   help="comma-separated country codes held out entirely")
    p.add_argument("--zero-shot-out")
    p.add_argument("--test-size", type=int, default=0)
    p.add_argument("--test-out")
    p.add_argument("--folds", type=int, default=0)
    p.add_argument("--folds-prefix", default="fold")
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("augment", help="derive a dataset version (v0/v1/v2)")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("jsonl", "tsv"), default="jsonl")
    p.add_argument("--version", choices=("v0", "v1", "v2"), required=True)
    p.add_argument("--masks", help="mask file (JSON-Lines)")
    p.add_argument("--synthesize-masks", type=int, default=0,
                   help="generate this many masks instead of reading a file")
    p.add_argument("--config", help="noise distribution config (JSON)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--hardsep-fraction", type=float, default=None)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("train", help="train the desk tagger")
    p.add_argument("--train", required=True)
    p.add_argument("--zero-shot", required=True,
                   help="zero-shot dev corpus used as the stopping metric")
    p.add_argument("--out", required=True)
    p.add_argument("--max-epochs", type=int, default=1)
    p.add_argument("--eval-every", type=int, default=20)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--learning-rate", type=float, default=1.0)
    p.add_argument("--no-shuffle", action="store_true")
    p.add_argument("--train-version", default="")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="tag addresses with a trained model")
    p.add_argument("input")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser(
        "align-export",
        help="export subword-aligned training data for external models",
    )
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_align_export)

    p = sub.add_parser(
        "import-preds", help="map external parser predictions to BIO"
    )
    p.add_argument("input")
    p.add_argument("--tag-version", required=True,
                   help="V0V1 or V2 mapping column")
    p.add_argument("--out", required=True)
    p.add_argument("--gold", help="corpus to length-check against")
    p.set_defaults(func=_cmd_import_preds)

    p = sub.add_parser("llm-parse", help="run the generative-parser protocol")
    p.add_argument("input")
    p.add_argument("--params", required=True,
                   help='e.g. "temperature=0.2,min_p=0.1"')
    p.add_argument("--out", required=True)
    p.add_argument("--fixtures", help="offline fixture directory")
    p.add_argument("--endpoint", help="completion endpoint URL")
    p.add_argument("--model-label", default="")
    p.add_argument("--sample-size", type=int, default=0)
    p.add_argument("--repair-log", help="write repair entries here (JSON-Lines)")
    p.set_defaults(func=_cmd_llm_parse)

    p = sub.add_parser("llm-sweep", help="macro F1 over a sampling-parameter grid")
    p.add_argument("input")
    p.add_argument("--out")
    p.add_argument("--fixtures")
    p.add_argument("--endpoint")
    p.add_argument("--model-label", default="")
    p.add_argument("--sample-size", type=int, default=0)
    p.add_argument("--grid-file", help="JSON list of parameter objects")
    p.set_defaults(func=_cmd_llm_sweep)

    p = sub.add_parser("eval", help="score predictions against gold")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--average", choices=("macro", "micro"), default="macro")
    p.add_argument("--no-strip", action="store_true",
                   help="score full BIO labels instead of base tags")
    p.add_argument("--exclude-tags", default="",
                   help="comma-separated base tags to mask out")
    p.add_argument("--out", help="write the result as JSON")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("report", help="aggregate fold results into a table")
    p.add_argument("results", nargs="+", help="eval result JSON files (folds)")
    p.add_argument("--model", default="desk-tagger")
    p.add_argument("--data-version", default="")
    p.add_argument("--split", default="test")
    p.add_argument("--format", choices=("text-table", "csv", "jsonl"),
                   default="text-table")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("desk", help="generate a synthetic clean corpus")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--countries", default="")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=_cmd_desk)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AddrkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
