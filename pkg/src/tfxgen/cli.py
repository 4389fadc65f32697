"""Command line workbench around the library.

Verbs: ingest, train, generate, evaluate, downstream, quantize, demo,
inspect.  Shared flags (--config, --seed, --threads, --out) sit on every
verb.  Exit codes: 0 success, 2 configuration problem, 3 data problem,
4 model problem.

Report-producing verbs write delimited output (JSON/CSV) plus rendered
PNG figures, and every verb leaves a manifest recording the tool
version, resolved config hash, seed, and input digests, so runs can be
compared and reproduced.  Manifests carry no timestamps: two runs with
the same inputs and seed produce byte-identical artifacts (wall-clock
profile files aside).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, config_hash, load_config
from .core import (
    ConfigError,
    Corpus,
    DataError,
    ModelError,
    WorkbenchError,
    split_corpus,
)
from .corpusfile import read_corpus, write_corpus
from .downstream import run_augment_sweep, tstr
from .fidelity import (
    build_fidelity_report,
    write_fidelity_csv,
    write_fidelity_json,
)
from .gasf import (
    decode_gasf_diag_batch,
    encode_gasf_batch,
    load_gasf_images,
    save_gasf_images,
)
from .generate import generate_corpus
from .ingest import LabelRule, ingest_trace
from .markov import MarkovGenerator
from .modelstore import load_generator, load_model_raw
from .neural import (
    TinyCausalLm,
    argmax_agreement,
    build_training_set,
    quantize_weights_int8,
)
from .profiling import build_profile
from .reportfig import (
    fig_f1_vs_fraction,
    fig_fidelity_macro,
    fig_gasf_panel,
    fig_loss_curve,
)
from .tokens import Vocabulary, corpus_to_sequences, import_external, write_token_file
from .toydata import make_toy_corpus, write_demo_trace_csv


def _sidecar(path: Path, tail: str) -> Path:
    return path.parent / (path.name + tail)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _manifest(path: Path, command: str, cfg: ExperimentConfig, seed: int,
              inputs: dict[str, Path], outputs: list[str]) -> None:
    doc = {
        "tool": "tfxgen",
        "version": __version__,
        "command": command,
        "seed": seed,
        "config_sha256": config_hash(cfg),
        "inputs": {name: {"file": p.name, "sha256": _sha256(p)}
                   for name, p in sorted(inputs.items())},
        "outputs": sorted(outputs),
    }
    _write_json(doc, path)


def _print(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


# -- verbs -------------------------------------------------------------------


def cmd_ingest(args, cfg: ExperimentConfig) -> int:
    if args.label_mode == "port":
        port_map = {}
        for pair in (args.port_map or "").split(","):
            pair = pair.strip()
            if not pair:
                continue
            if "=" not in pair:
                raise ConfigError(f"--port-map entries are PORT=NAME, got {pair!r}")
            port, name = pair.split("=", 1)
            port_map[int(port)] = name.strip()
        rule = LabelRule("port", port_map=port_map)
    elif args.label_mode == "fixed":
        rule = LabelRule("fixed", fixed_label=args.fixed_label)
    else:
        rule = LabelRule("column")
    result = ingest_trace(args.trace, args.kind, rule,
                          cfg.pipeline.seq_len, cfg.pipeline.pl_max)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_corpus(result.corpus, out)
    counts = result.corpus.class_counts()
    summary = {
        "corpus": out.name,
        "samples": len(result.corpus.samples),
        "classes": {lab.name: counts[lab.id]
                    for lab in result.corpus.label_space},
        "parse": result.parse_stats.as_dict(),
        "segment": result.segment_stats.as_dict(),
    }
    _write_json(summary, _sidecar(out, ".stats.json"))
    _manifest(_sidecar(out, ".manifest.json"), "ingest", cfg,
              cfg.pipeline.seed, {"trace": Path(args.trace)},
              [out.name, out.name + ".stats.json"])
    _print(summary)
    return 0


def cmd_train(args, cfg: ExperimentConfig) -> int:
    corpus = read_corpus(args.corpus)
    seed = cfg.pipeline.seed
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    kind = args.kind or cfg.generator.kind
    if kind == "markov":
        order = args.order or cfg.generator.order
        model = MarkovGenerator.fit(corpus, order=order,
                                    alpha=cfg.generator.alpha)
        model.save(out)
        epoch_seconds: list[float] = []
        loss_history: list[float] = []
    elif kind == "lm":
        lm_cfg = cfg.lm_config()
        if args.epochs is not None:
            from dataclasses import replace
            lm_cfg = replace(lm_cfg, epochs=args.epochs)
        model, report = TinyCausalLm.train(corpus, lm_cfg, seed)
        model.save(out)
        epoch_seconds = report.epoch_seconds
        loss_history = report.loss_history
    else:
        raise ConfigError(f"unknown generator kind {kind!r}")
    profile = build_profile(epoch_seconds, model, seed, out)
    _write_json(profile.to_dict(), _sidecar(out, ".profile.json"))
    _manifest(_sidecar(out, ".manifest.json"), "train", cfg,
              seed, {"corpus": Path(args.corpus)},
              [out.name, out.name + ".profile.json"])
    summary = {
        "kind": kind,
        "model": out.name,
        "parameters": model.parameter_count(),
        "loss_history": loss_history,
    }
    _print(summary)
    return 0


def cmd_generate(args, cfg: ExperimentConfig) -> int:
    seed = cfg.pipeline.seed
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.from_tokens:
        if not args.like:
            raise ConfigError("--from-tokens needs --like REAL_CORPUS for "
                              "the vocabulary and label space")
        like = read_corpus(args.like)
        vocab = Vocabulary(like.pl_max, like.n_classes)
        corpus, istats = import_external(args.from_tokens, vocab,
                                         like.seq_len, like.label_space)
        stats_doc = {"import": istats.as_dict()}
        inputs = {"tokens": Path(args.from_tokens), "like": Path(args.like)}
    else:
        if not args.model:
            raise ConfigError("generate needs --model (or --from-tokens)")
        generator = load_generator(args.model)
        if args.classes == "all":
            class_ids = [lab.id for lab in generator.label_space]
        else:
            class_ids = [int(c) for c in args.classes.split(",")]
        counts = {c: args.count for c in class_ids}
        corpus, gstats = generate_corpus(generator, counts, seed)
        stats_doc = {"generation": gstats.as_dict()}
        inputs = {"model": Path(args.model)}
    write_corpus(corpus, out)
    outputs = [out.name, out.name + ".stats.json"]
    if args.tokens_out:
        vocab = Vocabulary(corpus.pl_max, corpus.n_classes)
        write_token_file(args.tokens_out, corpus_to_sequences(corpus, vocab),
                         vocab, corpus.seq_len)
        outputs.append(Path(args.tokens_out).name)
    counts_by_name = corpus.class_counts()
    stats_doc["samples"] = len(corpus.samples)
    stats_doc["classes"] = {lab.name: counts_by_name[lab.id]
                            for lab in corpus.label_space}
    _write_json(stats_doc, _sidecar(out, ".stats.json"))
    _manifest(_sidecar(out, ".manifest.json"), "generate",
              cfg, seed, inputs, outputs)
    _print(stats_doc)
    return 0


def cmd_evaluate(args, cfg: ExperimentConfig) -> int:
    real = read_corpus(args.real)
    synth = read_corpus(args.synth, provenance="synthetic")
    generation = None
    stats_path = Path(args.synth + ".stats.json")
    if stats_path.exists():
        generation = json.loads(stats_path.read_text()).get("generation")
    report = build_fidelity_report(real, synth, generation)
    outdir = Path(args.out)
    (outdir / "figures").mkdir(parents=True, exist_ok=True)
    write_fidelity_json(report, outdir / "fidelity.json")
    write_fidelity_csv(report, outdir / "fidelity.csv")
    fig_fidelity_macro({"synthetic": report},
                       outdir / "figures" / "fidelity_macro.png")
    _manifest(outdir / "manifest.json", "evaluate", cfg, cfg.pipeline.seed,
              {"real": Path(args.real), "synth": Path(args.synth)},
              ["fidelity.json", "fidelity.csv", "figures/fidelity_macro.png"])
    _print(report.macro)
    return 0


def cmd_downstream(args, cfg: ExperimentConfig) -> int:
    seed = cfg.pipeline.seed
    threads = cfg.pipeline.threads
    real = read_corpus(args.real)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    forest_cfg = cfg.forest_config()
    if args.protocol == "tstr":
        if not args.synth:
            raise ConfigError("--protocol tstr needs --synth")
        synth = read_corpus(args.synth, provenance="synthetic")
        train, test = split_corpus(real, cfg.pipeline.train_fraction, seed)
        report = tstr(synth, train, test, forest_cfg, seed, threads)
        _write_json(report.to_dict(), outdir / "tstr.json")
        _manifest(outdir / "manifest.json", "downstream", cfg, seed,
                  {"real": Path(args.real), "synth": Path(args.synth)},
                  ["tstr.json"])
        _print({"f1_synthetic": report.f1_synthetic,
                "f1_real_baseline": report.f1_real_baseline,
                "gap": report.gap})
        return 0
    # augmentation sweep
    generator = load_generator(args.model) if args.model else None
    report = run_augment_sweep(
        real, seed,
        fractions=cfg.downstream.fractions,
        sources=cfg.downstream.sources,
        config=forest_cfg,
        generator=generator,
        smote_k=cfg.downstream.smote_k,
        fr_p=cfg.downstream.fr_p,
        train_fraction=cfg.pipeline.train_fraction,
        threads=threads,
    )
    (outdir / "figures").mkdir(exist_ok=True)
    _write_json(report.to_dict(), outdir / "augment.json")
    _write_augment_csv(report, outdir / "augment.csv")
    fig_f1_vs_fraction(report, outdir / "figures" / "f1_vs_fraction.png")
    inputs = {"real": Path(args.real)}
    if args.model:
        inputs["model"] = Path(args.model)
    _manifest(outdir / "manifest.json", "downstream", cfg, seed, inputs,
              ["augment.json", "augment.csv", "figures/f1_vs_fraction.png"])
    _print({"f1_full_baseline": report.f1_full_baseline,
            "cases": [{"fraction": c.fraction, "source": c.source,
                       "f1": round(c.f1, 4)} for c in report.cases]})
    return 0


def _write_augment_csv(report, path: Path) -> None:
    import csv as _csv
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["fraction", "source", "macro_f1",
                         "n_real", "n_added"])
        for c in report.cases:
            writer.writerow([c.fraction, c.source, f"{c.f1:.6f}",
                             c.n_real, c.n_added])
        writer.writerow([1.0, "full_baseline",
                         f"{report.f1_full_baseline:.6f}",
                         report.n_train_full, 0])


def cmd_quantize(args, cfg: ExperimentConfig) -> int:
    model = TinyCausalLm.load(args.model)
    qmodel = quantize_weights_int8(model)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    qmodel.save(out)
    report = {
        "model_in": Path(args.model).name,
        "model_out": out.name,
        "size_in_bytes": Path(args.model).stat().st_size,
        "size_out_bytes": out.stat().st_size,
    }
    report["size_ratio"] = report["size_out_bytes"] / report["size_in_bytes"]
    if args.reference:
        ref = read_corpus(args.reference)
        vocab = Vocabulary(ref.pl_max, ref.n_classes)
        contexts, _ = build_training_set(ref, vocab, model.window)
        report["argmax_agreement"] = argmax_agreement(model, qmodel, contexts)
        report["agreement_contexts"] = int(len(contexts))
    _write_json(report, _sidecar(out, ".quantize.json"))
    inputs = {"model": Path(args.model)}
    if args.reference:
        inputs["reference"] = Path(args.reference)
    _manifest(_sidecar(out, ".manifest.json"), "quantize",
              cfg, cfg.pipeline.seed, inputs,
              [out.name, out.name + ".quantize.json"])
    _print(report)
    return 0


def cmd_inspect(args, cfg: ExperimentConfig) -> int:
    path = Path(args.path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open("rb") as fh:
        magic = fh.read(4)
    if magic == b"TFXM":
        raw = load_model_raw(path)
        model = load_generator(path)
        info = {
            "type": "model",
            "kind": raw["kind"],
            "vocab": raw["vocab"],
            "hyperparams": raw["hyperparams"],
            "parameters": model.parameter_count(),
            "tensors": {name: list(arr.shape)
                        for name, arr in raw["tensors"].items()},
        }
    elif magic == b"TFXG":
        images = load_gasf_images(path)
        info = {"type": "gasf_images", "count": int(images.shape[0]),
                "side": int(images.shape[1])}
    else:
        first = path.open("r", encoding="utf-8").readline()
        try:
            header = json.loads(first)
        except json.JSONDecodeError:
            raise DataError(f"{path}: unrecognised artifact") from None
        fmt = header.get("format")
        if fmt == "tfx-corpus/1":
            corpus = read_corpus(path)
            counts = corpus.class_counts()
            info = {"type": "corpus", "L": corpus.seq_len,
                    "pl_max": corpus.pl_max,
                    "samples": len(corpus.samples),
                    "classes": {lab.name: counts[lab.id]
                                for lab in corpus.label_space}}
        elif fmt == "tfx-tokens/1":
            n_lines = sum(1 for _ in path.open("r", encoding="utf-8")) - 1
            info = {"type": "tokens", "header": header, "sequences": n_lines}
        else:
            raise DataError(f"{path}: unrecognised artifact")
    _print(info)
    return 0


# -- demo ----------------------------------------------------------------------


def cmd_demo(args, cfg: ExperimentConfig) -> int:
    seed = cfg.pipeline.seed
    threads = cfg.pipeline.threads
    out = Path(args.out)
    for sub in ("trace", "corpus", "tokens", "gasf", "models", "synth",
                "reports", "figures"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    outputs: list[str] = []

    def track(relpath: str) -> Path:
        outputs.append(relpath)
        return out / relpath

    def stage(msg: str) -> None:
        print(f"[demo] {msg}", flush=True)

    # 1. ground truth corpus, replayed to a trace and ingested back
    stage(f"sampling {args.classes} classes x {args.samples_per_class} flows")
    truth = make_toy_corpus(args.samples_per_class, args.classes,
                            cfg.pipeline.seq_len, cfg.pipeline.pl_max, seed)
    write_demo_trace_csv(track("trace/demo_trace.csv"), truth)
    stage("ingesting trace")
    result = ingest_trace(out / "trace" / "demo_trace.csv", "csv",
                          LabelRule("column"), cfg.pipeline.seq_len,
                          cfg.pipeline.pl_max)
    real = result.corpus
    roundtrip_ok = real.samples == truth.samples
    write_corpus(real, track("corpus/real.jsonl"))
    _write_json({"parse": result.parse_stats.as_dict(),
                 "segment": result.segment_stats.as_dict(),
                 "matches_ground_truth": roundtrip_ok},
                track("corpus/ingest_stats.json"))

    train, test = split_corpus(real, cfg.pipeline.train_fraction, seed)
    write_corpus(train, track("corpus/train.jsonl"))
    write_corpus(test, track("corpus/test.jsonl"))
    vocab = Vocabulary(real.pl_max, real.n_classes)

    # 2. token bridge: export, then reimport as if produced externally
    stage("token export/import bridge")
    write_token_file(track("tokens/train.tokens"),
                     corpus_to_sequences(train, vocab), vocab, train.seq_len)
    bridged, istats = import_external(out / "tokens" / "train.tokens",
                                      vocab, train.seq_len, train.label_space)
    _write_json({"import": istats.as_dict(),
                 "matches_train": bridged.samples == train.samples},
                track("tokens/bridge_check.json"))

    # 3. angular field images
    stage("angular field images")
    head = train.samples[:8]
    head_values = np.array([s.values for s in head], dtype=np.float64)
    head_images = encode_gasf_batch(head_values, real.pl_max)
    save_gasf_images(track("gasf/train_head.tfxg"), head_images)
    fig_gasf_panel(head_images, [s.label.name for s in head],
                   track("figures/gasf_panel.png"))
    all_values = np.array([s.values for s in train.samples], dtype=np.float64)
    decoded = decode_gasf_diag_batch(
        encode_gasf_batch(all_values, real.pl_max), real.pl_max)
    exact = int(np.sum(np.all(decoded == all_values.astype(np.int64), axis=1)))
    _write_json({"n": len(train.samples), "exact": exact},
                track("gasf/roundtrip.json"))

    # 4. markov generator
    stage("fitting markov generator")
    markov = MarkovGenerator.fit(train, order=cfg.generator.order,
                                 alpha=cfg.generator.alpha)
    markov.save(track("models/markov.tfxm"))
    profile = build_profile([], markov, seed, out / "models" / "markov.tfxm")
    _write_json(profile.to_dict(), track("models/markov.profile.json"))
    gen_counts = {lab.id: args.gen_per_class for lab in real.label_space}
    synth_markov, gstats = generate_corpus(markov, gen_counts, seed)
    write_corpus(synth_markov, track("synth/markov.jsonl"))
    _write_json({"generation": gstats.as_dict()},
                track("synth/markov.jsonl.stats.json"))
    report_markov = build_fidelity_report(train, synth_markov,
                                          gstats.as_dict())
    write_fidelity_json(report_markov, track("reports/fidelity_markov.json"))
    write_fidelity_csv(report_markov, track("reports/fidelity_markov.csv"))

    # 5. neural generator
    epochs = args.epochs if args.epochs is not None else cfg.generator.epochs
    stage(f"training language model ({epochs} epochs)")
    from dataclasses import replace as _replace
    lm_cfg = _replace(cfg.lm_config(), epochs=epochs)
    lm, train_report = TinyCausalLm.train(train, lm_cfg, seed)
    lm.save(track("models/lm.tfxm"))
    profile = build_profile(train_report.epoch_seconds, lm, seed,
                            out / "models" / "lm.tfxm")
    _write_json(profile.to_dict(), track("models/lm.profile.json"))
    fig_loss_curve(lm.loss_history, track("figures/lm_loss.png"))
    stage("sampling language model")
    synth_lm, gstats_lm = generate_corpus(lm, gen_counts, seed)
    write_corpus(synth_lm, track("synth/lm.jsonl"))
    _write_json({"generation": gstats_lm.as_dict()},
                track("synth/lm.jsonl.stats.json"))
    report_lm = build_fidelity_report(train, synth_lm, gstats_lm.as_dict())
    write_fidelity_json(report_lm, track("reports/fidelity_lm.json"))
    write_fidelity_csv(report_lm, track("reports/fidelity_lm.csv"))

    # 6. int8 quantization
    stage("quantizing language model")
    lm_q = quantize_weights_int8(lm)
    lm_q.save(track("models/lm_int8.tfxm"))
    contexts, _ = build_training_set(test, vocab, lm.window)
    agreement = argmax_agreement(lm, lm_q, contexts)
    synth_q, gstats_q = generate_corpus(lm_q, gen_counts, seed)
    write_corpus(synth_q, track("synth/lm_int8.jsonl"))
    _write_json({"generation": gstats_q.as_dict()},
                track("synth/lm_int8.jsonl.stats.json"))
    report_q = build_fidelity_report(train, synth_q, gstats_q.as_dict())
    write_fidelity_json(report_q, track("reports/fidelity_lm_int8.json"))
    write_fidelity_csv(report_q, track("reports/fidelity_lm_int8.csv"))
    size_f = (out / "models" / "lm.tfxm").stat().st_size
    size_q = (out / "models" / "lm_int8.tfxm").stat().st_size
    _write_json({
        "size_float_bytes": size_f,
        "size_int8_bytes": size_q,
        "size_ratio": size_q / size_f,
        "argmax_agreement": agreement,
        "agreement_contexts": int(len(contexts)),
        "macro_delta": {m: report_q.macro[m] - report_lm.macro[m]
                        for m in report_lm.macro},
    }, track("reports/quantization.json"))

    fig_fidelity_macro(
        {"markov": report_markov, "lm": report_lm, "lm_int8": report_q},
        track("figures/fidelity_macro.png"))

    # 7. downstream protocols
    forest_cfg = cfg.forest_config()
    if args.trees is not None:
        from dataclasses import replace as _r
        forest_cfg = _r(forest_cfg, n_trees=args.trees)
    stage("train-on-synthetic / test-on-real")
    tstr_markov = tstr(synth_markov, train, test, forest_cfg, seed, threads)
    _write_json(tstr_markov.to_dict(), track("reports/tstr_markov.json"))
    tstr_lm = tstr(synth_lm, train, test, forest_cfg, seed, threads)
    _write_json(tstr_lm.to_dict(), track("reports/tstr_lm.json"))
    stage("augmentation sweep")
    sweep = run_augment_sweep(
        real, seed, fractions=cfg.downstream.fractions,
        sources=cfg.downstream.sources, config=forest_cfg,
        generator=None, smote_k=cfg.downstream.smote_k,
        fr_p=cfg.downstream.fr_p,
        train_fraction=cfg.pipeline.train_fraction, threads=threads)
    _write_json(sweep.to_dict(), track("reports/augment.json"))
    _write_augment_csv(sweep, track("reports/augment.csv"))
    fig_f1_vs_fraction(sweep, track("figures/f1_vs_fraction.png"))

    _manifest(out / "manifest.json", "demo", cfg, seed, {}, outputs)
    summary = {
        "ingest_matches_ground_truth": roundtrip_ok,
        "gasf_roundtrip_exact": f"{exact}/{len(train.samples)}",
        "fidelity_macro": {
            "markov": report_markov.macro,
            "lm": report_lm.macro,
            "lm_int8": report_q.macro,
        },
        "tstr_f1": {"markov": tstr_markov.f1_synthetic,
                    "lm": tstr_lm.f1_synthetic,
                    "real_baseline": tstr_markov.f1_real_baseline},
        "quantization_agreement": agreement,
        "outputs": len(outputs) + 1,
    }
    _print(summary)
    return 0


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None,
                        help="INI config file (defaults apply when omitted)")
    common.add_argument("--seed", type=int, default=None,
                        help="override the experiment seed")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads for forest fitting")
    common.add_argument("--out", required=False,
                        help="output file or directory")

    parser = argparse.ArgumentParser(
        prog="tfxgen",
        description="traffic synthesis workbench: ingest traces, fit "
                    "generators, score fidelity and downstream utility",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common],
                       help="parse a trace into a corpus file")
    p.add_argument("--trace", required=True)
    p.add_argument("--kind", choices=("csv", "pcap"), default="csv")
    p.add_argument("--label-mode", choices=("column", "port", "fixed"),
                   default="column")
    p.add_argument("--port-map", default=None,
                   help="comma separated PORT=NAME pairs for --label-mode port")
    p.add_argument("--fixed-label", default=None)
    p.set_defaults(func=cmd_ingest, needs_out=True)

    p = sub.add_parser("train", parents=[common],
                       help="fit a generator on a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--kind", choices=("markov", "lm"), default=None)
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.set_defaults(func=cmd_train, needs_out=True)

    p = sub.add_parser("generate", parents=[common],
                       help="sample a synthetic corpus from a model or "
                            "import external token sequences")
    p.add_argument("--model", default=None)
    p.add_argument("--count", type=int, default=100,
                   help="samples per class")
    p.add_argument("--classes", default="all",
                   help="comma separated class ids, or 'all'")
    p.add_argument("--from-tokens", default=None,
                   help="import a token file instead of sampling")
    p.add_argument("--like", default=None,
                   help="real corpus defining the vocabulary for --from-tokens")
    p.add_argument("--tokens-out", default=None,
                   help="also export the sampled sequences as a token file")
    p.set_defaults(func=cmd_generate, needs_out=True)

    p = sub.add_parser("evaluate", parents=[common],
                       help="fidelity report of synthetic vs real")
    p.add_argument("--real", required=True)
    p.add_argument("--synth", required=True)
    p.set_defaults(func=cmd_evaluate, needs_out=True)

    p = sub.add_parser("downstream", parents=[common],
                       help="TSTR or augmentation sweep")
    p.add_argument("--protocol", choices=("tstr", "augment"), required=True)
    p.add_argument("--real", required=True)
    p.add_argument("--synth", default=None)
    p.add_argument("--model", default=None,
                   help="generator for the augmentation sweep (default: "
                        "markov fitted on the training split)")
    p.set_defaults(func=cmd_downstream, needs_out=True)

    p = sub.add_parser("quantize", parents=[common],
                       help="int8 weight quantization of a neural model")
    p.add_argument("--model", required=True)
    p.add_argument("--reference", default=None,
                   help="corpus for the argmax agreement check")
    p.set_defaults(func=cmd_quantize, needs_out=True)

    p = sub.add_parser("demo", parents=[common],
                       help="end-to-end run on a bundled synthetic trace")
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--samples-per-class", type=int, default=500)
    p.add_argument("--gen-per-class", type=int, default=100)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--trees", type=int, default=None)
    p.set_defaults(func=cmd_demo, needs_out=True)

    p = sub.add_parser("inspect", parents=[common],
                       help="summarise any artifact file")
    p.add_argument("path")
    p.set_defaults(func=cmd_inspect, needs_out=False)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be >= 0")
            cfg.pipeline.seed = args.seed
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be >= 1")
            cfg.pipeline.threads = args.threads
        if getattr(args, "needs_out", False) and not args.out:
            raise ConfigError(f"{args.command} needs --out")
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ModelError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return 4
    except WorkbenchError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
