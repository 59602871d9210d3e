"""Command-line entry points for the full pipeline.

Every subcommand is deterministic for a fixed ``--seed`` and writes UTF-8
JSON or JSON-lines outputs; failures exit nonzero with a machine-readable
error on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import evaluation, synthetic
from .candidates import build_trie
from .checkpoint import load_checkpoint, load_pipeline, save_checkpoint
from .corpus import (
    CORE_CONTEXT_TYPES,
    ContextType,
    Vocabulary,
    build_vocabulary,
    load_parallel_corpus,
    read_dataset,
    simulate_dataset,
    write_dataset,
)
from .inference import SuggestPipeline
from .model import ModelConfig
from .training import (
    TrainConfig,
    parse_strategy,
    pretrain_cmblm,
    train_baseline,
    train_energy,
)


def _read_json(path: str | None) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _model_config(args, src_vocab: Vocabulary, tgt_vocab: Vocabulary) -> ModelConfig:
    overrides = _read_json(getattr(args, "config", None))
    overrides["src_vocab_size"] = len(src_vocab)
    overrides["tgt_vocab_size"] = len(tgt_vocab)
    return ModelConfig(**overrides)


def _train_config(args) -> TrainConfig:
    overrides = _read_json(getattr(args, "train_config", None))
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "max_steps", None) is not None:
        overrides["max_steps"] = args.max_steps
    return TrainConfig(**overrides)


def _load_vocabs(path: str) -> tuple[Vocabulary, Vocabulary]:
    obj = _read_json(path)
    return Vocabulary.from_json(obj["source"]), Vocabulary.from_json(obj["target"])


def _parse_mix(text: str | None) -> dict[ContextType, float]:
    if not text:
        return {t: 0.25 for t in CORE_CONTEXT_TYPES}
    mix = {}
    for part in text.split(","):
        name, frac = part.split("=")
        mix[ContextType(name.strip())] = float(frac)
    return mix


def _cmd_gen_synthetic(args) -> int:
    paths = synthetic.generate_corpus_files(
        args.out_dir, args.train_pairs, args.heldout_pairs, args.seed
    )
    print(json.dumps({k: str(v) for k, v in paths.items()}))
    return 0


def _cmd_build_vocab(args) -> int:
    loaded = load_parallel_corpus(args.corpus, limit=args.limit)
    src = build_vocabulary(loaded.pairs, "source", args.max_size, args.min_freq)
    tgt = build_vocabulary(loaded.pairs, "target", args.max_size, args.min_freq)
    Path(args.out).write_text(
        json.dumps({"source": src.to_json(), "target": tgt.to_json()}, ensure_ascii=False),
        encoding="utf-8",
    )
    print(
        json.dumps(
            {
                "source_size": len(src),
                "target_size": len(tgt),
                "skipped_lines": loaded.skipped_empty,
            }
        )
    )
    return 0


def _cmd_simulate(args) -> int:
    loaded = load_parallel_corpus(args.corpus, limit=args.limit)
    _, tgt_vocab = _load_vocabs(args.vocab)
    dataset = simulate_dataset(loaded.pairs, _parse_mix(args.mix), args.seed, tgt_vocab)
    write_dataset(dataset, args.out)
    if args.language:
        lang = synthetic.SyntheticLanguage.from_json(_read_json(args.language))
        annotations = {
            i: synthetic.alignment_for_instance(lang, inst.source, inst.gold)
            for i, inst in enumerate(dataset)
        }
        evaluation.write_alignment_sidecar(annotations, str(args.out) + ".align.jsonl")
    print(json.dumps({"instances": len(dataset), "out": str(args.out)}))
    return 0


def _cmd_pretrain(args) -> int:
    loaded = load_parallel_corpus(args.corpus)
    src_vocab, tgt_vocab = _load_vocabs(args.vocab)
    config = _model_config(args, src_vocab, tgt_vocab)
    train_cfg = _train_config(args)
    model, _ = pretrain_cmblm(
        loaded.pairs, src_vocab, tgt_vocab, config, train_cfg, log_path=args.log
    )
    save_checkpoint(
        model,
        src_vocab,
        tgt_vocab,
        {"trained_as": "cmblm", "train_config": train_cfg.to_json()},
        args.out,
    )
    print(json.dumps({"out": args.out, "steps": train_cfg.max_steps}))
    return 0


def _cmd_train_baseline(args) -> int:
    dataset = read_dataset(args.dataset)
    src_vocab, tgt_vocab = _load_vocabs(args.vocab)
    config = _model_config(args, src_vocab, tgt_vocab)
    train_cfg = _train_config(args)
    init = None
    if args.init:
        ckpt = load_checkpoint(args.init)
        init = ckpt.build_model()
    val = read_dataset(args.val_dataset) if args.val_dataset else None
    model, _ = train_baseline(
        dataset,
        src_vocab,
        tgt_vocab,
        config,
        train_cfg,
        init=init,
        val_dataset=val,
        log_path=args.log,
    )
    save_checkpoint(
        model,
        src_vocab,
        tgt_vocab,
        {"trained_as": "baseline", "train_config": train_cfg.to_json()},
        args.out,
    )
    print(json.dumps({"out": args.out, "steps": train_cfg.max_steps}))
    return 0


def _cmd_train_energy(args) -> int:
    dataset = read_dataset(args.dataset)
    src_vocab, tgt_vocab = _load_vocabs(args.vocab)
    config = _model_config(args, src_vocab, tgt_vocab)
    train_cfg = _train_config(args)
    baseline = load_checkpoint(args.baseline).build_model()
    if args.init == "baseline":
        init = baseline
    elif args.init == "random":
        init = "random"
    else:
        init = load_checkpoint(args.init).build_model()
    strategy = parse_strategy(args.strategy, k=args.k, p=args.p, cap=args.cap)
    val = read_dataset(args.val_dataset) if args.val_dataset else None
    model, _ = train_energy(
        dataset,
        baseline,  # type: ignore[arg-type]
        strategy,
        src_vocab,
        tgt_vocab,
        config,
        train_cfg,
        init=init,
        val_dataset=val,
        log_path=args.log,
    )
    save_checkpoint(
        model,
        src_vocab,
        tgt_vocab,
        {
            "trained_as": "energy",
            "strategy": args.strategy,
            "train_config": train_cfg.to_json(),
        },
        args.out,
    )
    print(json.dumps({"out": args.out, "steps": train_cfg.max_steps}))
    return 0


def _cmd_evaluate(args) -> int:
    dataset = read_dataset(args.dataset)
    pipeline = load_pipeline(args.baseline, args.energy)
    acc = evaluation.accuracy(pipeline, dataset, k=args.k)
    report = evaluation.EvalReport(accuracy=acc)
    if args.recall_ks:
        ks = [int(x) for x in args.recall_ks.split(",")]
        report.recall_curve = evaluation.recall_at_k(pipeline, dataset, ks)
    if args.alignments:
        annotations = evaluation.read_alignment_sidecar(args.alignments)
        ns = [int(x) for x in args.alignment_ns.split(",")]
        report.alignment = evaluation.alignment_recall_at_n(
            pipeline, dataset, annotations, ns, seed=args.seed
        )
    if args.latency:
        report.latency = evaluation.latency_report(pipeline, dataset, k=args.k)
    payload = json.dumps(report.to_json(), ensure_ascii=False, indent=2)
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
    print(payload)
    return 0


def _cmd_keystroke_sim(args) -> int:
    dataset = read_dataset(args.dataset)
    if args.mode == "none":
        top1 = "none"
    elif args.mode == "oracle":
        top1 = "oracle"
    else:
        top1 = load_pipeline(args.baseline, args.energy).top1
    report = evaluation.keystroke_simulation(top1, dataset)
    payload = json.dumps(report.to_json(), ensure_ascii=False, indent=2)
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
    print(payload)
    return 0


def _cmd_serve(args) -> int:
    from .service import ServiceConfig, serve

    serve(
        ServiceConfig(
            baseline_path=args.baseline,
            energy_path=args.energy,
            host=args.host,
            port=args.port,
            default_k=args.default_k,
            emit_trace=args.trace,
        )
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wlac", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synthetic", help="write the synthetic acceptance corpus")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--train-pairs", type=int, default=5000)
    p.add_argument("--heldout-pairs", type=int, default=500)
    p.add_argument("--seed", type=int, default=11)
    p.set_defaults(func=_cmd_gen_synthetic)

    p = sub.add_parser("build-vocab", help="build source/target vocabularies")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-size", type=int, default=50_000)
    p.add_argument("--min-freq", type=int, default=1)
    p.add_argument("--limit", type=int, default=None)
    p.set_defaults(func=_cmd_build_vocab)

    p = sub.add_parser("simulate", help="simulate an autocompletion dataset")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--mix", default=None, help="e.g. bi_context=0.5,prefix=0.5")
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--language", default=None, help="synthetic language JSON; also writes alignments")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("pretrain", help="masked bilingual pretraining")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--train-config", default=None)
    p.add_argument("--log", default=None)
    p.set_defaults(func=_cmd_pretrain)

    p = sub.add_parser("train-baseline", help="train the word predictor")
    p.add_argument("--dataset", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--init", default=None, help="pretraining checkpoint")
    p.add_argument("--val-dataset", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--train-config", default=None)
    p.add_argument("--log", default=None)
    p.set_defaults(func=_cmd_train_baseline)

    p = sub.add_parser("train-energy", help="train the energy reranker")
    p.add_argument("--dataset", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--baseline", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--init", default="random", help="'random', 'baseline', or a checkpoint path")
    p.add_argument("--strategy", default="top_k", choices=["uniform", "baseline_random", "top_p", "top_k"])
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--p", type=float, default=0.9)
    p.add_argument("--cap", type=int, default=64)
    p.add_argument("--val-dataset", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--train-config", default=None)
    p.add_argument("--log", default=None)
    p.set_defaults(func=_cmd_train_energy)

    p = sub.add_parser("evaluate", help="accuracy, recall, alignment, latency")
    p.add_argument("--dataset", required=True)
    p.add_argument("--baseline", required=True)
    p.add_argument("--energy", default=None)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--recall-ks", default=None, help="e.g. 1,2,4,8,16")
    p.add_argument("--alignments", default=None)
    p.add_argument("--alignment-ns", default="1,2,4,8")
    p.add_argument("--latency", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("keystroke-sim", help="simulate the typing loop")
    p.add_argument("--dataset", required=True)
    p.add_argument("--mode", default="pipeline", choices=["pipeline", "oracle", "none"])
    p.add_argument("--baseline", default=None)
    p.add_argument("--energy", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_keystroke_sim)

    p = sub.add_parser("serve", help="run the suggestion service")
    p.add_argument("--baseline", required=True)
    p.add_argument("--energy", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8077)
    p.add_argument("--default-k", type=int, default=8)
    p.add_argument("--trace", action="store_true")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "keystroke-sim" and args.mode == "pipeline" and not args.baseline:
        parser.error("--baseline is required in pipeline mode")
    try:
        return args.func(args)
    except Exception as exc:  # surfaced as machine-readable diagnostics
        print(json.dumps({"error": type(exc).__name__, "detail": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
