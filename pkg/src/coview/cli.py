"""Command-line entry point.

Every command is deterministic given its inputs and seed; reports and logs
are JSON/JSONL. ``COVIEW_THREADS`` caps sweep-k worker processes.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import multiprocessing
import os
import sys
from pathlib import Path

import numpy as np

from . import data, metrics, synthgen, trainer


def _fail(exc: BaseException) -> int:
    line = json.dumps({"error": type(exc).__name__, "message": str(exc)})
    print(line, file=sys.stderr)
    return 1


def _load_train_config(args) -> trainer.TrainConfig:
    cfg = trainer.TrainConfig.from_json(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def cmd_gen_synth(args) -> int:
    cfg = synthgen.SynthConfig.from_json(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
        cfg.validate()
    dataset = synthgen.generate(cfg)
    data.write_dataset(dataset, args.out)
    print(json.dumps({"out": str(args.out), "n": dataset.n}))
    return 0


def cmd_split(args) -> int:
    dataset = data.load_dataset_dir(args.data)
    rng = np.random.default_rng(np.random.SeedSequence([args.seed or 0, 11]))
    groups: dict[str, list[int]] = {}
    for i, inst in enumerate(dataset.instances):
        key = inst.label if inst.known else (inst.gold or "")
        groups.setdefault(key, []).append(i)
    for members in groups.values():
        members = np.asarray(members)
        n_test = int(round(len(members) * args.fraction))
        picked = members[rng.permutation(len(members))[:n_test]]
        test_set = set(picked.tolist())
        for i in members:
            dataset.instances[i].split = (
                data.SPLIT_TEST if i in test_set else data.SPLIT_TRAIN
            )
    data.write_dataset(dataset, args.out)
    counts = {
        "train": sum(1 for x in dataset.instances if x.split == data.SPLIT_TRAIN),
        "test": sum(1 for x in dataset.instances if x.split == data.SPLIT_TEST),
    }
    print(json.dumps(counts))
    return 0


def cmd_pretrain(args) -> int:
    cfg = _load_train_config(args)
    dataset = data.load_dataset_dir(args.data)
    params = trainer.pretrain(dataset, cfg)
    data.write_checkpoint(Path(args.out) / "checkpoint", params.named_tensors())
    print(json.dumps({"out": str(args.out)}))
    return 0


def cmd_train(args) -> int:
    from . import model

    cfg = _load_train_config(args)
    dataset = data.load_dataset_dir(args.data)
    initial = None
    if args.init is not None:
        initial = model.params_from_tensors(data.read_checkpoint(args.init))
    source = args.source or cfg.eval_source
    _, _, report = trainer.run_pipeline(
        dataset, cfg, out_dir=args.out, source=source, initial=initial
    )
    print(json.dumps(trainer.report_payload(report, cfg, source)))
    return 0


def cmd_eval(args) -> int:
    from . import model

    cfg = _load_train_config(args)
    dataset = data.load_dataset_dir(args.data)
    params = model.params_from_tensors(data.read_checkpoint(args.checkpoint))
    report = trainer.evaluate(dataset, params, cfg, source=args.source)
    payload = trainer.report_payload(report, cfg, args.source)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2)
            f.write("\n")
    print(json.dumps(payload))
    return 0


def cmd_probe_knn(args) -> int:
    dataset = data.load_dataset_dir(args.data)
    rows, labels = [], []
    for i, inst in enumerate(dataset.instances):
        typ = inst.label if inst.known else inst.gold
        if typ is None:
            continue
        if args.subset == "known" and not inst.known:
            continue
        if args.subset == "unknown" and inst.known:
            continue
        rows.append(i)
        labels.append(typ)
    if not rows:
        raise ValueError("no typed instances to probe")
    view = dataset.view(args.view)
    report = metrics.knn_probe(view.rows[np.asarray(rows)], labels, k=args.k)
    if args.json:
        print(json.dumps(report.to_dict()))
    else:
        width = max(len(t) for t in report.per_type) + 2
        print(f"{'Type'.ljust(width)}{args.view} view")
        for typ, acc in sorted(report.per_type.items()):
            print(f"{typ.ljust(width)}{acc:.4f}")
        print(f"{'Avg'.ljust(width)}{report.macro_avg:.4f}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(report.to_dict(), f, indent=2)
            f.write("\n")
    return 0


def _sweep_worker(job: tuple[str, dict, int, str]) -> tuple[int, dict]:
    data_dir, cfg_dict, k, out_dir = job
    cfg = trainer.TrainConfig.from_dict({**cfg_dict, "k": k})
    dataset = data.load_dataset_dir(data_dir)
    _, _, report = trainer.run_pipeline(dataset, cfg, out_dir=Path(out_dir) / f"k_{k}")
    return k, trainer.report_payload(report, cfg, cfg.eval_source)


def cmd_sweep_k(args) -> int:
    cfg = _load_train_config(args)
    k_values = [int(x) for x in args.k.split(",") if x]
    if not k_values:
        raise ValueError("no K values given")
    jobs = [(str(args.data), cfg.to_dict(), k, str(args.out)) for k in k_values]
    threads = int(os.environ.get("COVIEW_THREADS", "1"))
    if threads > 1 and len(jobs) > 1:
        with multiprocessing.get_context("spawn").Pool(min(threads, len(jobs))) as pool:
            results = pool.map(_sweep_worker, jobs)
    else:
        results = [_sweep_worker(job) for job in jobs]
    results.sort(key=lambda item: k_values.index(item[0]))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.json", "w", encoding="utf-8") as f:
        json.dump([{"k": k, "report": payload} for k, payload in results], f, indent=2)
        f.write("\n")
    for k, payload in results:
        print(json.dumps({"k": k, "accuracy": payload["accuracy"]}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coview",
        description="Discover new relation/event types by co-training two embedding views.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="generate a synthetic two-view dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_gen_synth)

    p = sub.add_parser("split", help="seeded held-out split, stratified by type")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fraction", type=float, default=0.15)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_split)

    p = sub.add_parser("pretrain", help="warmup on known types, save a checkpoint")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_pretrain)

    p = sub.add_parser("train", help="full pipeline: warmup, co-train, evaluate")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--init", default=None, help="start from this checkpoint, skip warmup")
    p.add_argument(
        "--source",
        choices=[trainer.EVAL_UNKNOWN_HEAD, trainer.EVAL_KMEANS],
        default=None,
        help="evaluation source, defaults to the config's eval_source",
    )
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the unlabeled test set")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument(
        "--source",
        choices=[trainer.EVAL_UNKNOWN_HEAD, trainer.EVAL_KMEANS],
        default=trainer.EVAL_UNKNOWN_HEAD,
    )
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("probe-knn", help="leave-one-out cosine k-NN accuracy per type")
    p.add_argument("--data", required=True)
    p.add_argument("--view", choices=[data.VIEW_TOKEN, data.VIEW_MASK], required=True)
    p.add_argument("--k", type=int, default=32)
    p.add_argument("--subset", choices=["all", "known", "unknown"], default="all")
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_probe_knn)

    p = sub.add_parser("sweep-k", help="pretrain+train+evaluate for several K")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", required=True, help="comma-separated cluster counts")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_sweep_k)

    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError, KeyError) as exc:
        return _fail(exc)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
