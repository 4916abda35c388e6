"""Desk-scale ablation table: full co-training vs single views, warmup off,
consistency off. Mean and std over seeds, one row per variant."""

from __future__ import annotations

import argparse
import dataclasses
import json
from pathlib import Path

import numpy as np

from coview import benchmark, synthgen, trainer


def run_variant(name, synth_seed, cfg, datasets):
    if synth_seed not in datasets:
        datasets[synth_seed] = synthgen.generate(benchmark.benchmark_synth_config(synth_seed))
    ds = datasets[synth_seed]
    params, log, report = trainer.run_pipeline(ds, cfg)
    pl = [x for x in (log[-1].pl_acc_token, log[-1].pl_acc_mask) if x is not None]
    return {
        "variant": name,
        "seed": synth_seed,
        "accuracy": report.accuracy,
        "bcubed_f1": report.bcubed_f1,
        "pl_acc": float(np.mean(pl)) if pl else None,
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--epochs", type=int, default=None, help="override train epochs")
    parser.add_argument("--out", default=None, help="write rows as JSON here")
    args = parser.parse_args()

    datasets: dict[int, object] = {}
    rows = []
    for seed in range(args.seeds):
        base = benchmark.benchmark_train_config(seed)
        if args.epochs is not None:
            base = dataclasses.replace(base, train_epochs=args.epochs)
        variants = {
            "full": base,
            "token_only": dataclasses.replace(base, views="token"),
            "mask_only": dataclasses.replace(base, views="mask"),
            "no_pretrain": dataclasses.replace(base, pretrain_epochs=0),
            "no_consistency": dataclasses.replace(
                base, loss=dataclasses.replace(base.loss, beta=0.0)
            ),
        }
        for name, cfg in variants.items():
            row = run_variant(name, seed, cfg, datasets)
            rows.append(row)
            print(f"seed {seed} {name:15s} acc={row['accuracy']:.4f} b3={row['bcubed_f1']:.4f}")

    print("\nvariant            mean acc   std      mean B3")
    for name in ("full", "token_only", "mask_only", "no_pretrain", "no_consistency"):
        accs = [r["accuracy"] for r in rows if r["variant"] == name]
        b3s = [r["bcubed_f1"] for r in rows if r["variant"] == name]
        print(f"{name:18s} {np.mean(accs):.4f}   {np.std(accs):.4f}   {np.mean(b3s):.4f}")

    if args.out:
        Path(args.out).write_text(json.dumps(rows, indent=2) + "\n")


if __name__ == "__main__":
    main()
