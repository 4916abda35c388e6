"""Cluster-count sweep on synthetic data: accuracy, homogeneity and
completeness as K moves around the true number of unknown classes."""

from __future__ import annotations

import argparse
import dataclasses
import json
from pathlib import Path

from coview import benchmark, synthgen, trainer


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--k", default="4,8,16", help="comma-separated cluster counts")
    parser.add_argument("--out", default=None)
    args = parser.parse_args()

    ds = synthgen.generate(benchmark.benchmark_synth_config(args.seed))
    cfg = dataclasses.replace(
        benchmark.benchmark_train_config(args.seed), eval_source="kmeans"
    )
    k_values = [int(x) for x in args.k.split(",")]
    results = trainer.sweep_k(ds, cfg, k_values)

    print("K    acc     homog   compl   v       ari")
    rows = []
    for k, report in results:
        print(
            f"{k:<4d} {report.accuracy:.4f}  {report.homogeneity:.4f}  "
            f"{report.completeness:.4f}  {report.v_measure:.4f}  {report.ari:.4f}"
        )
        rows.append({"k": k, "report": report.to_dict()})
    if args.out:
        Path(args.out).write_text(json.dumps(rows, indent=2) + "\n")


if __name__ == "__main__":
    main()
