"""Write extracted views in the engine's dataset directory format and
validate the result by re-reading it."""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .instances import TextInstance

EMB_MAGIC = b"EMB1"


class ExportError(ValueError):
    pass


def write_emb(path: Path | str, rows: np.ndarray) -> None:
    rows = np.ascontiguousarray(rows, dtype="<f4")
    n, d = rows.shape
    with open(path, "wb") as f:
        f.write(EMB_MAGIC)
        f.write(struct.pack("<II", n, d))
        f.write(rows.tobytes(order="C"))


def read_emb(path: Path | str) -> np.ndarray:
    blob = Path(path).read_bytes()
    if blob[:4] != EMB_MAGIC:
        raise ExportError(f"{path}: bad magic {blob[:4]!r}")
    n, d = struct.unpack("<II", blob[4:12])
    if len(blob) - 12 != n * d * 4:
        raise ExportError(f"{path}: payload size mismatch for {n}x{d}")
    return np.frombuffer(blob[12:], dtype="<f4").reshape(n, d).copy()


def meta_line(inst: TextInstance) -> dict:
    obj = {
        "id": inst.id,
        "label": inst.label if inst.known else None,
        "known": inst.known,
        "split": inst.split,
    }
    if not inst.known and inst.label is not None:
        obj["gold"] = inst.label
    return obj


def export(
    instances: list[TextInstance],
    token_rows: np.ndarray,
    mask_rows: np.ndarray,
    out_dir: Path | str,
    num_unknown: int | None = None,
) -> None:
    """Emit meta.jsonl, labels.json and both view files, then re-read them.

    ``num_unknown`` defaults to the number of distinct gold types among the
    unknown instances; it must end up at least 2.
    """
    n = len(instances)
    if token_rows.shape[0] != n or mask_rows.shape[0] != n:
        raise ExportError(
            f"row counts ({token_rows.shape[0]}, {mask_rows.shape[0]}) != {n} instances"
        )
    if not (np.isfinite(token_rows).all() and np.isfinite(mask_rows).all()):
        raise ExportError("non-finite embedding values")

    known_types: list[str] = []
    golds = set()
    for inst in instances:
        if inst.known and inst.label not in known_types:
            known_types.append(inst.label)
        if not inst.known and inst.label is not None:
            golds.add(inst.label)
    if num_unknown is None:
        num_unknown = len(golds)
    if num_unknown < 2:
        raise ExportError(
            "num_unknown must be >= 2; pass it explicitly when gold types are missing"
        )

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "meta.jsonl", "w", encoding="utf-8") as f:
        for inst in instances:
            f.write(json.dumps(meta_line(inst)) + "\n")
    with open(out / "labels.json", "w", encoding="utf-8") as f:
        json.dump({"known_types": known_types, "num_unknown": num_unknown}, f, indent=2)
        f.write("\n")
    write_emb(out / "view_token.emb", token_rows)
    write_emb(out / "view_mask.emb", mask_rows)

    _validate(out, n, token_rows.shape[1], mask_rows.shape[1])


def _validate(out: Path, n: int, token_dim: int, mask_dim: int) -> None:
    with open(out / "meta.jsonl", encoding="utf-8") as f:
        lines = [line for line in f if line.strip()]
    if len(lines) != n:
        raise ExportError(f"meta.jsonl has {len(lines)} lines, expected {n}")
    for name, dim in (("view_token.emb", token_dim), ("view_mask.emb", mask_dim)):
        arr = read_emb(out / name)
        if arr.shape != (n, dim):
            raise ExportError(f"{name}: shape {arr.shape} != ({n}, {dim})")


def write_names(path: Path | str, instances: list[TextInstance], names: list[list[str]]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for inst, words in zip(instances, names):
            f.write(json.dumps({"id": inst.id, "names": words}) + "\n")
