"""Dataset container and on-disk formats.

A dataset directory holds:
  meta.jsonl      one JSON object per instance, line i <-> embedding row i
  view_token.emb  binary embedding matrix (magic ``EMB1``, u32 N, u32 D, f32 rows)
  view_mask.emb   same format, second view
  labels.json     ordered known type names and the unknown-cluster count

Model checkpoints are a directory with ``manifest.json`` (name/shape/offset/len
entries) and ``weights.bin`` (concatenated little-endian float32 blobs,
offset/len in bytes).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

EMB_MAGIC = b"EMB1"

VIEW_TOKEN = "token"
VIEW_MASK = "mask"
SPLIT_TRAIN = "train"
SPLIT_TEST = "test"


class DatasetError(ValueError):
    """Base class for dataset format and invariant violations."""


class FormatError(DatasetError):
    """Malformed file: bad magic, truncated payload, or unparseable line."""


class RowCountMismatchError(DatasetError):
    def __init__(self, view_id: str, n_rows: int, n_meta: int):
        super().__init__(
            f"view '{view_id}' has {n_rows} rows but metadata lists {n_meta} instances"
        )
        self.view_id = view_id


class NonFiniteEntryError(DatasetError):
    def __init__(self, view_id: str, row: int):
        super().__init__(f"view '{view_id}' row {row} contains a non-finite entry")
        self.view_id = view_id
        self.row = row


class DuplicateIdError(DatasetError):
    def __init__(self, row: int, instance_id: str):
        super().__init__(f"row {row}: duplicate instance id '{instance_id}'")
        self.row = row
        self.instance_id = instance_id


class LabelInvariantError(DatasetError):
    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class UnknownLabelError(DatasetError):
    def __init__(self, row: int, label: str):
        super().__init__(f"row {row}: label '{label}' is not a known type")
        self.row = row
        self.label = label


@dataclass
class Instance:
    """One relation/event mention.

    ``label`` is the known-type name and is present iff ``known`` is true.
    ``gold`` carries the evaluation-only true type of an unknown instance;
    training code never reads it.
    """

    id: str
    label: str | None
    known: bool
    split: str
    gold: str | None = None


@dataclass
class LabelSpace:
    known_types: list[str]
    num_unknown: int

    def validate(self) -> None:
        if len(set(self.known_types)) != len(self.known_types):
            raise DatasetError("known_types contains duplicates")
        if self.num_unknown < 2:
            raise DatasetError(f"num_unknown must be >= 2, got {self.num_unknown}")


@dataclass
class ViewMatrix:
    view_id: str
    rows: np.ndarray  # N x dim, float32

    @property
    def dim(self) -> int:
        return int(self.rows.shape[1])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ViewMatrix):
            return NotImplemented
        return self.view_id == other.view_id and np.array_equal(self.rows, other.rows)


@dataclass
class Dataset:
    instances: list[Instance]
    labels: LabelSpace
    views: tuple[ViewMatrix, ViewMatrix]  # (token, mask)

    @property
    def n(self) -> int:
        return len(self.instances)

    def view(self, view_id: str) -> ViewMatrix:
        for v in self.views:
            if v.view_id == view_id:
                return v
        raise KeyError(view_id)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.instances == other.instances
            and self.labels == other.labels
            and self.views == other.views
        )

    def validate(self) -> None:
        self.labels.validate()
        seen: set[str] = set()
        known_set = set(self.labels.known_types)
        for i, inst in enumerate(self.instances):
            if inst.id in seen:
                raise DuplicateIdError(i, inst.id)
            seen.add(inst.id)
            if inst.known and inst.label is None:
                raise LabelInvariantError(i, "instance marked known but has no label")
            if not inst.known and inst.label is not None:
                raise LabelInvariantError(i, "unlabeled instance carries a label")
            if inst.label is not None and inst.label not in known_set:
                raise UnknownLabelError(i, inst.label)
            if inst.split not in (SPLIT_TRAIN, SPLIT_TEST):
                raise LabelInvariantError(i, f"bad split '{inst.split}'")
        for v in self.views:
            if v.rows.shape[0] != self.n:
                raise RowCountMismatchError(v.view_id, v.rows.shape[0], self.n)
            bad = ~np.isfinite(v.rows)
            if bad.any():
                row = int(np.argwhere(bad.any(axis=1))[0, 0])
                raise NonFiniteEntryError(v.view_id, row)


def write_emb(path: Path | str, rows: np.ndarray) -> None:
    """Write an embedding matrix: magic, u32 N, u32 D, row-major f32 payload."""
    rows = np.ascontiguousarray(rows, dtype="<f4")
    if rows.ndim != 2:
        raise ValueError("embedding matrix must be 2-D")
    n, d = rows.shape
    with open(path, "wb") as f:
        f.write(EMB_MAGIC)
        f.write(struct.pack("<II", n, d))
        f.write(rows.tobytes(order="C"))


def read_emb(path: Path | str, view_id: str = "") -> np.ndarray:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != EMB_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}, expected {EMB_MAGIC!r}")
    if len(blob) < 12:
        raise FormatError(f"{path}: truncated header")
    n, d = struct.unpack("<II", blob[4:12])
    payload = blob[12:]
    if len(payload) != n * d * 4:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes, expected {n * d * 4} for {n}x{d}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(n, d).copy()


def _instance_to_obj(inst: Instance) -> dict:
    obj = {"id": inst.id, "label": inst.label, "known": inst.known, "split": inst.split}
    if inst.gold is not None:
        obj["gold"] = inst.gold
    return obj


def _instance_from_obj(obj: dict, row: int) -> Instance:
    try:
        return Instance(
            id=obj["id"],
            label=obj["label"],
            known=obj["known"],
            split=obj["split"],
            gold=obj.get("gold"),
        )
    except KeyError as e:
        raise FormatError(f"meta line {row}: missing field {e}") from e


def write_dataset(dataset: Dataset, out_dir: Path | str) -> None:
    """Emit meta.jsonl, both view files and labels.json; output is byte-stable."""
    dataset.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "meta.jsonl", "w", encoding="utf-8") as f:
        for inst in dataset.instances:
            f.write(json.dumps(_instance_to_obj(inst)) + "\n")
    with open(out / "labels.json", "w", encoding="utf-8") as f:
        json.dump(
            {
                "known_types": dataset.labels.known_types,
                "num_unknown": dataset.labels.num_unknown,
            },
            f,
            indent=2,
        )
        f.write("\n")
    for view in dataset.views:
        write_emb(out / f"view_{view.view_id}.emb", view.rows)


def load_dataset(meta_path: Path | str, view_paths: tuple[Path | str, Path | str]) -> Dataset:
    """Load and validate a dataset.

    ``view_paths`` is (token view path, mask view path). The label space is
    read from labels.json next to the metadata; when that file is absent,
    known types are taken in first-appearance order and the unknown-cluster
    count from the distinct gold values of unknown instances.
    """
    meta_path = Path(meta_path)
    instances: list[Instance] = []
    with open(meta_path, encoding="utf-8") as f:
        for row, line in enumerate(f):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"{meta_path} line {row}: {e}") from e
            instances.append(_instance_from_obj(obj, row))

    labels_path = meta_path.parent / "labels.json"
    if labels_path.exists():
        with open(labels_path, encoding="utf-8") as f:
            obj = json.load(f)
        labels = LabelSpace(list(obj["known_types"]), int(obj["num_unknown"]))
    else:
        known_types: list[str] = []
        for inst in instances:
            if inst.label is not None and inst.label not in known_types:
                known_types.append(inst.label)
        golds = {inst.gold for inst in instances if not inst.known and inst.gold}
        if len(golds) < 2:
            raise DatasetError(
                "labels.json missing and num_unknown cannot be derived from gold fields"
            )
        labels = LabelSpace(known_types, len(golds))

    token = ViewMatrix(VIEW_TOKEN, read_emb(view_paths[0], VIEW_TOKEN))
    mask = ViewMatrix(VIEW_MASK, read_emb(view_paths[1], VIEW_MASK))
    dataset = Dataset(instances, labels, (token, mask))
    dataset.validate()
    return dataset


def load_dataset_dir(data_dir: Path | str) -> Dataset:
    """Load a dataset from a directory laid out by :func:`write_dataset`."""
    d = Path(data_dir)
    return load_dataset(d / "meta.jsonl", (d / "view_token.emb", d / "view_mask.emb"))


def partition(dataset: Dataset) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Index lists (labeled train, unlabeled train, unlabeled test).

    Known test instances are excluded from every list: training never sees
    them and evaluation is over unknown instances only.
    """
    labeled_train, unlabeled_train, unlabeled_test = [], [], []
    for i, inst in enumerate(dataset.instances):
        if inst.known and inst.split == SPLIT_TRAIN:
            labeled_train.append(i)
        elif not inst.known and inst.split == SPLIT_TRAIN:
            unlabeled_train.append(i)
        elif not inst.known and inst.split == SPLIT_TEST:
            unlabeled_test.append(i)
    return (
        np.asarray(labeled_train, dtype=np.intp),
        np.asarray(unlabeled_train, dtype=np.intp),
        np.asarray(unlabeled_test, dtype=np.intp),
    )


def write_checkpoint(ckpt_dir: Path | str, tensors: dict[str, np.ndarray]) -> None:
    """Write named tensors as manifest.json + weights.bin (float32, byte offsets)."""
    out = Path(ckpt_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = []
    offset = 0
    blobs = []
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        blob = arr.tobytes(order="C")
        manifest.append(
            {"name": name, "shape": list(arr.shape), "offset": offset, "len": len(blob)}
        )
        blobs.append(blob)
        offset += len(blob)
    with open(out / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    with open(out / "weights.bin", "wb") as f:
        for blob in blobs:
            f.write(blob)


def read_checkpoint(ckpt_dir: Path | str) -> dict[str, np.ndarray]:
    ckpt = Path(ckpt_dir)
    with open(ckpt / "manifest.json", encoding="utf-8") as f:
        manifest = json.load(f)
    with open(ckpt / "weights.bin", "rb") as f:
        blob = f.read()
    tensors: dict[str, np.ndarray] = {}
    for entry in manifest:
        start, ln = entry["offset"], entry["len"]
        if start + ln > len(blob):
            raise FormatError(f"checkpoint tensor '{entry['name']}' overruns weights.bin")
        arr = np.frombuffer(blob[start : start + ln], dtype="<f4")
        tensors[entry["name"]] = arr.reshape(entry["shape"]).copy()
    return tensors
