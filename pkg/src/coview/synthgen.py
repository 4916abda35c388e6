"""Seeded generator of two-view datasets with controllable per-view
class separability.

Classes get Gaussian blobs in each view; a "confusion pair" forces two
classes to share a mean in exactly one view, so that view cannot tell them
apart while the other still can. Unknown classes keep their true type in the
evaluation-only ``gold`` field.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import (
    Dataset,
    Instance,
    LabelSpace,
    SPLIT_TEST,
    SPLIT_TRAIN,
    VIEW_MASK,
    VIEW_TOKEN,
    ViewMatrix,
)

MEAN_RADIUS_SIGMAS = 10.0


@dataclass
class SynthConfig:
    num_known_classes: int = 8
    num_unknown_classes: int = 8
    per_class_count: int = 200
    dim_view1: int = 16
    dim_view2: int = 16
    noise_sigma: float = 1.0
    confusion_pairs_view1: list[tuple[int, int]] = field(default_factory=list)
    confusion_pairs_view2: list[tuple[int, int]] = field(default_factory=list)
    test_fraction: float = 0.15
    seed: int = 0

    @property
    def num_classes(self) -> int:
        return self.num_known_classes + self.num_unknown_classes

    def validate(self) -> None:
        if self.num_known_classes < 1 or self.num_unknown_classes < 2:
            raise ValueError("need >= 1 known and >= 2 unknown classes")
        if self.per_class_count < 1:
            raise ValueError("per_class_count must be >= 1")
        if self.noise_sigma <= 0:
            raise ValueError("noise_sigma must be > 0")
        if not 0 < self.test_fraction < 1:
            raise ValueError("test_fraction must be in (0, 1)")
        sets = []
        for pairs in (self.confusion_pairs_view1, self.confusion_pairs_view2):
            seen = set()
            for a, b in pairs:
                if a == b or not (0 <= a < self.num_classes and 0 <= b < self.num_classes):
                    raise ValueError(f"bad confusion pair ({a}, {b})")
                seen.add(frozenset((a, b)))
            sets.append(seen)
        if sets[0] & sets[1]:
            raise ValueError(
                "a pair confounded in both views would be unrecoverable: "
                f"{sorted(tuple(sorted(p)) for p in sets[0] & sets[1])}"
            )

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["confusion_pairs_view1"] = [list(p) for p in self.confusion_pairs_view1]
        out["confusion_pairs_view2"] = [list(p) for p in self.confusion_pairs_view2]
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "SynthConfig":
        obj = dict(obj)
        for key in ("confusion_pairs_view1", "confusion_pairs_view2"):
            obj[key] = [tuple(p) for p in obj.get(key, [])]
        cfg = cls(**obj)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path: Path | str) -> "SynthConfig":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


def _rng(cfg: SynthConfig) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([cfg.seed, 7]))


def _draw_means(cfg: SynthConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    radius = MEAN_RADIUS_SIGMAS * cfg.noise_sigma
    means = []
    for dim, pairs in (
        (cfg.dim_view1, cfg.confusion_pairs_view1),
        (cfg.dim_view2, cfg.confusion_pairs_view2),
    ):
        raw = rng.normal(size=(cfg.num_classes, dim))
        raw /= np.linalg.norm(raw, axis=1, keepdims=True)
        m = raw * radius
        for a, b in pairs:
            m[b] = m[a]
        means.append(m)
    return means[0], means[1]


def class_means(cfg: SynthConfig) -> tuple[np.ndarray, np.ndarray]:
    """The per-view class means ``generate`` will use (same seed, same draw)."""
    cfg.validate()
    return _draw_means(cfg, _rng(cfg))


def _check_confusion_structure(cfg: SynthConfig, means1: np.ndarray, means2: np.ndarray) -> None:
    # every configured pair must coincide in its own view and nowhere else,
    # which also rejects chains that silently confound a pair in both views
    all_pairs = {frozenset(p) for p in cfg.confusion_pairs_view1} | {
        frozenset(p) for p in cfg.confusion_pairs_view2
    }
    view1 = {frozenset(p) for p in cfg.confusion_pairs_view1}
    for pair in all_pairs:
        a, b = sorted(pair)
        same1 = bool(np.array_equal(means1[a], means1[b]))
        same2 = bool(np.array_equal(means2[a], means2[b]))
        if same1 and same2:
            raise ValueError(
                f"classes {a} and {b} ended up identical in both views "
                "(confusion pairs chain across views)"
            )
        expect1 = pair in view1
        if same1 != expect1 or same2 == expect1:
            raise ValueError(f"classes {a} and {b} not confounded in exactly one view")


def generate(cfg: SynthConfig) -> Dataset:
    """Draw the dataset: blobs per class per view, seeded splits, gold fields."""
    cfg.validate()
    rng = _rng(cfg)
    means1, means2 = _draw_means(cfg, rng)
    _check_confusion_structure(cfg, means1, means2)

    n = cfg.num_classes * cfg.per_class_count
    class_of = np.repeat(np.arange(cfg.num_classes), cfg.per_class_count)
    x1 = means1[class_of] + rng.normal(scale=cfg.noise_sigma, size=(n, cfg.dim_view1))
    x2 = means2[class_of] + rng.normal(scale=cfg.noise_sigma, size=(n, cfg.dim_view2))

    splits = np.full(n, SPLIT_TRAIN, dtype=object)
    n_test = int(round(cfg.per_class_count * cfg.test_fraction))
    for c in range(cfg.num_classes):
        members = np.flatnonzero(class_of == c)
        picked = members[rng.permutation(len(members))[:n_test]]
        splits[picked] = SPLIT_TEST

    order = rng.permutation(n)
    known_names = [f"known_{c:02d}" for c in range(cfg.num_known_classes)]
    novel_names = [f"novel_{c:02d}" for c in range(cfg.num_unknown_classes)]

    instances = []
    for row, src in enumerate(order):
        c = int(class_of[src])
        known = c < cfg.num_known_classes
        instances.append(
            Instance(
                id=f"syn-{row:06d}",
                label=known_names[c] if known else None,
                known=known,
                split=str(splits[src]),
                gold=None if known else novel_names[c - cfg.num_known_classes],
            )
        )

    views = (
        ViewMatrix(VIEW_TOKEN, x1[order].astype(np.float32)),
        ViewMatrix(VIEW_MASK, x2[order].astype(np.float32)),
    )
    dataset = Dataset(instances, LabelSpace(known_names, cfg.num_unknown_classes), views)
    dataset.validate()
    return dataset
