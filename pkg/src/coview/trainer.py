"""Training orchestration: warmup on known types, co-training epochs with
per-epoch pseudo-labels, evaluation, and cluster-number sweeps."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import clustering, data, model, nn
from .losses import LossConfig
from .metrics import ClusterReport, cluster_report, matching_accuracy

EVAL_UNKNOWN_HEAD = "unknown_head"
EVAL_KMEANS = "kmeans"


@dataclass
class TrainConfig:
    seed: int = 0
    batch_size: int = 32
    lr: float = 5e-5
    pretrain_epochs: int = 3
    train_epochs: int = 30
    loss: LossConfig = field(default_factory=LossConfig)
    k: int = 2  # number of unknown clusters (C_u)
    eval_every: int = 5
    eval_source: str = EVAL_UNKNOWN_HEAD  # unknown_head | kmeans
    views: str = model.VIEW_BOTH  # token | mask | both
    weight_decay: float = 0.01
    proj_hidden: int = 256
    proj_out: int = 256
    head_hidden: int = 256

    def validate(self) -> None:
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.pretrain_epochs < 0 or self.train_epochs < 0:
            raise ValueError("epoch counts must be >= 0")
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if self.eval_source not in (EVAL_UNKNOWN_HEAD, EVAL_KMEANS):
            raise ValueError(f"bad eval_source '{self.eval_source}'")
        model.active_views(self.views)
        self.loss.validate()

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        obj = dict(obj)
        loss = LossConfig(**obj.pop("loss", {}))
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(obj) - known
        if extra:
            raise ValueError(f"unknown config fields: {sorted(extra)}")
        cfg = cls(loss=loss, **obj)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path: Path | str) -> "TrainConfig":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


@dataclass
class TrainLogRecord:
    epoch: int
    loss_sup: float
    loss_unsup: float
    loss_consist: float
    loss_total: float
    pl_acc_token: float | None
    pl_acc_mask: float | None
    small_batches: int
    test_report: dict | None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def derive_seed(*keys: int) -> int:
    return int(np.random.SeedSequence(list(keys)).generate_state(1)[0])


def init_params(dataset: data.Dataset, cfg: TrainConfig) -> model.ModelParams:
    return model.init_model_params(
        token_dim=dataset.view(data.VIEW_TOKEN).dim,
        mask_dim=dataset.view(data.VIEW_MASK).dim,
        num_known=len(dataset.labels.known_types),
        num_unknown=cfg.k,
        seed=cfg.seed,
        proj_hidden=cfg.proj_hidden,
        proj_out=cfg.proj_out,
        head_hidden=cfg.head_hidden,
    )


def _check_dims(dataset: data.Dataset, params: model.ModelParams) -> None:
    for view_id in (data.VIEW_TOKEN, data.VIEW_MASK):
        expect = params.proj(view_id).weights[0].shape[0]
        got = dataset.view(view_id).dim
        if expect != got:
            raise ValueError(f"view '{view_id}' dim {got} != projection input {expect}")


def _batches(indices: np.ndarray, batch_size: int) -> list[np.ndarray]:
    return [indices[i : i + batch_size] for i in range(0, len(indices), batch_size)]


def _gather(dataset: data.Dataset, view_id: str, idx: np.ndarray) -> np.ndarray:
    return np.asarray(dataset.view(view_id).rows[idx], dtype=np.float64)


def pretrain(
    dataset: data.Dataset, cfg: TrainConfig, reset_heads: bool = True
) -> model.ModelParams:
    """Warmup on labeled train instances with known-only cross-entropy.

    The known heads are reset to their fresh initialization afterwards; only
    the projections keep what warmup learned. ``reset_heads=False`` keeps
    them, which is useful for inspecting warmup quality.
    """
    cfg.validate()
    labeled_train, _, _ = data.partition(dataset)
    if len(labeled_train) == 0:
        raise ValueError("pretraining requires at least one labeled train instance")

    params = init_params(dataset, cfg)
    _check_dims(dataset, params)
    views = model.active_views(cfg.views)
    known_index = {name: i for i, name in enumerate(dataset.labels.known_types)}
    targets_all = np.array(
        [known_index[inst.label] if inst.label is not None else -1 for inst in dataset.instances]
    )

    head_snapshot = {
        name: arr.copy()
        for name, arr in params.named_tensors().items()
        if name.startswith("head_known_")
    }

    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    n_batches = int(np.ceil(len(labeled_train) / cfg.batch_size))
    trained = tuple(f"proj_{v}" for v in views) + tuple(f"head_known_{v}" for v in views)
    opt = nn.OptimState(
        base_lr=cfg.lr,
        total_steps=cfg.pretrain_epochs * n_batches,
        weight_decay=cfg.weight_decay,
    )
    tensors = params.named_tensors()
    for _ in range(cfg.pretrain_epochs):
        order = labeled_train[rng.permutation(len(labeled_train))]
        for batch in _batches(order, cfg.batch_size):
            x = {v: _gather(dataset, v, batch) for v in views}
            _, grads = model.pretrain_batch_loss_and_grads(
                params, x, targets_all[batch], cfg.loss, cfg.views
            )
            grads = {k: g for k, g in grads.items() if k.split(".")[0] in trained}
            nn.adamw_step(opt, tensors, grads)

    if reset_heads:
        for name, arr in head_snapshot.items():
            tensors[name][...] = arr
    return params


def _pseudo_label_pass(
    dataset: data.Dataset,
    params: model.ModelParams,
    cfg: TrainConfig,
    unlabeled_train: np.ndarray,
    epoch: int,
) -> tuple[dict[str, np.ndarray], dict[str, float | None]]:
    """Per-view K-means pseudo-labels over the unlabeled train set."""
    views = model.active_views(cfg.views)
    golds = [dataset.instances[i].gold for i in unlabeled_train]
    have_gold = all(g is not None for g in golds) and len(golds) > 0
    pseudo: dict[str, np.ndarray] = {}
    pl_acc: dict[str, float | None] = {"token": None, "mask": None}
    for vi, v in enumerate(views):
        rows = _gather(dataset, v, unlabeled_train)
        seed = derive_seed(cfg.seed, 3, epoch, vi)
        ids = clustering.assign_pseudo_labels(params.proj(v), rows, cfg.k, seed)
        pseudo[v] = ids
        if have_gold:
            pl_acc[v], _ = matching_accuracy(golds, ids)
    return pseudo, pl_acc


def train(
    dataset: data.Dataset, params: model.ModelParams, cfg: TrainConfig
) -> tuple[model.ModelParams, list[TrainLogRecord]]:
    """Co-training epochs: refresh pseudo-labels, then shuffled mixed batches.

    Labeled rows contribute the supervised term, unlabeled rows the pairwise
    term (cross-view pseudo-labels) and the consistency term.
    """
    cfg.validate()
    _check_dims(dataset, params)
    labeled_train, unlabeled_train, unlabeled_test = data.partition(dataset)
    if len(unlabeled_train) == 0:
        raise ValueError("training requires unlabeled train instances")
    views = model.active_views(cfg.views)

    known_index = {name: i for i, name in enumerate(dataset.labels.known_types)}
    targets_all = np.array(
        [known_index[inst.label] if inst.label is not None else -1 for inst in dataset.instances]
    )
    is_labeled = np.zeros(dataset.n, dtype=bool)
    is_labeled[labeled_train] = True

    train_idx = np.concatenate([labeled_train, unlabeled_train])
    n_batches = int(np.ceil(len(train_idx) / cfg.batch_size))
    tensors = params.named_tensors()
    trained = tuple(f"proj_{v}" for v in views) + tuple(
        f"head_{kind}_{v}" for v in views for kind in ("known", "unknown")
    )
    opt = nn.OptimState(
        base_lr=cfg.lr,
        total_steps=cfg.train_epochs * n_batches,
        weight_decay=cfg.weight_decay,
    )
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 2]))
    log: list[TrainLogRecord] = []

    for epoch in range(cfg.train_epochs):
        pseudo, pl_acc = _pseudo_label_pass(dataset, params, cfg, unlabeled_train, epoch)
        pseudo_of = {v: np.full(dataset.n, -1, dtype=np.intp) for v in views}
        for v in views:
            pseudo_of[v][unlabeled_train] = pseudo[v]

        order = train_idx[rng.permutation(len(train_idx))]
        sums = {"sup": 0.0, "unsup": 0.0, "consist": 0.0, "total": 0.0}
        small_batches = 0
        batches = _batches(order, cfg.batch_size)
        for batch in batches:
            lab_mask = is_labeled[batch]
            x = {v: _gather(dataset, v, batch) for v in views}
            terms, grads = model.batch_loss_and_grads(
                params,
                x,
                lab_mask,
                targets_all[batch[lab_mask]],
                {v: pseudo_of[v][batch[~lab_mask]] for v in views},
                cfg.loss,
                cfg.views,
            )
            if terms.n_unlabeled < 2:
                small_batches += 1
            grads = {k: g for k, g in grads.items() if k.split(".")[0] in trained}
            nn.adamw_step(opt, tensors, grads)
            sums["sup"] += terms.sup
            sums["unsup"] += terms.unsup
            sums["consist"] += terms.consist
            sums["total"] += terms.total

        test_report = None
        is_last = epoch == cfg.train_epochs - 1
        if len(unlabeled_test) and cfg.eval_every > 0 and (
            (epoch + 1) % cfg.eval_every == 0 or is_last
        ):
            test_report = evaluate(dataset, params, cfg, source=cfg.eval_source).to_dict()

        nb = len(batches)
        log.append(
            TrainLogRecord(
                epoch=epoch,
                loss_sup=sums["sup"] / nb,
                loss_unsup=sums["unsup"] / nb,
                loss_consist=sums["consist"] / nb,
                loss_total=sums["total"] / nb,
                pl_acc_token=pl_acc["token"],
                pl_acc_mask=pl_acc["mask"],
                small_batches=small_batches,
                test_report=test_report,
            )
        )
    return params, log


def evaluate(
    dataset: data.Dataset,
    params: model.ModelParams,
    cfg: TrainConfig,
    source: str = EVAL_UNKNOWN_HEAD,
) -> ClusterReport:
    """Cluster the unlabeled test instances and score them against gold.

    ``unknown_head`` takes the argmax over the unknown segment of the
    view-averaged prediction; ``kmeans`` clusters the concatenated projected
    views instead.
    """
    _, _, unlabeled_test = data.partition(dataset)
    if len(unlabeled_test) == 0:
        raise ValueError("no unlabeled test instances to evaluate")
    golds = [dataset.instances[i].gold for i in unlabeled_test]
    if any(g is None for g in golds):
        raise ValueError("evaluation requires gold labels on unlabeled test instances")
    views = model.active_views(cfg.views)

    if source == EVAL_UNKNOWN_HEAD:
        num_known = params.num_known
        avg = None
        for v in views:
            p = model.view_probs(params, v, _gather(dataset, v, unlabeled_test))
            avg = p if avg is None else avg + p
        avg = avg / len(views)
        pred = avg[:, num_known:].argmax(axis=1)
    elif source == EVAL_KMEANS:
        h = np.concatenate(
            [
                clustering.project_view(params.proj(v), _gather(dataset, v, unlabeled_test))
                for v in views
            ],
            axis=1,
        )
        pred = clustering.kmeans_fit(h, cfg.k, derive_seed(cfg.seed, 4)).assignments
    else:
        raise ValueError(f"unknown evaluation source '{source}'")
    return cluster_report(golds, pred)


def run_pipeline(
    dataset: data.Dataset,
    cfg: TrainConfig,
    out_dir: Path | str | None = None,
    source: str | None = None,
    initial: model.ModelParams | None = None,
) -> tuple[model.ModelParams, list[TrainLogRecord], ClusterReport]:
    """Warmup (unless initial params are given), train, evaluate, write outputs."""
    source = cfg.eval_source if source is None else source
    if initial is not None:
        params = initial
    elif cfg.pretrain_epochs > 0:
        params = pretrain(dataset, cfg)
    else:
        params = init_params(dataset, cfg)
    params, log = train(dataset, params, cfg)
    report = evaluate(dataset, params, cfg, source=source)
    if out_dir is not None:
        write_outputs(Path(out_dir), params, log, report, cfg, source)
    return params, log, report


def write_outputs(
    out_dir: Path,
    params: model.ModelParams,
    log: list[TrainLogRecord],
    report: ClusterReport,
    cfg: TrainConfig,
    source: str,
) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    data.write_checkpoint(out_dir / "checkpoint", params.named_tensors())
    with open(out_dir / "log.jsonl", "w", encoding="utf-8") as f:
        for record in log:
            f.write(json.dumps(record.to_dict()) + "\n")
    with open(out_dir / "report.json", "w", encoding="utf-8") as f:
        json.dump(report_payload(report, cfg, source), f, indent=2)
        f.write("\n")


def report_payload(report: ClusterReport, cfg: TrainConfig, source: str) -> dict:
    payload = report.to_dict()
    payload["config"] = cfg.to_dict()
    payload["seed"] = cfg.seed
    payload["source"] = source
    return payload


def sweep_k(
    dataset: data.Dataset, cfg: TrainConfig, k_values: list[int]
) -> list[tuple[int, ClusterReport]]:
    """Full pretrain+train+evaluate per cluster count, same seed throughout."""
    results = []
    for k in k_values:
        run_cfg = dataclasses.replace(cfg, k=k)
        _, _, report = run_pipeline(dataset, run_cfg)
        results.append((k, report))
    return results
