"""Cluster-quality metrics: matching accuracy, B-cubed, V-measure, ARI,
and a leave-one-out cosine k-NN probe."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass
class ClusterReport:
    accuracy: float
    bcubed_precision: float
    bcubed_recall: float
    bcubed_f1: float
    homogeneity: float
    completeness: float
    v_measure: float
    ari: float
    matching: dict[int, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "bcubed_precision": self.bcubed_precision,
            "bcubed_recall": self.bcubed_recall,
            "bcubed_f1": self.bcubed_f1,
            "homogeneity": self.homogeneity,
            "completeness": self.completeness,
            "v_measure": self.v_measure,
            "ari": self.ari,
            "matching": {str(k): v for k, v in sorted(self.matching.items())},
        }


def _as_ids(labels) -> tuple[np.ndarray, list]:
    """Map arbitrary hashable labels to contiguous ids (first-appearance order)."""
    values: list = []
    index: dict = {}
    out = np.empty(len(labels), dtype=np.intp)
    for i, lab in enumerate(labels):
        if lab not in index:
            index[lab] = len(values)
            values.append(lab)
        out[i] = index[lab]
    return out, values


def contingency(gold, pred) -> tuple[np.ndarray, list, list]:
    """Pred-cluster x gold-type count matrix plus the value orderings."""
    if len(gold) != len(pred):
        raise ValueError(f"length mismatch: {len(gold)} vs {len(pred)}")
    g_ids, g_vals = _as_ids(gold)
    p_ids, p_vals = _as_ids(pred)
    table = np.zeros((len(p_vals), len(g_vals)), dtype=np.int64)
    np.add.at(table, (p_ids, g_ids), 1)
    return table, p_vals, g_vals


def matching_accuracy(gold, pred) -> tuple[float, dict]:
    """Accuracy under the best one-to-one cluster-to-type assignment.

    Solves the rectangular linear assignment problem on the contingency
    matrix; unmatched clusters contribute nothing.
    """
    if len(gold) == 0:
        raise ValueError("empty input")
    table, p_vals, g_vals = contingency(gold, pred)
    rows, cols = linear_sum_assignment(table, maximize=True)
    matched = int(table[rows, cols].sum())
    matching = {p_vals[r]: g_vals[c] for r, c in zip(rows, cols)}
    return matched / len(gold), matching


def bcubed(gold, pred) -> tuple[float, float, float]:
    """Per-item co-membership precision/recall means and their harmonic mean.

    Each item counts itself among its own cluster and class.
    """
    g_ids, _ = _as_ids(gold)
    p_ids, _ = _as_ids(pred)
    if len(g_ids) != len(p_ids):
        raise ValueError("length mismatch")
    same_gold = g_ids[:, None] == g_ids[None, :]
    same_pred = p_ids[:, None] == p_ids[None, :]
    both = (same_gold & same_pred).sum(axis=1).astype(np.float64)
    precision = float((both / same_pred.sum(axis=1)).mean())
    recall = float((both / same_gold.sum(axis=1)).mean())
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def v_measure(gold, pred) -> tuple[float, float, float]:
    """Homogeneity, completeness and their harmonic mean (natural log)."""
    table, _, _ = contingency(gold, pred)
    n = table.sum()
    gold_counts = table.sum(axis=0)
    pred_counts = table.sum(axis=1)
    h_gold = _entropy(gold_counts.astype(np.float64))
    h_pred = _entropy(pred_counts.astype(np.float64))

    nz_p, nz_g = np.nonzero(table)
    nij = table[nz_p, nz_g].astype(np.float64)
    h_gold_given_pred = float(-((nij / n) * np.log(nij / pred_counts[nz_p])).sum())
    h_pred_given_gold = float(-((nij / n) * np.log(nij / gold_counts[nz_g])).sum())

    homogeneity = 1.0 if h_gold == 0 else 1.0 - h_gold_given_pred / h_gold
    completeness = 1.0 if h_pred == 0 else 1.0 - h_pred_given_gold / h_pred
    if homogeneity + completeness == 0:
        v = 0.0
    else:
        v = 2 * homogeneity * completeness / (homogeneity + completeness)
    return homogeneity, completeness, v


def _comb2(x: np.ndarray) -> np.ndarray:
    return x * (x - 1) / 2.0


def ari(gold, pred) -> float:
    """Adjusted Rand Index from pair counts.

    When max equals expected (all singletons or one cluster on both sides the
    only paths there), returns 1.0 if the partitions are identical, else 0.0.
    """
    if len(gold) < 2:
        raise ValueError("need at least 2 items")
    table, _, _ = contingency(gold, pred)
    n = table.sum()
    index = _comb2(table.astype(np.float64)).sum()
    a = _comb2(table.sum(axis=1).astype(np.float64)).sum()
    b = _comb2(table.sum(axis=0).astype(np.float64)).sum()
    expected = a * b / (n * (n - 1) / 2.0)
    max_index = (a + b) / 2.0
    if max_index == expected:
        g_ids, _ = _as_ids(gold)
        p_ids, _ = _as_ids(pred)
        return 1.0 if np.array_equal(g_ids, p_ids) else 0.0
    return float((index - expected) / (max_index - expected))


def cluster_report(gold, pred) -> ClusterReport:
    acc, matching = matching_accuracy(gold, pred)
    p, r, f1 = bcubed(gold, pred)
    h, c, v = v_measure(gold, pred)
    return ClusterReport(
        accuracy=acc,
        bcubed_precision=p,
        bcubed_recall=r,
        bcubed_f1=f1,
        homogeneity=h,
        completeness=c,
        v_measure=v,
        ari=ari(gold, pred),
        matching=matching,
    )


@dataclass
class KnnProbeReport:
    per_type: dict[str, float]
    macro_avg: float

    def to_dict(self) -> dict:
        return {"per_type": dict(sorted(self.per_type.items())), "macro_avg": self.macro_avg}


def knn_probe(rows: np.ndarray, gold, k: int = 32) -> KnnProbeReport:
    """Leave-one-out cosine k-NN accuracy per type plus the macro average.

    Ties are broken deterministically: equal similarities favor the lower
    index, vote ties the larger summed similarity, then the smaller type
    index. A zero vector has similarity 0 against everything.
    """
    x = np.asarray(rows, dtype=np.float64)
    n = x.shape[0]
    if n <= k:
        raise ValueError(f"need more than k={k} rows, got {n}")
    if not np.isfinite(x).all():
        raise ValueError("rows must be finite")
    g_ids, g_vals = _as_ids(gold)
    if len(g_ids) != n:
        raise ValueError("label count != row count")

    norms = np.linalg.norm(x, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = x / safe[:, None]
    unit[norms == 0] = 0.0
    sims = unit @ unit.T
    np.fill_diagonal(sims, -np.inf)

    n_types = len(g_vals)
    correct = np.zeros(n_types)
    totals = np.zeros(n_types)
    for i in range(n):
        order = np.argsort(-sims[i], kind="stable")[:k]
        votes = np.zeros(n_types)
        sim_sums = np.zeros(n_types)
        for j in order:
            votes[g_ids[j]] += 1
            sim_sums[g_ids[j]] += sims[i, j]
        top = votes.max()
        tied = np.flatnonzero(votes == top)
        if len(tied) > 1:
            best_sum = sim_sums[tied].max()
            tied = tied[sim_sums[tied] == best_sum]
        predicted = int(tied[0])
        totals[g_ids[i]] += 1
        if predicted == g_ids[i]:
            correct[g_ids[i]] += 1

    per_type = {str(g_vals[t]): float(correct[t] / totals[t]) for t in range(n_types)}
    macro = float(np.mean(list(per_type.values())))
    return KnnProbeReport(per_type, macro)
