"""Clustering evaluation: accuracy via optimal label matching, and NMI.

Accuracy maps predicted clusters to true classes with the Hungarian
algorithm on the negated contingency matrix; NMI normalizes mutual
information by the arithmetic mean of the two entropies (natural logs).
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass(frozen=True)
class LabelPair:
    predicted: np.ndarray
    truth: np.ndarray

    def __post_init__(self):
        pred = np.asarray(self.predicted, dtype=np.int64)
        true = np.asarray(self.truth, dtype=np.int64)
        if pred.shape != true.shape or pred.ndim != 1 or pred.size < 1:
            raise ValueError("predicted and truth must be equal-length 1-D, n >= 1")
        if pred.min() < 0 or true.min() < 0:
            raise ValueError("labels must be nonnegative")
        object.__setattr__(self, "predicted", pred)
        object.__setattr__(self, "truth", true)


def _assignment_cost(cost: np.ndarray) -> float:
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum())


def hungarian(cost: np.ndarray) -> np.ndarray:
    """Permutation p minimizing sum_i cost[i, p[i]].

    Among cost-minimizing permutations, returns the lexicographically
    smallest one: each row in order takes the smallest column that still
    allows completing at the optimal total cost.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError(f"cost must be square, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost entries must be finite")
    k = cost.shape[0]
    best = _assignment_cost(cost)
    tol = 1e-9 * max(1.0, abs(best))

    perm = np.empty(k, dtype=np.int64)
    free_cols = list(range(k))
    prefix = 0.0
    for i in range(k):
        for pos, j in enumerate(free_cols):
            rest_cols = free_cols[:pos] + free_cols[pos + 1:]
            rest = _assignment_cost(cost[np.ix_(range(i + 1, k), rest_cols)]) if i + 1 < k else 0.0
            if prefix + cost[i, j] + rest <= best + tol:
                perm[i] = j
                prefix += cost[i, j]
                free_cols = rest_cols
                break
        else:
            raise AssertionError("no completable column found")  # unreachable
    return perm


def _contingency(pair: LabelPair, k: int) -> np.ndarray:
    table = np.zeros((k, k), dtype=np.int64)
    np.add.at(table, (pair.predicted, pair.truth), 1)
    return table


def cluster_accuracy(pair: LabelPair, num_clusters: int) -> float:
    """Fraction of samples correct under the best one-to-one cluster-to-class map."""
    if pair.predicted.max() >= num_clusters or pair.truth.max() >= num_clusters:
        raise ValueError("label out of range for num_clusters")
    table = _contingency(pair, num_clusters)
    perm = hungarian(-table.astype(np.float64))
    matched = table[np.arange(num_clusters), perm].sum()
    return float(matched) / pair.predicted.size


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def nmi(pair: LabelPair) -> float:
    """I(pred; truth) / ((H(pred) + H(truth)) / 2), from empirical counts.

    Defined as 1.0 when both partitions are a single identical cluster
    (0/0 case), 0.0 when exactly one of them is single-cluster.
    """
    n = pair.predicted.size
    k = int(max(pair.predicted.max(), pair.truth.max())) + 1
    joint = _contingency(pair, k).astype(np.float64)
    row = joint.sum(axis=1)
    col = joint.sum(axis=0)
    h_pred = _entropy(row)
    h_true = _entropy(col)
    if h_pred == 0.0 and h_true == 0.0:
        return 1.0
    if h_pred == 0.0 or h_true == 0.0:
        return 0.0
    pj = joint / n
    pr = row / n
    pc = col / n
    mask = pj > 0
    mi = float(np.sum(pj[mask] * (np.log(pj[mask])
                                  - np.log(np.outer(pr, pc)[mask]))))
    return mi / ((h_pred + h_true) / 2.0)
