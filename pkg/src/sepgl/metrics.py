"""Evaluation metrics and replicate summaries."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List

import numpy as np
from scipy.stats import rankdata

from .exceptions import DimensionMismatch, SingleClass, TooFewReplicates, ZeroTruth

__all__ = [
    "relative_l2_error",
    "support_discrepancy",
    "auc",
    "ReplicateSummary",
    "summarize",
]


def relative_l2_error(beta_hat, beta_star) -> float:
    """``||beta_hat - beta*|| / ||beta*||``."""
    beta_hat = np.asarray(beta_hat, dtype=np.float64)
    beta_star = np.asarray(beta_star, dtype=np.float64)
    if beta_hat.shape != beta_star.shape:
        raise DimensionMismatch(f"shapes differ: {beta_hat.shape} vs {beta_star.shape}")
    denom = np.linalg.norm(beta_star)
    if denom == 0:
        raise ZeroTruth("relative error is undefined for a zero truth")
    return float(np.linalg.norm(beta_hat - beta_star) / denom)


def support_discrepancy(beta_hat, beta_star) -> float:
    """Fraction of coordinates whose zero/nonzero status differs.

    Zero means exactly zero; threshold estimates from other solvers first.
    """
    beta_hat = np.asarray(beta_hat)
    beta_star = np.asarray(beta_star)
    if beta_hat.shape != beta_star.shape:
        raise DimensionMismatch(f"shapes differ: {beta_hat.shape} vs {beta_star.shape}")
    return float(np.mean((beta_hat != 0) != (beta_star != 0)))


def auc(scores, labels) -> float:
    """Area under the ROC curve via the Mann-Whitney statistic, ties at midrank."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise DimensionMismatch("scores and labels differ in length")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC needs both classes")
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass
class ReplicateSummary:
    method: str
    time_seconds: float
    best_rel_error: float
    best_support_discrepancy: float
    seed: int
    replicate: int = 0


METRICS = ("time_seconds", "best_rel_error", "best_support_discrepancy")


def summarize(replicates: Iterable[ReplicateSummary]) -> Dict[str, Dict[str, dict]]:
    """Mean and normal-approximation 95% CI half-width per method and metric.

    Returns ``{method: {metric: {"mean", "half_width", "lo", "hi", "n"}}}``.
    """
    by_method: Dict[str, List[ReplicateSummary]] = {}
    for r in replicates:
        by_method.setdefault(r.method, []).append(r)
    out = {}
    for method, reps in by_method.items():
        if len(reps) < 2:
            raise TooFewReplicates(f"method {method!r} has {len(reps)} replicate(s); need at least 2")
        out[method] = {}
        for metric in METRICS:
            vals = np.array([getattr(r, metric) for r in reps], dtype=np.float64)
            mean = float(vals.mean())
            hw = 1.96 * float(vals.std(ddof=1)) / math.sqrt(vals.size)
            out[method][metric] = {"mean": mean, "half_width": hw, "lo": mean - hw, "hi": mean + hw,
                                   "n": int(vals.size)}
    return out
