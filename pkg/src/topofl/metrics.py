"""Evaluation metrics: accuracy, MSE, binary ROC-AUC."""

import numpy as np
from scipy.stats import rankdata


def accuracy(predicted, true) -> float:
    predicted, true = np.asarray(predicted), np.asarray(true)
    if predicted.shape != true.shape:
        raise ValueError(f"length mismatch: {predicted.shape} vs {true.shape}")
    if predicted.size == 0:
        raise ValueError("accuracy of an empty set")
    return float(np.mean(predicted == true))


def mse(predictions, targets) -> float:
    predictions = np.asarray(predictions, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if predictions.shape != targets.shape:
        raise ValueError(f"length mismatch: {predictions.shape} vs {targets.shape}")
    return float(np.mean((predictions - targets) ** 2))


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(positive scores above negative), ties count 1/2.

    Uses mid-ranks, so the statistic ``U`` is an exact half-integer and the
    result equals the pairwise definition.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = int((labels == 0).sum())
    if n_pos + n_neg != labels.size:
        raise ValueError("labels must be 0 or 1")
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC-AUC needs both classes present")
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))
