import numpy as np
import pytest

import oracles
from topofl.metrics import accuracy, mse, roc_auc


def test_accuracy_and_mse():
    assert accuracy([0, 1, 2, 1], [0, 1, 1, 1]) == 0.75
    with pytest.raises(ValueError):
        accuracy([0, 1], [0])
    assert mse([1.0, 2.0], [1.0, 4.0]) == 2.0
    assert mse(np.ones((2, 3)), np.ones((2, 3))) == 0.0


def test_auc_examples():
    assert roc_auc([0.1, 0.9], [0, 1]) == 1.0
    assert roc_auc([0.9, 0.1], [0, 1]) == 0.0
    assert roc_auc([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5
    with pytest.raises(ValueError):
        roc_auc([0.1, 0.2], [1, 1])
    with pytest.raises(ValueError):
        roc_auc([0.1, 0.2], [0, 2])


def test_auc_matches_pairwise_on_tied_scores():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(2, 40))
        labels = rng.integers(0, 2, n)
        labels[:2] = [0, 1]
        scores = rng.integers(0, 5, n) / 4.0
        assert roc_auc(scores, labels) == oracles.auc_pairwise(scores, labels)
