"""Linear-SVM probes on frozen features."""
from __future__ import annotations

import warnings

import numpy as np
from sklearn.exceptions import ConvergenceWarning
from sklearn.svm import LinearSVC

from .features import FeatureTable


def _check_tables(train: FeatureTable, test: FeatureTable):
    if train.modality != test.modality:
        raise ValueError(f"modality mismatch: {train.modality} vs {test.modality}")
    missing = set(np.unique(test.labels)) - set(np.unique(train.labels))
    if missing:
        raise ValueError(f"classes {sorted(missing)} have no training examples")


def fit_svm(features, labels, C: float = 1.0) -> LinearSVC:
    """One-vs-rest linear SVM with the plain hinge loss."""
    clf = LinearSVC(C=C, loss="hinge", dual=True, max_iter=50_000, random_state=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        clf.fit(features, labels)
    return clf


def linear_probe(train: FeatureTable, test: FeatureTable, C: float = 1.0) -> float:
    """Fraction of test rows classified correctly by an SVM fit on ``train``."""
    _check_tables(train, test)
    clf = fit_svm(train.features, train.labels, C)
    return float(np.mean(clf.predict(test.features) == test.labels))


def permutation_chance(train: FeatureTable, test: FeatureTable, n_perm: int = 20, seed: int = 0, C: float = 1.0):
    """Probe accuracy with shuffled training labels; returns (mean, std)."""
    rng = np.random.default_rng(seed)
    accs = []
    for _ in range(n_perm):
        shuffled = FeatureTable(train.ids, rng.permutation(train.labels), train.modality, train.view_count, train.features)
        accs.append(linear_probe(shuffled, test, C))
    return float(np.mean(accs)), float(np.std(accs))


def few_shot_probe(train: FeatureTable, test: FeatureTable, shots: int, rounds: int = 10, seed: int = 0, C: float = 1.0) -> dict:
    """Sample ``shots`` training rows per class each round, probe on the full test table."""
    _check_tables(train, test)
    classes, counts = np.unique(train.labels, return_counts=True)
    if np.any(counts < shots):
        short = classes[counts < shots].tolist()
        raise ValueError(f"classes {short} have fewer than {shots} training examples")
    rng = np.random.default_rng(seed)
    accs = []
    for _ in range(rounds):
        rows = np.concatenate([rng.choice(np.flatnonzero(train.labels == c), shots, replace=False) for c in classes])
        accs.append(linear_probe(train.subset(np.sort(rows)), test, C))
    return {"shots": shots, "mean": float(np.mean(accs)), "std": float(np.std(accs)), "rounds": accs}
