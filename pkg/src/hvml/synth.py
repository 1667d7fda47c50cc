"""Deterministic synthetic datasets for self-tests and offline runs.

``copy_task`` is the smallest learnable end-to-end check: binary features
where the labels are literal copies of the first two feature columns.
``linear_multilabel`` builds a dataset of any size whose labels are noisy
linear threshold functions of the features, with label frequencies chosen to
hit a target cardinality; the default arguments mirror the dimensions of the
emotions benchmark (593 x 72, 6 labels, about 1.87 labels per instance) so
full-scale training behavior can be exercised without any data files.
"""

from __future__ import annotations

import numpy as np

from . import seeds
from .data import BINARY, NUMERIC, Dataset


def copy_task(n: int = 64, d: int = 4, k: int = 2, seed: int = 0) -> Dataset:
    """Binary features; the labels are the first k feature columns."""
    if k > d:
        raise ValueError("copy task needs at least as many features as labels")
    rng = seeds.rng_for(seed, seeds.STREAM_SYNTH, 0)
    x = (rng.random((n, d)) < 0.5).astype(float)
    y = x[:, :k].astype(np.int8)
    return Dataset(x=x, y=y, feature_kinds=(BINARY,) * d, name="copy_task")


def linear_multilabel(n: int = 593, d: int = 72, k: int = 6, seed: int = 0,
                      label_freq=None, flip: float = 0.03,
                      name: str = "linear_multilabel") -> Dataset:
    """Labels are thresholded linear scores of uniform features, plus a small
    fraction of label flips. Thresholds are set from empirical score
    quantiles so each label hits its target frequency exactly."""
    rng = seeds.rng_for(seed, seeds.STREAM_SYNTH, 1)
    if label_freq is None:
        label_freq = 0.25 + 0.12 * rng.random(k)  # cardinality near 0.31 * k
    freq = np.asarray(label_freq, dtype=float)
    if freq.shape != (k,):
        raise ValueError(f"need {k} label frequencies, got shape {freq.shape}")
    x = rng.random((n, d))
    w = rng.standard_normal((d, k)) * (rng.random((d, k)) < 0.5)
    scores = (x - 0.5) @ w
    y = np.zeros((n, k), dtype=np.int8)
    for j in range(k):
        cut = np.quantile(scores[:, j], 1.0 - freq[j])
        y[:, j] = scores[:, j] > cut
    if flip > 0:
        flips = rng.random((n, k)) < flip
        y = np.where(flips, 1 - y, y).astype(np.int8)
    return Dataset(x=x, y=y, feature_kinds=(NUMERIC,) * d, name=name)
