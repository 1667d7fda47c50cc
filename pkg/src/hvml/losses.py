"""Multi-label loss functions.

Three losses form the optimization targets, all minimized on [0, 1]:

* ``l1`` hamming loss,
* ``l2`` one minus label-ranking average precision (LRAP),
* ``l3`` one minus micro-averaged F1.

Binary cross-entropy (``l4``) is computed alongside them for monitoring but
is never optimized. Conventions that are not forced by the definitions:

* binarization threshold 0.5, boundary inclusive (score == threshold -> 1);
* LRAP ranks from descending score; a label's rank is the count of labels
  scoring at least as high (competition "max" ranking, the reference
  implementation's tie rule, which keeps the metric inside [0, 1] - average
  ranks would push tied positives above 1); samples without positive labels
  are skipped;
* micro F1 of two all-negative matrices is 1 (no possible error occurred);
* BCE is the mean over samples of per-sample sums over labels, with scores
  clipped to [1e-7, 1 - 1e-7] before the logarithm.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import DimensionError, UndefinedMetricError

BCE_EPS = 1e-7
DEFAULT_THRESHOLD = 0.5


class LossVector(NamedTuple):
    """A point in [0,1]^3 objective space. Lower is better in every component."""

    l1: float  # hamming loss
    l2: float  # 1 - LRAP
    l3: float  # 1 - micro F1


def _as_2d(name: str, m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.size == 0:
        raise DimensionError(f"{name} must be a non-empty 2-D matrix, got shape {a.shape}")
    return a


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")


def _check_binary(name: str, m: np.ndarray) -> None:
    if not np.isin(m, (0.0, 1.0)).all():
        raise DimensionError(f"{name} must contain only 0/1 entries")


def _check_scores(name: str, m: np.ndarray) -> None:
    if not np.isfinite(m).all():
        raise DimensionError(f"{name} contains non-finite entries")
    if (m < 0).any() or (m > 1).any():
        raise DimensionError(f"{name} entries must lie in [0, 1]")


def binarize(scores, threshold: float = DEFAULT_THRESHOLD) -> np.ndarray:
    """Threshold scores into a 0/1 label matrix; the boundary is inclusive."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    s = _as_2d("scores", scores)
    _check_scores("scores", s)
    return (s >= threshold).astype(np.int8)


def hamming_loss(pred, truth) -> float:
    """Fraction of mismatched label slots over all N*K entries."""
    p = _as_2d("pred", pred)
    t = _as_2d("truth", truth)
    _check_same_shape(p, t)
    _check_binary("pred", p)
    _check_binary("truth", t)
    return float(np.mean(p != t))


def lrap(scores, truth) -> float:
    """Label-ranking average precision.

    For every true label of a sample: the fraction of labels scoring at
    least as high that are themselves true, averaged over the sample's true
    labels, then over samples. Samples with no positive label are skipped;
    if every sample is skipped the metric is undefined.
    """
    s = _as_2d("scores", scores)
    t = _as_2d("truth", truth)
    _check_same_shape(s, t)
    _check_scores("scores", s)
    _check_binary("truth", t)

    positives = t > 0.5
    counted = positives.any(axis=1)
    if not counted.any():
        raise UndefinedMetricError("LRAP is undefined: no sample has a positive label")

    sc = s[counted]
    pos = positives[counted]
    per_sample = np.empty(sc.shape[0])
    chunk = max(1, int(2e6) // (s.shape[1] * s.shape[1] + 1))
    for lo in range(0, sc.shape[0], chunk):
        sb = sc[lo:lo + chunk]
        pb = pos[lo:lo + chunk]
        at_least = sb[:, None, :] >= sb[:, :, None]        # [i, j, k]: score_k >= score_j
        rank = at_least.sum(axis=2)                        # competition "max" rank of j
        true_above = (at_least & pb[:, None, :]).sum(axis=2)
        frac = np.where(pb, true_above / rank, 0.0)
        per_sample[lo:lo + chunk] = frac.sum(axis=1) / pb.sum(axis=1)
    return float(per_sample.mean())


def micro_f1(pred, truth) -> float:
    """Micro-averaged F1 from TP/FP/FN pooled over all entries.

    Returns 1 when both matrices are all-negative (vacuously perfect).
    """
    p = _as_2d("pred", pred)
    t = _as_2d("truth", truth)
    _check_same_shape(p, t)
    _check_binary("pred", p)
    _check_binary("truth", t)
    tp = float(np.sum((p == 1) & (t == 1)))
    fp = float(np.sum((p == 1) & (t == 0)))
    fn = float(np.sum((p == 0) & (t == 1)))
    denom = 2.0 * tp + fp + fn
    if denom == 0.0:
        return 1.0
    return 2.0 * tp / denom


def bce(scores, truth) -> float:
    """Binary cross-entropy: mean over samples of the per-sample sum over labels."""
    s = _as_2d("scores", scores)
    t = _as_2d("truth", truth)
    _check_same_shape(s, t)
    _check_scores("scores", s)
    _check_binary("truth", t)
    p = np.clip(s, BCE_EPS, 1.0 - BCE_EPS)
    per_sample = -(t * np.log(p) + (1.0 - t) * np.log1p(-p)).sum(axis=1)
    return float(per_sample.mean())


def loss_vector(scores, truth, threshold: float = DEFAULT_THRESHOLD) -> LossVector:
    """The three optimized losses of a score matrix against binary truth."""
    pred = binarize(scores, threshold)
    return LossVector(
        l1=hamming_loss(pred, truth),
        l2=1.0 - lrap(scores, truth),
        l3=1.0 - micro_f1(pred, truth),
    )


def geometric_mean(v) -> float:
    """Cube root of the product of the three loss components."""
    a = np.asarray(v, dtype=float)
    if a.shape != (3,):
        raise DimensionError(f"expected a 3-component loss vector, got shape {a.shape}")
    if (a < 0).any():
        raise ValueError("loss components must be non-negative")
    return float(np.cbrt(a[0] * a[1] * a[2]))
