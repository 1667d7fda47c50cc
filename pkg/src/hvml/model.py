"""The shallow feedforward scorer and its flat parameter vector.

The network maps an N x D feature matrix to N x K label scores in (0, 1):

    h1 = sigmoid(standardize(X @ E + b_e))      encoder, D -> C
    h2 = sigmoid(standardize(h1 @ W + b_w))     feedforward, C -> C
    Y  = sigmoid(h2 @ Dec + b_dec)              decoder, C -> K

``standardize`` is a per-row z-score (population standard deviation, guarded
divisor), applied within each sample's embedding, never across the batch, so
each output row depends only on its own input row. All learnable parameters
live in one flat vector so a derivative-free optimizer can treat the model
as a point in R^L, with L = D*C + C + C*C + C + C*K + K.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NumericError, ParseError

ROW_STD_EPS = 1e-8

CHECKPOINT_MAGIC = b"HVML"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelShape:
    """Layer sizes: d input features, c embedding dimensions, k labels."""

    d: int
    c: int
    k: int

    def __post_init__(self):
        if self.d < 1 or self.c < 1 or self.k < 1:
            raise ValueError(f"all shape dimensions must be >= 1, got {self}")

    @property
    def n_params(self) -> int:
        d, c, k = self.d, self.c, self.k
        return d * c + c + c * c + c + c * k + k


@dataclass(frozen=True)
class ModelParams:
    """A model as a flat parameter vector plus its shape."""

    flat: np.ndarray
    shape: ModelShape

    def __post_init__(self):
        flat = np.asarray(self.flat, dtype=float)
        if flat.ndim != 1 or flat.size != self.shape.n_params:
            raise DimensionError(
                f"parameter vector must have length {self.shape.n_params}, got {flat.shape}"
            )
        if not np.isfinite(flat).all():
            raise NumericError("parameter vector contains non-finite entries")
        object.__setattr__(self, "flat", flat)

    @classmethod
    def zeros(cls, shape: ModelShape) -> "ModelParams":
        return cls(np.zeros(shape.n_params), shape)


def pack(e, b_e, w, b_w, dec, b_dec) -> np.ndarray:
    """Concatenate the six weight blocks into one flat vector (row-major)."""
    return np.concatenate([
        np.asarray(e, dtype=float).ravel(),
        np.asarray(b_e, dtype=float).ravel(),
        np.asarray(w, dtype=float).ravel(),
        np.asarray(b_w, dtype=float).ravel(),
        np.asarray(dec, dtype=float).ravel(),
        np.asarray(b_dec, dtype=float).ravel(),
    ])


def unpack(params: ModelParams):
    """Split a flat vector back into (E, b_e, W, b_w, Dec, b_dec) views."""
    d, c, k = params.shape.d, params.shape.c, params.shape.k
    flat = params.flat
    bounds = np.cumsum([d * c, c, c * c, c, c * k, k])
    if flat.size != bounds[-1]:
        raise DimensionError(f"flat length {flat.size} does not match shape {params.shape}")
    e, b_e, w, b_w, dec, b_dec = np.split(flat, bounds[:-1])
    return (
        e.reshape(d, c),
        b_e,
        w.reshape(c, c),
        b_w,
        dec.reshape(c, k),
        b_dec,
    )


def row_standardize(m) -> np.ndarray:
    """Per-row z-score with population std; constant rows map to zero."""
    a = np.asarray(m, dtype=float)
    mean = a.mean(axis=-1, keepdims=True)
    std = a.std(axis=-1, keepdims=True)
    return (a - mean) / np.maximum(std, ROW_STD_EPS)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def forward(params: ModelParams, x) -> np.ndarray:
    """Score an N x D feature matrix; returns an N x K matrix in (0, 1)."""
    xm = np.asarray(x, dtype=float)
    if xm.ndim != 2:
        raise DimensionError(f"input must be a 2-D matrix, got shape {xm.shape}")
    if xm.shape[1] != params.shape.d:
        raise DimensionError(f"input has {xm.shape[1]} columns, model expects {params.shape.d}")
    if not np.isfinite(xm).all():
        raise NumericError("input matrix contains non-finite entries")
    e, b_e, w, b_w, dec, b_dec = unpack(params)
    h = _sigmoid(row_standardize(xm @ e + b_e))
    h = _sigmoid(row_standardize(h @ w + b_w))
    return _sigmoid(h @ dec + b_dec)


def save_model(params: ModelParams, path) -> None:
    """Write a checkpoint: 4-byte magic, version byte, (d, c, k) header as
    little-endian uint32, then the flat vector as little-endian float64."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(bytes([CHECKPOINT_VERSION]))
        fh.write(struct.pack("<III", params.shape.d, params.shape.c, params.shape.k))
        fh.write(params.flat.astype("<f8").tobytes())


def load_model(path) -> ModelParams:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise ParseError(f"bad checkpoint magic {magic!r}", path=str(path))
        version = fh.read(1)
        if version != bytes([CHECKPOINT_VERSION]):
            raise ParseError(f"unsupported checkpoint version {version!r}", path=str(path))
        d, c, k = struct.unpack("<III", fh.read(12))
        shape = ModelShape(d, c, k)
        data = fh.read()
    flat = np.frombuffer(data, dtype="<f8")
    if flat.size != shape.n_params:
        raise ParseError(
            f"checkpoint carries {flat.size} parameters, shape {shape} needs {shape.n_params}",
            path=str(path),
        )
    return ModelParams(flat.astype(float), shape)
