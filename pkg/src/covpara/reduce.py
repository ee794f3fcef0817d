"""PCA over pooled frame data, applied in the input (frame) space.

Reducing d-dimensional frames to m before covariance pooling shrinks the CF
vector from d*(d+1)/2 to m*(m+1)/2.  Fitting happens on training data only;
the fitted model is immutable and records its provenance.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dsp import FrameSequence
from .errors import FormatError, PcaError

_MAGIC = b"CPPC"
_VERSION = 1


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray         # d
    components: np.ndarray   # m x d, rows orthonormal
    eigenvalues: np.ndarray  # m, non-increasing, >= 0
    fitted_on: str = ""

    @property
    def input_dim(self) -> int:
        return self.mean.shape[0]

    @property
    def n_components(self) -> int:
        return self.components.shape[0]


def fit_pca(frames_pool: np.ndarray, m: int, fitted_on: str = "") -> PcaModel:
    """Eigendecomposition PCA of the pooled frames, keeping the top m directions.

    Sign convention: the largest-magnitude entry of every component is made
    positive, so serialized models are deterministic.
    """
    x = np.asarray(frames_pool, dtype=np.float64)
    if x.ndim != 2:
        raise PcaError("frames_pool must be a 2-D matrix")
    n, d = x.shape
    if not np.all(np.isfinite(x)):
        raise PcaError("non-finite values in PCA input")
    if m < 1 or m > d:
        raise PcaError(f"need 1 <= m <= d, got m={m}, d={d}")
    if n <= m:
        raise PcaError(f"need more rows than components, got n={n}, m={m}")

    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    components = eigvecs[:, order].T  # rows are principal directions

    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0

    return PcaModel(mean, np.ascontiguousarray(components[:m]),
                    eigvals[:m].copy(), fitted_on)


def transform(model: PcaModel, frames: FrameSequence) -> FrameSequence:
    """Project frames onto the principal directions: components @ (x - mean)."""
    if frames.dim != model.input_dim:
        raise PcaError(f"frames have dim {frames.dim}, model expects {model.input_dim}")
    projected = (frames.frames - model.mean) @ model.components.T
    return FrameSequence(np.ascontiguousarray(projected), frames.config_hash)


def transform_matrix(model: PcaModel, x: np.ndarray) -> np.ndarray:
    if x.shape[1] != model.input_dim:
        raise PcaError(f"matrix has dim {x.shape[1]}, model expects {model.input_dim}")
    return (x - model.mean) @ model.components.T


def inverse_transform(model: PcaModel, z: np.ndarray) -> np.ndarray:
    """Map projected rows back into the original space (exact at m = d)."""
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    if z.shape[1] != model.n_components:
        raise PcaError(f"projected rows have dim {z.shape[1]}, expected {model.n_components}")
    return z @ model.components + model.mean


def save_pca(model: PcaModel, path: str | Path) -> None:
    """Versioned little-endian binary: magic, version, d, m, provenance, arrays."""
    prov = model.fitted_on.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", _VERSION, model.input_dim, model.n_components))
        fh.write(struct.pack("<I", len(prov)))
        fh.write(prov)
        fh.write(model.mean.astype("<f8").tobytes())
        fh.write(model.eigenvalues.astype("<f8").tobytes())
        fh.write(np.ascontiguousarray(model.components).astype("<f8").tobytes())


def load_pca(path: str | Path) -> PcaModel:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise FormatError(f"{path}: not a PCA model file")
        version, d, m = struct.unpack("<III", fh.read(12))
        if version != _VERSION:
            raise FormatError(f"{path}: unsupported PCA model version {version}")
        (prov_len,) = struct.unpack("<I", fh.read(4))
        fitted_on = fh.read(prov_len).decode("utf-8")
        mean = np.frombuffer(fh.read(8 * d), dtype="<f8").copy()
        eigenvalues = np.frombuffer(fh.read(8 * m), dtype="<f8").copy()
        comp_bytes = fh.read(8 * m * d)
        if len(comp_bytes) != 8 * m * d:
            raise FormatError(f"{path}: truncated PCA model")
        components = np.frombuffer(comp_bytes, dtype="<f8").reshape(m, d).copy()
    return PcaModel(mean, components, eigenvalues, fitted_on)


def export_pca_csv(model: PcaModel, path: str | Path) -> None:
    """Human-inspectable dump: one labelled row per array."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("fitted_on," + model.fitted_on + "\n")
        fh.write("mean," + ",".join(repr(v) for v in model.mean) + "\n")
        fh.write("eigenvalues," + ",".join(repr(v) for v in model.eigenvalues) + "\n")
        for i, row in enumerate(model.components):
            fh.write(f"component_{i}," + ",".join(repr(v) for v in row) + "\n")
