"""Fixed-length pooling of frame sequences via covariance statistics.

CF is the row-major upper triangle (diagonal included) of the sample
covariance matrix, giving d*(d+1)/2 values for d-dimensional frames.  ACF
appends per-dimension mean, skewness and kurtosis, adding 3*d more.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import FrameSequence
from .errors import PoolingError


@dataclass(frozen=True, eq=False)
class UtteranceVector:
    values: np.ndarray
    kind: str  # "CF" | "ACF" | "external"
    source_dim: int
    utterance_id: str = ""

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise PoolingError(f"non-finite entries in {self.kind} vector")

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    entries: np.ndarray  # d x d, symmetric PSD

    def __post_init__(self):
        c = self.entries
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise PoolingError("covariance matrix must be square")
        if not np.array_equal(c, c.T):
            raise PoolingError("covariance matrix must be exactly symmetric")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


def cf_dim(d: int) -> int:
    return d * (d + 1) // 2


def acf_dim(d: int) -> int:
    return cf_dim(d) + 3 * d


def sample_covariance(frames: FrameSequence, unbiased: bool = True) -> CovarianceMatrix:
    """Sample covariance of the frames (1/(T-1) by default), exactly symmetric."""
    x = frames.frames
    T = x.shape[0]
    if T < 2:
        raise PoolingError(f"need at least 2 frames for a covariance, got {T}")
    centered = x - x.mean(axis=0)
    denom = T - 1 if unbiased else T
    cov = centered.T @ centered / denom
    cov = (cov + cov.T) / 2.0  # force bitwise symmetry
    return CovarianceMatrix(cov)


def vectorize_upper(cov: CovarianceMatrix, utterance_id: str = "") -> UtteranceVector:
    """Row-major upper triangle with diagonal: (c11, c12, ..., c1d, c22, ..., cdd)."""
    d = cov.dim
    iu = np.triu_indices(d)
    return UtteranceVector(cov.entries[iu].copy(), "CF", d, utterance_id)


def unvectorize_upper(vec: UtteranceVector) -> CovarianceMatrix:
    """Inverse of vectorize_upper; exact reconstruction of the matrix."""
    d = vec.source_dim
    if vec.dim < cf_dim(d):
        raise PoolingError("vector too short for its source dimension")
    mat = np.zeros((d, d))
    iu = np.triu_indices(d)
    mat[iu] = vec.values[: cf_dim(d)]
    mat = mat + np.triu(mat, 1).T
    return CovarianceMatrix(mat)


def frame_moments(frames: FrameSequence) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-dimension mean, skewness and (non-excess) kurtosis.

    Standardized moments use the population variance; zero-variance dimensions
    get skewness 0 and kurtosis 0 so downstream models never see NaNs.
    """
    x = frames.frames
    T = x.shape[0]
    if T < 2:
        raise PoolingError(f"need at least 2 frames for moments, got {T}")
    mean = x.mean(axis=0)
    centered = x - mean
    m2 = (centered**2).mean(axis=0)
    m3 = (centered**3).mean(axis=0)
    m4 = (centered**4).mean(axis=0)
    skew = np.zeros_like(m2)
    kurt = np.zeros_like(m2)
    nz = m2 > 0.0
    skew[nz] = m3[nz] / m2[nz] ** 1.5
    kurt[nz] = m4[nz] / m2[nz] ** 2
    return mean, skew, kurt


def augment(cf: UtteranceVector, frames: FrameSequence) -> UtteranceVector:
    """ACF = CF ++ mean ++ skewness ++ kurtosis (3*d extra values)."""
    if cf.kind != "CF":
        raise PoolingError(f"augment expects a CF vector, got {cf.kind}")
    if cf.source_dim != frames.dim:
        raise PoolingError(
            f"CF built from {cf.source_dim}-dim frames, got {frames.dim}-dim frames"
        )
    mean, skew, kurt = frame_moments(frames)
    values = np.concatenate([cf.values, mean, skew, kurt])
    return UtteranceVector(values, "ACF", cf.source_dim, cf.utterance_id)


def pool_utterance(frames: FrameSequence, kind: str, utterance_id: str = "",
                   unbiased: bool = True) -> UtteranceVector:
    """Pool one frame sequence to a CF or ACF vector."""
    cf = vectorize_upper(sample_covariance(frames, unbiased), utterance_id)
    if kind == "CF":
        return cf
    if kind == "ACF":
        return augment(cf, frames)
    raise PoolingError(f"unknown pooling kind {kind!r}")
