"""Feature-level concatenation and score-level averaging.

Feature fusion concatenates per-utterance vectors in declared member order;
score fusion takes the unweighted elementwise mean of model predictions.  A
hybrid scheme is just score fusion where one member happens to be a model
trained on feature-fused inputs, so no third code path exists.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FusionError
from .pooling import UtteranceVector


@dataclass(frozen=True)
class FusionSpec:
    level: str                 # "feature" | "score" ("hybrid" accepted as alias of score)
    members: tuple[str, ...]   # feature-set ids; score members may be "A+B" compounds

    def __post_init__(self):
        if self.level not in ("feature", "score", "hybrid"):
            raise FusionError(f"unknown fusion level {self.level!r}")
        if len(self.members) < 2:
            raise FusionError("fusion needs >=2 members")
        if len(set(self.members)) != len(self.members):
            raise FusionError(f"duplicate fusion members in {self.members!r}")

    @property
    def effective_level(self) -> str:
        return "score" if self.level == "hybrid" else self.level


def fuse_features(vectors: list[UtteranceVector]) -> UtteranceVector:
    """Concatenate one utterance's member vectors in the given order."""
    if len(vectors) < 2:
        raise FusionError("feature fusion needs >=2 members")
    utt_ids = {v.utterance_id for v in vectors}
    if len(utt_ids) != 1:
        raise FusionError(f"members belong to different utterances: {sorted(utt_ids)}")
    values = np.concatenate([v.values for v in vectors])
    return UtteranceVector(values, "external", vectors[0].source_dim, vectors[0].utterance_id)


def fuse_scores(predictions: list[np.ndarray]) -> np.ndarray:
    """Elementwise arithmetic mean of equally long prediction vectors."""
    if len(predictions) < 2:
        raise FusionError("score fusion needs >=2 members")
    arrays = [np.asarray(p, dtype=np.float64).reshape(-1) for p in predictions]
    length = arrays[0].shape[0]
    if length < 1:
        raise FusionError("empty prediction vectors")
    for k, a in enumerate(arrays[1:], start=1):
        if a.shape[0] != length:
            raise FusionError(f"prediction length mismatch: member 0 has {length}, member {k} has {a.shape[0]}")
    return np.mean(arrays, axis=0)
