"""kNN anomaly scoring over sentence embeddings.

A sentence's adjacency score is the mean cosine distance to its k nearest
training embeddings, computed by exact linear scan (training sets here are
hundreds to low thousands of vectors, so exactness is cheap and keeps the
scores oracle-checkable). The decision threshold is calibrated so that a
configured fraction of an in-domain dev set would be flagged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import DOMAIN_ADJACENT, IN_DOMAIN


@dataclass(frozen=True)
class NeighborIndex:
    """Immutable store of training vectors plus the neighbor count k."""

    vectors: np.ndarray  # (n, dim)
    norms: np.ndarray  # (n,)
    ids: tuple[str, ...]
    k: int

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return self.vectors.shape[0]


@dataclass(frozen=True)
class Threshold:
    """A calibrated decision threshold; scores strictly above it are flagged."""

    value: float
    calibration_fraction: float
    source: str

    def __post_init__(self) -> None:
        if not np.isfinite(self.value):
            raise ValueError(f"threshold value must be finite, got {self.value}")


def build_index(train_embeddings: Sequence, k: int) -> NeighborIndex:
    """Build an exact-search index over training sentence embeddings.

    Accepts :class:`~parascope.encoders.SentenceEmbedding` objects or plain
    vectors. Requires ``1 <= k <= len(train_embeddings)``.
    """
    vectors = []
    ids = []
    for i, item in enumerate(train_embeddings):
        vector = getattr(item, "vector", item)
        vectors.append(np.asarray(vector, dtype=np.float64))
        ids.append(getattr(item, "sentence_id", None) or str(i))
    if not vectors:
        raise ValueError("cannot build an index over zero vectors")
    stacked = np.stack(vectors)
    if k < 1 or k > len(vectors):
        raise ValueError(f"k must be in [1, {len(vectors)}], got {k}")
    norms = np.linalg.norm(stacked, axis=1)
    stacked.setflags(write=False)
    norms.setflags(write=False)
    return NeighborIndex(vectors=stacked, norms=norms, ids=tuple(ids), k=k)


def _cosine_distances(index: NeighborIndex, query: np.ndarray) -> np.ndarray:
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (index.dimension,):
        raise ValueError(
            f"query has shape {query.shape}, index dimension is {index.dimension}"
        )
    query_norm = float(np.linalg.norm(query))
    dots = index.vectors @ query
    denom = index.norms * query_norm
    with np.errstate(divide="ignore", invalid="ignore"):
        sims = np.where(denom > 0.0, dots / np.where(denom > 0.0, denom, 1.0), 0.0)
    return 1.0 - np.clip(sims, -1.0, 1.0)


def adjacency_score(index: NeighborIndex, embedding: np.ndarray) -> float:
    """Mean cosine distance to the k nearest stored vectors.

    Distance ties are broken by insertion order (stable sort), so scores are
    deterministic for any input.
    """
    query = getattr(embedding, "vector", embedding)
    distances = _cosine_distances(index, query)
    nearest = np.argsort(distances, kind="stable")[: index.k]
    return float(distances[nearest].mean())


def calibrate_threshold(
    dev_scores: Sequence[float], flag_fraction: float, source: str = "dev"
) -> Threshold:
    """Threshold at the (1 - flag_fraction) quantile of in-domain dev scores.

    Uses linear interpolation between order statistics; with strict-greater
    flagging, roughly ``flag_fraction`` of the dev scores end up flagged.
    """
    scores = np.asarray(list(dev_scores), dtype=np.float64)
    if scores.size == 0:
        raise ValueError("cannot calibrate a threshold on an empty score list")
    if not 0.0 < flag_fraction < 1.0:
        raise ValueError(f"flag_fraction must be in (0, 1), got {flag_fraction}")
    value = float(np.quantile(scores, 1.0 - flag_fraction, method="linear"))
    return Threshold(value=value, calibration_fraction=flag_fraction, source=source)


def classify(
    index: NeighborIndex, threshold: Threshold, embedding: np.ndarray
) -> tuple[str, float]:
    """Label one embedding; domain-adjacent iff its score strictly exceeds
    the threshold. Returns ``(label, score)``."""
    score = adjacency_score(index, embedding)
    label = DOMAIN_ADJACENT if score > threshold.value else IN_DOMAIN
    return label, score


def flag_scores(scores: Sequence[float], threshold: Threshold) -> np.ndarray:
    """Boolean mask of scores strictly above the threshold."""
    return np.asarray(scores, dtype=np.float64) > threshold.value
