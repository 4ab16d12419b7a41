"""Word-vector tables and the cosine primitives used across the pipeline.

The on-disk format is the plain-text one used by most public word vector
releases: one token per line followed by whitespace-separated components,
with an optional ``count dimension`` header line.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

logger = logging.getLogger(__name__)

PRETRAINED = "pretrained"
DOMAIN_SPECIFIC = "domain-specific"
KINDS = (PRETRAINED, DOMAIN_SPECIFIC)


class EmbeddingFormatError(ValueError):
    """A vector file could not be parsed."""


@dataclass(frozen=True)
class EmbeddingTable:
    """Immutable token -> dense vector map.

    ``entries`` is normalized on construction: every vector is converted to a
    read-only float64 array and checked against ``dimension``. Lookups of
    absent tokens return ``None`` rather than any default vector.
    """

    dimension: int
    entries: Mapping[str, np.ndarray] = field(repr=False)
    kind: str = PRETRAINED

    def __post_init__(self) -> None:
        if self.dimension <= 0:
            raise ValueError(f"dimension must be positive, got {self.dimension}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown table kind {self.kind!r}")
        normalized = {}
        for token, vector in self.entries.items():
            arr = np.asarray(vector, dtype=np.float64)
            if arr.shape != (self.dimension,):
                raise ValueError(
                    f"vector for token {token!r} has shape {arr.shape}, "
                    f"expected ({self.dimension},)"
                )
            arr = arr.copy()
            arr.setflags(write=False)
            normalized[token] = arr
        object.__setattr__(self, "entries", normalized)

    def get(self, token: str) -> np.ndarray | None:
        """Return the vector for ``token``, or ``None`` if absent."""
        return self.entries.get(token)

    def __contains__(self, token: str) -> bool:
        return token in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def tokens(self) -> Iterator[str]:
        """Tokens in insertion order."""
        return iter(self.entries)


def load_embeddings(
    path: str | Path,
    expected_dimension: int | None = None,
    kind: str = PRETRAINED,
) -> EmbeddingTable:
    """Load a plain-text vector file into an :class:`EmbeddingTable`.

    The dimension is inferred from the first data line unless
    ``expected_dimension`` is given. A first line consisting of exactly two
    integers is treated as a ``count dimension`` header and skipped.
    Duplicate tokens keep their first occurrence; the number ignored is
    logged as a warning.
    """
    if expected_dimension is not None and expected_dimension <= 0:
        raise ValueError(
            f"expected_dimension must be positive, got {expected_dimension}"
        )
    path = Path(path)
    entries: dict[str, np.ndarray] = {}
    dimension = expected_dimension
    duplicates = 0
    with path.open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            parts = line.split()
            if not parts:
                continue
            if line_no == 1 and _looks_like_header(parts, expected_dimension):
                continue
            token, components = parts[0], parts[1:]
            if not components:
                raise EmbeddingFormatError(
                    f"{path}, line {line_no}: no vector components for token {token!r}"
                )
            try:
                vector = np.array([float(c) for c in components], dtype=np.float64)
            except ValueError as exc:
                raise EmbeddingFormatError(
                    f"{path}, line {line_no}: unparseable vector component ({exc})"
                ) from None
            if dimension is None:
                dimension = len(components)
            if len(components) != dimension:
                raise EmbeddingFormatError(
                    f"{path}, line {line_no}: expected {dimension} components, "
                    f"got {len(components)}"
                )
            if token in entries:
                duplicates += 1
                continue
            entries[token] = vector
    if not entries:
        raise EmbeddingFormatError(f"{path}: no vectors found")
    if duplicates:
        logger.warning(
            "%s: ignored %d duplicate token(s); first occurrence wins", path, duplicates
        )
    return EmbeddingTable(dimension=dimension, entries=entries, kind=kind)


def _looks_like_header(parts: list[str], expected_dimension: int | None) -> bool:
    # Two bare integers on the first line is the conventional count/dim header.
    # A one-dimensional table would make that ambiguous, so an explicit
    # expected_dimension of 1 forces the data interpretation.
    if len(parts) != 2 or expected_dimension == 1:
        return False
    try:
        int(parts[0]), int(parts[1])
    except ValueError:
        return False
    return True


def save_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    """Write ``table`` in the plain-text format, header line included.

    Components are written as shortest exact decimals (``repr``), so a
    save/load round trip reproduces every vector bit for bit.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        handle.write(f"{len(table)} {table.dimension}\n")
        for token in table.tokens():
            vector = table.entries[token]
            components = " ".join(repr(float(c)) for c in vector)
            handle.write(f"{token} {components}\n")


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two vectors, in [-1, 1].

    If either vector has zero norm the similarity is defined as 0.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    value = float(np.dot(a, b) / (norm_a * norm_b))
    # Guard against rounding overshoot beyond the mathematical range.
    return min(1.0, max(-1.0, value))


def cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    """One minus cosine similarity, in [0, 2]."""
    return 1.0 - cosine_similarity(a, b)
