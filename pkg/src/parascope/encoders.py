"""Fixed-size sentence embeddings under four weighting schemes.

Every scheme produces a weighted average of *pre-trained* word vectors;
they differ only in where the per-token weights come from:

* ``surprise``            - one minus the cosine between a token's domain
                            vector and the sum of its context's domain
                            vectors (high for tokens unexpected in context)
* ``cbow``                - uniform weights (plain average)
* ``frequency``           - inverse document frequency over the train split
* ``pretrained-weights``  - the surprise computation, but run on the
                            pre-trained vectors themselves

Tokens without a vector in the relevant table are excluded entirely.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dataset import Instance
from .embeddings import DOMAIN_SPECIFIC, EmbeddingTable, cosine_distance

SCHEME_SURPRISE = "surprise"
SCHEME_CBOW = "cbow"
SCHEME_FREQUENCY = "frequency"
SCHEME_PRETRAINED_WEIGHTS = "pretrained-weights"
SCHEMES = (SCHEME_SURPRISE, SCHEME_CBOW, SCHEME_FREQUENCY, SCHEME_PRETRAINED_WEIGHTS)

DEFAULT_SURPRISE_WINDOW = 2


class SentenceNotEncodableError(ValueError):
    """No token in the sentence has a vector, so no embedding exists."""

    def __init__(self, sentence_id: str | None, tokens: Sequence[str]):
        preview = " ".join(tokens[:8])
        ident = sentence_id if sentence_id is not None else f"'{preview}'"
        super().__init__(f"sentence {ident}: no token has a known vector")
        self.sentence_id = sentence_id


@dataclass(frozen=True)
class SentenceEmbedding:
    """A sentence vector plus the per-token weights that produced it."""

    vector: np.ndarray
    weights: np.ndarray  # aligned with `tokens`, the included tokens in order
    scheme: str
    tokens: tuple[str, ...]
    fallback: bool = False  # True when all weights were zero and the plain mean was used
    sentence_id: str | None = None

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        vector = np.asarray(self.vector, dtype=np.float64).copy()
        weights = np.asarray(self.weights, dtype=np.float64).copy()
        if weights.shape != (len(self.tokens),):
            raise ValueError("weights must align with the included tokens")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        vector.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "vector", vector)
        object.__setattr__(self, "weights", weights)


@dataclass(frozen=True)
class IdfTable:
    """Inverse document frequencies over a training split (document = instance)."""

    values: Mapping[str, float] = field(repr=False)
    max_idf: float

    def weight(self, token: str) -> float:
        """Stored idf, or the maximum observed idf for unseen tokens."""
        return self.values.get(token, self.max_idf)


def build_idf(instances: Sequence[Instance]) -> IdfTable:
    """idf(t) = ln(N / df(t)) + 1 over instances, computed on token sets."""
    if not instances:
        raise ValueError("cannot build an idf table from an empty training set")
    n_docs = len(instances)
    doc_freq: Counter[str] = Counter()
    for instance in instances:
        doc_freq.update(set(instance.tokens))
    values = {
        token: math.log(n_docs / df) + 1.0 for token, df in doc_freq.items()
    }
    return IdfTable(values=values, max_idf=max(values.values()))


# A cosine of a vector against an exact positive multiple of itself can come
# out a few ulps below 1, leaving weights of ~1e-16 instead of 0. Weight sums
# at that scale are rounding noise, not signal, and must trigger the
# uniform-mean fallback just like an exact zero.
ZERO_WEIGHT_SUM = 1e-12


def weighted_sentence_vector(
    vectors: np.ndarray, weights: np.ndarray
) -> tuple[np.ndarray, bool]:
    """Weighted average of row vectors; uniform mean when all weights are zero.

    Returns ``(vector, fallback)`` where ``fallback`` records whether the
    zero-weight convention fired.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if vectors.ndim != 2 or weights.shape != (vectors.shape[0],):
        raise ValueError("need one weight per vector")
    if np.any(weights < 0):
        raise ValueError("weights must be nonnegative")
    total = float(weights.sum())
    if total <= ZERO_WEIGHT_SUM:
        return vectors.mean(axis=0), True
    return (weights[:, np.newaxis] * vectors).sum(axis=0) / total, False


def _context_surprise(
    tokens: Sequence[str], table: EmbeddingTable, window: int
) -> tuple[list[str], np.ndarray]:
    """Included tokens and their context-surprise weights under ``table``.

    The expected vector at position i is the sum of the table vectors of
    in-vocabulary tokens within +-window (window clipped at the sentence
    boundaries, position i itself excluded). The weight is the cosine
    distance between that sum and the token's own vector; a token whose
    window holds no in-vocabulary token gets weight 1.
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    known = [table.get(token) for token in tokens]
    included: list[str] = []
    weights: list[float] = []
    for i, token in enumerate(tokens):
        own = known[i]
        if own is None:
            continue
        lo = max(0, i - window)
        hi = min(len(tokens), i + window + 1)
        context = [known[j] for j in range(lo, hi) if j != i and known[j] is not None]
        if not context:
            weight = 1.0
        else:
            expected = np.sum(context, axis=0)
            weight = cosine_distance(expected, own)
        included.append(token)
        weights.append(weight)
    return included, np.asarray(weights, dtype=np.float64)


def surprise_weights(
    tokens: Sequence[str],
    domain_table: EmbeddingTable,
    window: int = DEFAULT_SURPRISE_WINDOW,
) -> np.ndarray:
    """Context-surprise weights, aligned with the in-vocabulary tokens."""
    if not tokens:
        raise ValueError("tokens must be non-empty")
    if domain_table.kind != DOMAIN_SPECIFIC:
        raise ValueError(
            f"surprise weights require a domain-specific table, got {domain_table.kind!r}"
        )
    _, weights = _context_surprise(tokens, domain_table, window)
    return weights


def _pretrained_rows(
    included: Sequence[str],
    pretrained: EmbeddingTable,
    tokens: Sequence[str],
    sentence_id: str | None,
) -> np.ndarray:
    if not included:
        raise SentenceNotEncodableError(sentence_id, tokens)
    rows = []
    for token in included:
        vector = pretrained.get(token)
        if vector is None:
            raise ValueError(
                f"token {token!r} has a domain vector but no pre-trained vector; "
                "the tables are inconsistent"
            )
        rows.append(vector)
    return np.stack(rows)


def encode_surprise(
    tokens: Sequence[str],
    pretrained: EmbeddingTable,
    domain_table: EmbeddingTable,
    window: int = DEFAULT_SURPRISE_WINDOW,
    sentence_id: str | None = None,
) -> SentenceEmbedding:
    """Surprise-weighted average of the pre-trained vectors."""
    if domain_table.kind != DOMAIN_SPECIFIC:
        raise ValueError(
            f"encode_surprise requires a domain-specific table, got {domain_table.kind!r}"
        )
    included, weights = _context_surprise(tokens, domain_table, window)
    rows = _pretrained_rows(included, pretrained, tokens, sentence_id)
    vector, fallback = weighted_sentence_vector(rows, weights)
    return SentenceEmbedding(
        vector=vector,
        weights=weights,
        scheme=SCHEME_SURPRISE,
        tokens=tuple(included),
        fallback=fallback,
        sentence_id=sentence_id,
    )


def encode_cbow(
    tokens: Sequence[str],
    pretrained: EmbeddingTable,
    sentence_id: str | None = None,
) -> SentenceEmbedding:
    """Plain average of the pre-trained vectors (all weights one)."""
    included = [token for token in tokens if token in pretrained]
    rows = _pretrained_rows(included, pretrained, tokens, sentence_id)
    weights = np.ones(len(included))
    vector, fallback = weighted_sentence_vector(rows, weights)
    return SentenceEmbedding(
        vector=vector,
        weights=weights,
        scheme=SCHEME_CBOW,
        tokens=tuple(included),
        fallback=fallback,
        sentence_id=sentence_id,
    )


def encode_frequency(
    tokens: Sequence[str],
    pretrained: EmbeddingTable,
    idf: IdfTable,
    sentence_id: str | None = None,
) -> SentenceEmbedding:
    """Average weighted by inverse document frequency in the train split."""
    included = [token for token in tokens if token in pretrained]
    rows = _pretrained_rows(included, pretrained, tokens, sentence_id)
    weights = np.asarray([idf.weight(token) for token in included])
    vector, fallback = weighted_sentence_vector(rows, weights)
    return SentenceEmbedding(
        vector=vector,
        weights=weights,
        scheme=SCHEME_FREQUENCY,
        tokens=tuple(included),
        fallback=fallback,
        sentence_id=sentence_id,
    )


def encode_pretrained_weights(
    tokens: Sequence[str],
    pretrained: EmbeddingTable,
    window: int = DEFAULT_SURPRISE_WINDOW,
    sentence_id: str | None = None,
) -> SentenceEmbedding:
    """Surprise computation run directly on the pre-trained vectors."""
    included, weights = _context_surprise(tokens, pretrained, window)
    rows = _pretrained_rows(included, pretrained, tokens, sentence_id)
    vector, fallback = weighted_sentence_vector(rows, weights)
    return SentenceEmbedding(
        vector=vector,
        weights=weights,
        scheme=SCHEME_PRETRAINED_WEIGHTS,
        tokens=tuple(included),
        fallback=fallback,
        sentence_id=sentence_id,
    )


def encode_instances(
    instances: Iterable[Instance],
    scheme: str,
    pretrained: EmbeddingTable,
    domain_table: EmbeddingTable | None = None,
    idf: IdfTable | None = None,
    window: int = DEFAULT_SURPRISE_WINDOW,
) -> tuple[list[SentenceEmbedding], list[Instance]]:
    """Encode a batch under ``scheme``; unencodable instances are collected.

    Returns ``(embeddings, skipped)`` where ``skipped`` holds instances whose
    tokens are all out of vocabulary.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    if scheme == SCHEME_SURPRISE and domain_table is None:
        raise ValueError("the surprise scheme needs a domain-specific table")
    if scheme == SCHEME_FREQUENCY and idf is None:
        raise ValueError("the frequency scheme needs an idf table")
    embeddings: list[SentenceEmbedding] = []
    skipped: list[Instance] = []
    for instance in instances:
        try:
            if scheme == SCHEME_SURPRISE:
                emb = encode_surprise(
                    instance.tokens, pretrained, domain_table, window, instance.instance_id
                )
            elif scheme == SCHEME_CBOW:
                emb = encode_cbow(instance.tokens, pretrained, instance.instance_id)
            elif scheme == SCHEME_FREQUENCY:
                emb = encode_frequency(
                    instance.tokens, pretrained, idf, instance.instance_id
                )
            else:
                emb = encode_pretrained_weights(
                    instance.tokens, pretrained, window, instance.instance_id
                )
        except SentenceNotEncodableError:
            skipped.append(instance)
            continue
        embeddings.append(emb)
    return embeddings, skipped
