"""Linear map from pre-trained to domain-specific word embeddings.

The map is the input layer of a continuous bag-of-words model: at every
sentence position the model predicts the center token from the mean of the
mapped pre-trained vectors of its context window, through a full softmax
over the training vocabulary. Because the input layer consumes pre-trained
vectors rather than one-hot rows, the learned matrix transports *any* token
with a pre-trained vector into the domain space, including tokens never
seen in training.

Training is plain seeded SGD: per-position updates, sentence order shuffled
each epoch, fixed learning rate. Given the same corpus and seed the fitted
matrices are bit-for-bit reproducible.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import Instance
from .embeddings import DOMAIN_SPECIFIC, EmbeddingTable

MODEL_MAGIC = b"PSCOPEM1\n"


@dataclass(frozen=True)
class TrainingParams:
    window: int = 2
    epochs: int = 10
    learning_rate: float = 0.05
    seed: int = 0
    domain_dim: int | None = None

    def __post_init__(self) -> None:
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.domain_dim is not None and self.domain_dim <= 0:
            raise ValueError(f"domain_dim must be positive, got {self.domain_dim}")


@dataclass(frozen=True)
class DomainMapping:
    """Fitted input map plus the softmax output layer used to train it."""

    input_map: np.ndarray  # (domain_dim, pretrained_dim)
    output_layer: np.ndarray  # (vocab_size, domain_dim)
    vocab: tuple[str, ...]
    params: TrainingParams
    pretrained_dim: int
    epoch_losses: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        domain_dim = self.params.domain_dim or self.pretrained_dim
        if self.input_map.shape != (domain_dim, self.pretrained_dim):
            raise ValueError(
                f"input_map shape {self.input_map.shape} does not match "
                f"({domain_dim}, {self.pretrained_dim})"
            )
        if self.output_layer.shape != (len(self.vocab), domain_dim):
            raise ValueError(
                f"output_layer shape {self.output_layer.shape} does not match "
                f"({len(self.vocab)}, {domain_dim})"
            )
        for name in ("input_map", "output_layer"):
            arr = np.asarray(getattr(self, name), dtype=np.float64).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def domain_dim(self) -> int:
        return self.input_map.shape[0]


def _initial_matrices(
    pretrained_dim: int, domain_dim: int, vocab_size: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    # Identity-anchored start: the map begins close to the identity (padded or
    # truncated when dims differ) so early training preserves the pre-trained
    # geometry.
    base = np.zeros((domain_dim, pretrained_dim))
    side = min(domain_dim, pretrained_dim)
    base[:side, :side] = np.eye(side)
    input_map = base + rng.normal(0.0, 0.01, size=(domain_dim, pretrained_dim))
    output_layer = rng.normal(0.0, 0.01, size=(vocab_size, domain_dim))
    return input_map, output_layer


def _collect_positions(
    train: Sequence[Instance],
    pretrained: EmbeddingTable,
    vocab_index: dict[str, int],
    window: int,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-sentence training data: (context mean matrix, target id vector).

    A position is trainable when its token is in the vocabulary and at least
    one context token inside the window has a pre-trained vector. Context
    means are precomputed once; only the parameter matrices change between
    epochs.
    """
    sentences = []
    for instance in train:
        ids = [vocab_index.get(token, -1) for token in instance.tokens]
        vectors = [
            pretrained.get(token) if ids[i] >= 0 else None
            for i, token in enumerate(instance.tokens)
        ]
        contexts = []
        targets = []
        for i, target in enumerate(ids):
            if target < 0:
                continue
            lo = max(0, i - window)
            hi = min(len(ids), i + window + 1)
            context = [vectors[j] for j in range(lo, hi) if j != i and ids[j] >= 0]
            if not context:
                continue
            contexts.append(np.mean(context, axis=0))
            targets.append(target)
        if targets:
            sentences.append((np.asarray(contexts), np.asarray(targets, dtype=np.intp)))
    return sentences


def train_mapping(
    train: Sequence[Instance],
    pretrained: EmbeddingTable,
    params: TrainingParams,
) -> DomainMapping:
    """Fit the pretrained -> domain map by CBOW-style SGD over ``train``.

    Raises ``ValueError`` when no position is trainable (for example when
    every token lacks a pre-trained vector) and ``RuntimeError`` naming the
    epoch if the loss goes non-finite.
    """
    if not train:
        raise ValueError("training corpus is empty")
    vocab: list[str] = []
    vocab_index: dict[str, int] = {}
    for instance in train:
        for token in instance.tokens:
            if token not in vocab_index and token in pretrained:
                vocab_index[token] = len(vocab)
                vocab.append(token)
    if not vocab:
        raise ValueError("no training token has a pre-trained vector")

    domain_dim = params.domain_dim or pretrained.dimension
    rng = np.random.default_rng(params.seed)
    input_map, output_layer = _initial_matrices(
        pretrained.dimension, domain_dim, len(vocab), rng
    )

    sentences = _collect_positions(train, pretrained, vocab_index, params.window)
    if not sentences:
        raise ValueError("no trainable position: every context window is empty")

    lr = params.learning_rate
    epoch_losses: list[float] = []
    for epoch in range(params.epochs):
        order = rng.permutation(len(sentences))
        total_loss = 0.0
        total_positions = 0
        for sentence_idx in order:
            contexts, targets = sentences[sentence_idx]
            for context_mean, target in zip(contexts, targets):
                hidden = input_map @ context_mean
                logits = output_layer @ hidden
                logits -= logits.max()
                exp_logits = np.exp(logits)
                norm = exp_logits.sum()
                total_loss += float(np.log(norm) - logits[target])
                total_positions += 1
                # Softmax cross-entropy gradients; both layers stepped from
                # the pre-update output layer.
                delta = exp_logits / norm
                delta[target] -= 1.0
                hidden_grad = output_layer.T @ delta
                output_layer -= lr * np.outer(delta, hidden)
                input_map -= lr * np.outer(hidden_grad, context_mean)
        mean_loss = total_loss / total_positions
        if not np.isfinite(mean_loss):
            raise RuntimeError(f"non-finite training loss in epoch {epoch + 1}")
        epoch_losses.append(mean_loss)

    return DomainMapping(
        input_map=input_map,
        output_layer=output_layer,
        vocab=tuple(vocab),
        params=params,
        pretrained_dim=pretrained.dimension,
        epoch_losses=tuple(epoch_losses),
    )


def apply_mapping(mapping: DomainMapping, word_vector: np.ndarray) -> np.ndarray:
    """Transport one pre-trained vector into the domain space."""
    vector = np.asarray(word_vector, dtype=np.float64)
    if vector.shape != (mapping.pretrained_dim,):
        raise ValueError(
            f"expected a vector of dimension {mapping.pretrained_dim}, "
            f"got shape {vector.shape}"
        )
    return mapping.input_map @ vector


def context_logits(mapping: DomainMapping, context_vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Vocabulary logits the model assigns given pre-trained context vectors."""
    if len(context_vectors) == 0:
        raise ValueError("context is empty")
    context_mean = np.mean([np.asarray(v, dtype=np.float64) for v in context_vectors], axis=0)
    if context_mean.shape != (mapping.pretrained_dim,):
        raise ValueError(
            f"context vectors must have dimension {mapping.pretrained_dim}, "
            f"got shape {context_mean.shape}"
        )
    return mapping.output_layer @ (mapping.input_map @ context_mean)


def materialize_domain_table(
    mapping: DomainMapping, pretrained: EmbeddingTable
) -> EmbeddingTable:
    """Cache the mapped vector of every pre-trained token as a table."""
    tokens = list(pretrained.tokens())
    if tokens:
        stacked = np.stack([pretrained.entries[t] for t in tokens])
        mapped = stacked @ mapping.input_map.T
        entries = {token: mapped[i] for i, token in enumerate(tokens)}
    else:
        entries = {}
    return EmbeddingTable(
        dimension=mapping.domain_dim, entries=entries, kind=DOMAIN_SPECIFIC
    )


def save_mapping(mapping: DomainMapping, path: str | Path) -> None:
    """Serialize to the container format documented in docs/formats.md.

    Layout: magic, little-endian uint64 header length, UTF-8 JSON header
    (sorted keys), then the two matrices as little-endian float64 in C
    order. Identical mappings serialize to identical bytes.
    """
    header = {
        "format": "parascope-mapping",
        "version": 1,
        "pretrained_dim": mapping.pretrained_dim,
        "domain_dim": mapping.domain_dim,
        "vocab": list(mapping.vocab),
        "params": {
            "window": mapping.params.window,
            "epochs": mapping.params.epochs,
            "learning_rate": mapping.params.learning_rate,
            "seed": mapping.params.seed,
            "domain_dim": mapping.params.domain_dim,
        },
        "epoch_losses": list(mapping.epoch_losses),
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with Path(path).open("wb") as handle:
        handle.write(MODEL_MAGIC)
        handle.write(struct.pack("<Q", len(blob)))
        handle.write(blob)
        handle.write(np.ascontiguousarray(mapping.input_map, dtype="<f8").tobytes())
        handle.write(np.ascontiguousarray(mapping.output_layer, dtype="<f8").tobytes())


def load_mapping(path: str | Path) -> DomainMapping:
    """Read a mapping container written by :func:`save_mapping`."""
    path = Path(path)
    with path.open("rb") as handle:
        magic = handle.read(len(MODEL_MAGIC))
        if magic != MODEL_MAGIC:
            raise ValueError(f"{path}: not a mapping model file")
        (header_len,) = struct.unpack("<Q", handle.read(8))
        header = json.loads(handle.read(header_len).decode("utf-8"))
        pretrained_dim = header["pretrained_dim"]
        domain_dim = header["domain_dim"]
        vocab = tuple(header["vocab"])
        input_bytes = handle.read(domain_dim * pretrained_dim * 8)
        output_bytes = handle.read(len(vocab) * domain_dim * 8)
    input_map = np.frombuffer(input_bytes, dtype="<f8").reshape(domain_dim, pretrained_dim)
    output_layer = np.frombuffer(output_bytes, dtype="<f8").reshape(len(vocab), domain_dim)
    raw = header["params"]
    params = TrainingParams(
        window=raw["window"],
        epochs=raw["epochs"],
        learning_rate=raw["learning_rate"],
        seed=raw["seed"],
        domain_dim=raw["domain_dim"],
    )
    return DomainMapping(
        input_map=input_map,
        output_layer=output_layer,
        vocab=vocab,
        params=params,
        pretrained_dim=pretrained_dim,
        epoch_losses=tuple(header["epoch_losses"]),
    )
