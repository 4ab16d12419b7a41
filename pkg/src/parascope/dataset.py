"""Corpus parsing, tokenization, and construction of domain-adjacency splits.

A corpus is a JSON-lines file, one record per utterance::

    {"id": "42", "text": "...", "predicates": ["p1"], "split": "train"}

``id`` is optional and defaults to the (1-based) line number. Instances are
labeled domain-adjacent when their predicate set intersects a configured
excluded set; those instances are removed from train and dev so that only
the test split contains both labels.
"""

from __future__ import annotations

import json
import logging
import math
import string
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

SPLIT_TRAIN = "train"
SPLIT_DEV = "dev"
SPLIT_TEST = "test"
SPLITS = (SPLIT_TRAIN, SPLIT_DEV, SPLIT_TEST)

IN_DOMAIN = "in-domain"
DOMAIN_ADJACENT = "domain-adjacent"
LABELS = (IN_DOMAIN, DOMAIN_ADJACENT)

# Default excluded predicates for the standard eight-domain benchmark corpora,
# keyed by lowercase domain name.
DEFAULT_EXCLUDED_PREDICATES: dict[str, tuple[str, ...]] = {
    "basketball": ("numGamesPlayed",),
    "blocks": ("length",),
    "calendar": ("startTime",),
    "housing": ("size",),
    "publications": ("venue",),
    "recipes": ("preparationTime",),
    "restaurants": ("starRating",),
    "social": ("educationStartDate", "employmentEndDate"),
}


class CorpusFormatError(ValueError):
    """A corpus file could not be parsed."""


@dataclass(frozen=True)
class Instance:
    """A single utterance with its predicate annotation and split tag."""

    instance_id: str
    raw_text: str
    tokens: tuple[str, ...]
    predicates: frozenset[str]
    split: str
    label: str | None = None

    def __post_init__(self) -> None:
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")
        if self.label is not None and self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}")


@dataclass(frozen=True)
class SplitSpec:
    """Which predicates are considered outside the training schema."""

    excluded_predicates: frozenset[str]
    domain_name: str

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "excluded_predicates", frozenset(self.excluded_predicates)
        )
        if not self.excluded_predicates:
            raise ValueError(
                f"domain {self.domain_name!r}: excluded predicate set must be non-empty"
            )


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip surrounding punctuation.

    Internal punctuation (apostrophes, hyphens) is kept; tokens that reduce
    to the empty string are dropped.
    """
    tokens = []
    for raw in text.lower().split():
        token = raw.strip(string.punctuation)
        if token:
            tokens.append(token)
    return tokens


def load_corpus(path: str | Path) -> list[Instance]:
    """Parse a JSON-lines corpus file into unlabeled instances.

    Records missing a required field, with an unknown split value, or with a
    duplicate id raise :class:`CorpusFormatError` naming the offending line.
    Records whose text tokenizes to nothing are dropped with a warning, so
    every returned instance has at least one token.
    """
    path = Path(path)
    instances: list[Instance] = []
    seen_ids: set[str] = set()
    dropped_empty = 0
    with path.open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path}, line {line_no}: invalid JSON ({exc})") from None
            if not isinstance(record, dict):
                raise CorpusFormatError(f"{path}, line {line_no}: record must be an object")
            for field_name in ("text", "predicates", "split"):
                if field_name not in record:
                    raise CorpusFormatError(
                        f"{path}, line {line_no}: missing field {field_name!r}"
                    )
            text = record["text"]
            predicates = record["predicates"]
            split = record["split"]
            if not isinstance(text, str):
                raise CorpusFormatError(f"{path}, line {line_no}: 'text' must be a string")
            if not isinstance(predicates, list) or not all(
                isinstance(p, str) for p in predicates
            ):
                raise CorpusFormatError(
                    f"{path}, line {line_no}: 'predicates' must be a list of strings"
                )
            if split not in SPLITS:
                raise CorpusFormatError(
                    f"{path}, line {line_no}: unknown split value {split!r}"
                )
            instance_id = str(record.get("id", line_no))
            if instance_id in seen_ids:
                raise CorpusFormatError(
                    f"{path}, line {line_no}: duplicate instance id {instance_id!r}"
                )
            seen_ids.add(instance_id)
            tokens = tuple(tokenize(text))
            if not tokens:
                dropped_empty += 1
                logger.warning(
                    "%s, line %d: text tokenizes to nothing, instance dropped", path, line_no
                )
                continue
            instances.append(
                Instance(
                    instance_id=instance_id,
                    raw_text=text,
                    tokens=tokens,
                    predicates=frozenset(predicates),
                    split=split,
                )
            )
    if not instances:
        logger.warning("%s: corpus is empty", path)
    return instances


def label_for(predicates: frozenset[str], excluded: frozenset[str]) -> str:
    """Label derived purely from the predicate intersection rule."""
    return DOMAIN_ADJACENT if predicates & excluded else IN_DOMAIN


def exclude_predicates(
    corpus: Iterable[Instance], spec: SplitSpec
) -> tuple[list[Instance], list[Instance], list[Instance]]:
    """Label every instance and build the train/dev/test splits.

    Instances whose predicates intersect ``spec.excluded_predicates`` are
    labeled domain-adjacent and removed from train and dev; the test split
    retains both labels. Excluded predicates that never occur in the corpus
    produce a warning, not an error.
    """
    corpus = list(corpus)
    seen_predicates: set[str] = set()
    for instance in corpus:
        seen_predicates |= instance.predicates
    for predicate in sorted(spec.excluded_predicates - seen_predicates):
        logger.warning(
            "domain %s: excluded predicate %r never occurs in the corpus",
            spec.domain_name,
            predicate,
        )
    train: list[Instance] = []
    dev: list[Instance] = []
    test: list[Instance] = []
    for instance in corpus:
        labeled = replace(
            instance, label=label_for(instance.predicates, spec.excluded_predicates)
        )
        if instance.split == SPLIT_TEST:
            test.append(labeled)
        elif labeled.label == IN_DOMAIN:
            (train if instance.split == SPLIT_TRAIN else dev).append(labeled)
    return train, dev, test


def carve_dev(
    train: Sequence[Instance], dev_fraction: float, seed: int
) -> tuple[list[Instance], list[Instance]]:
    """Split off a seeded dev set from train when the corpus ships none.

    Returns ``(remaining_train, dev)``; carved instances are re-tagged with
    the dev split so downstream bookkeeping stays consistent.
    """
    if not 0.0 < dev_fraction < 1.0:
        raise ValueError(f"dev_fraction must be in (0, 1), got {dev_fraction}")
    if len(train) < 2:
        raise ValueError("cannot carve a dev set from fewer than 2 train instances")
    n_dev = int(math.floor(dev_fraction * len(train) + 0.5))
    n_dev = min(max(n_dev, 1), len(train) - 1)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(train))
    dev_positions = set(int(i) for i in order[:n_dev])
    remaining = [inst for i, inst in enumerate(train) if i not in dev_positions]
    dev = [
        replace(inst, split=SPLIT_DEV)
        for i, inst in enumerate(train)
        if i in dev_positions
    ]
    return remaining, dev


@dataclass(frozen=True)
class MixedTestSet:
    """A resampled test set with a controlled domain-adjacent fraction."""

    instances: tuple[Instance, ...]
    requested_fraction: float
    achieved_fraction: float
    with_replacement: bool

    def __len__(self) -> int:
        return len(self.instances)


def mix_test_set(
    test: Sequence[Instance], adjacent_fraction: float, seed: int
) -> MixedTestSet:
    """Resample ``test`` so its domain-adjacent share matches the request.

    In-domain instances are kept in full; domain-adjacent ones are sampled
    (without replacement when the pool allows, with replacement otherwise,
    flagged in the result) so the achieved fraction is within one instance
    of ``adjacent_fraction``. Output order is a seeded permutation, so the
    same seed reproduces the same multiset in the same order.
    """
    if not 0.0 < adjacent_fraction < 1.0:
        raise ValueError(f"adjacent_fraction must be in (0, 1), got {adjacent_fraction}")
    in_domain = [inst for inst in test if inst.label == IN_DOMAIN]
    adjacent = [inst for inst in test if inst.label == DOMAIN_ADJACENT]
    if not in_domain or not adjacent:
        raise ValueError(
            "mix_test_set requires at least one instance of each label "
            f"(got {len(in_domain)} in-domain, {len(adjacent)} domain-adjacent)"
        )
    unlabeled = len(test) - len(in_domain) - len(adjacent)
    if unlabeled:
        raise ValueError(f"{unlabeled} test instance(s) have no label")
    n_adjacent = int(
        math.floor(adjacent_fraction * len(in_domain) / (1.0 - adjacent_fraction) + 0.5)
    )
    rng = np.random.default_rng(seed)
    with_replacement = n_adjacent > len(adjacent)
    picks = rng.choice(len(adjacent), size=n_adjacent, replace=with_replacement)
    sampled = [adjacent[int(i)] for i in picks]
    combined = list(in_domain) + sampled
    order = rng.permutation(len(combined))
    instances = tuple(combined[int(i)] for i in order)
    return MixedTestSet(
        instances=instances,
        requested_fraction=adjacent_fraction,
        achieved_fraction=n_adjacent / len(combined),
        with_replacement=with_replacement,
    )
