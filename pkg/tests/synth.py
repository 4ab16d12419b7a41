"""Synthetic corpora and vector files shared by the pipeline tests.

The planted-surprise construction: training sentences are bags of topic
tokens plus one coupled token pair (x_k always next to y_k). In-domain test
sentences follow the same recipe; domain-adjacent ones replace the partner
token with a planted token that never occurs in training, so it violates
every trained co-occurrence while the rest of the sentence stays on topic.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def make_vectors(tokens, dim, seed):
    rng = np.random.default_rng(seed)
    return {token: rng.normal(size=dim) for token in tokens}


def write_vectors_file(path: Path, vectors: dict) -> Path:
    dim = len(next(iter(vectors.values())))
    with path.open("w", encoding="utf-8") as handle:
        handle.write(f"{len(vectors)} {dim}\n")
        for token, vec in vectors.items():
            handle.write(token + " " + " ".join(repr(float(x)) for x in vec) + "\n")
    return path


def write_corpus(path: Path, records) -> Path:
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record) + "\n")
    return path


def write_outcomes(path: Path, records, seed, correct_rate=0.6) -> Path:
    """Synthetic parser outcomes for every test record id."""
    rng = np.random.default_rng(seed)
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            if record["split"] != "test":
                continue
            correct = bool(rng.random() < correct_rate)
            handle.write(json.dumps({"id": record["id"], "correct": correct}) + "\n")
    return path


def planted_surprise_domain(
    seed,
    n_topic=24,
    n_pairs=10,
    n_planted=12,
    dim=32,
    n_train=300,
    n_test=50,
    sentence_len=10,
    token_prefix="",
):
    """Build (records, vectors) for one synthetic domain.

    Returns corpus records (train all in-domain; test half in-domain, half
    domain-adjacent, the latter tagged with the 'planted' predicate) and the
    token vector map covering every token including the planted ones. Every
    sentence is 80% topic tokens; adjacent test sentences carry two planted
    tokens in place of the trained pair.
    """
    rng = np.random.default_rng(seed)
    topic = [f"{token_prefix}t{i}" for i in range(n_topic)]
    left = [f"{token_prefix}x{i}" for i in range(n_pairs)]
    right = [f"{token_prefix}y{i}" for i in range(n_pairs)]
    planted = [f"{token_prefix}p{i}" for i in range(n_planted)]
    vectors = make_vectors(topic + left + right + planted, dim, seed)

    def sentence(adjacent: bool) -> str:
        words = [str(w) for w in rng.choice(topic, size=sentence_len - 2, replace=False)]
        insert_at = int(rng.integers(len(words) + 1))
        if adjacent:
            pair = [str(w) for w in rng.choice(planted, size=2, replace=False)]
        else:
            k = int(rng.integers(n_pairs))
            pair = [left[k], right[k]]
        words[insert_at:insert_at] = pair
        return " ".join(words)

    records = []
    next_id = 1

    def add(split, adjacent):
        nonlocal next_id
        records.append(
            {
                "id": str(next_id),
                "text": sentence(adjacent),
                "predicates": ["planted"] if adjacent else ["core"],
                "split": split,
            }
        )
        next_id += 1

    for _ in range(n_train):
        add("train", False)
    for _ in range(n_test):
        add("test", False)
    for _ in range(n_test):
        add("test", True)
    return records, vectors


def write_demo_workspace(
    root: Path,
    seed=7,
    domains=("demo",),
    config_extra="",
    **domain_kwargs,
):
    """Write vectors, corpora, outcomes, and a config under ``root``.

    Returns the config path. Each domain gets its own planted-surprise
    corpus drawn with a domain-specific sub-seed but a shared vector file.
    """
    vectors: dict = {}
    domain_sections = []
    for i, name in enumerate(domains):
        records, vecs = planted_surprise_domain(
            seed + 101 * i, token_prefix=f"{name}." if len(domains) > 1 else "", **domain_kwargs
        )
        vectors.update(vecs)
        write_corpus(root / f"{name}.jsonl", records)
        write_outcomes(root / f"{name}_outcomes.jsonl", records, seed + 17 + i)
        domain_sections.append(
            f'[domains.{name}]\n'
            f'corpus = "{name}.jsonl"\n'
            f'excluded_predicates = ["planted"]\n'
            f'parse_outcomes = "{name}_outcomes.jsonl"\n'
        )
    write_vectors_file(root / "vectors.txt", vectors)
    config = (
        '[paths]\n'
        'vectors = "vectors.txt"\n'
        'output_dir = "out"\n'
        '\n'
        '[hyperparams]\n'
        'epochs = 4\n'
        f'seed = {seed}\n'
        '\n'
        + config_extra
        + "\n".join(domain_sections)
    )
    config_path = root / "run.toml"
    config_path.write_text(config, encoding="utf-8")
    return config_path
