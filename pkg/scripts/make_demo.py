#!/usr/bin/env python3
"""Generate a small self-contained demo workspace for the CLI.

Writes a synthetic single-domain corpus (train sentences follow a coupled
token-pair pattern; domain-adjacent test sentences carry planted tokens the
training never saw), a matching word-vector file, parser outcomes, and a
run.toml. Then:

    python scripts/make_demo.py demo/
    parascope -c demo/run.toml evaluate --mode auc --end-to-end
    parascope -c demo/run.toml evaluate --mode downstream
    parascope -c demo/run.toml ablate
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np


def build_domain(seed, dim=32, n_train=300, n_test=40, sentence_len=10):
    rng = np.random.default_rng(seed)
    topic = [f"topic{i}" for i in range(24)]
    left = [f"left{i}" for i in range(10)]
    right = [f"right{i}" for i in range(10)]
    planted = [f"odd{i}" for i in range(12)]
    vectors = {t: rng.normal(size=dim) for t in topic + left + right + planted}

    def sentence(adjacent):
        words = [str(w) for w in rng.choice(topic, size=sentence_len - 2, replace=False)]
        at = int(rng.integers(len(words) + 1))
        if adjacent:
            pair = [str(w) for w in rng.choice(planted, size=2, replace=False)]
        else:
            k = int(rng.integers(len(left)))
            pair = [left[k], right[k]]
        words[at:at] = pair
        return " ".join(words)

    records = []
    for i in range(n_train):
        records.append({"id": f"tr{i}", "text": sentence(False),
                        "predicates": ["onTopic"], "split": "train"})
    for i in range(n_test):
        records.append({"id": f"te{i}", "text": sentence(False),
                        "predicates": ["onTopic"], "split": "test"})
    for i in range(n_test):
        records.append({"id": f"ta{i}", "text": sentence(True),
                        "predicates": ["unsupported"], "split": "test"})
    return records, vectors


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("directory", help="where to write the demo workspace")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args(argv)

    root = Path(args.directory)
    root.mkdir(parents=True, exist_ok=True)
    records, vectors = build_domain(args.seed)
    rng = np.random.default_rng(args.seed + 1)

    with (root / "demo.jsonl").open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record) + "\n")
    with (root / "demo_outcomes.jsonl").open("w", encoding="utf-8") as handle:
        for record in records:
            if record["split"] == "test":
                outcome = {"id": record["id"], "correct": bool(rng.random() < 0.6)}
                handle.write(json.dumps(outcome) + "\n")
    dim = len(next(iter(vectors.values())))
    with (root / "vectors.txt").open("w", encoding="utf-8") as handle:
        handle.write(f"{len(vectors)} {dim}\n")
        for token, vec in vectors.items():
            handle.write(token + " " + " ".join(repr(float(x)) for x in vec) + "\n")
    (root / "run.toml").write_text(
        '[paths]\n'
        'vectors = "vectors.txt"\n'
        'output_dir = "out"\n'
        '\n'
        '[hyperparams]\n'
        f'seed = {args.seed}\n'
        '\n'
        '[domains.demo]\n'
        'corpus = "demo.jsonl"\n'
        'excluded_predicates = ["unsupported"]\n'
        'parse_outcomes = "demo_outcomes.jsonl"\n',
        encoding="utf-8",
    )
    print(f"demo workspace written to {root}/")
    print(f"try: parascope -c {root}/run.toml evaluate --mode auc --end-to-end")
    return 0


if __name__ == "__main__":
    sys.exit(main())
