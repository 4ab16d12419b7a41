#!/usr/bin/env python3
"""Best-effort converter from Overnight-style .examples files to the corpus format.

The public eight-domain benchmark ships per-domain files of s-expression
records::

    (example
      (utterance "how many games has kobe bryant played in")
      (targetFormula (call ... (string num_games_played) ...))
    )

This script extracts the utterance and the `(string ...)` identifiers of the
target formula (converted from snake_case to camelCase, the spelling used in
predicate-exclusion configs), and emits one JSON line per example:

    python scripts/convert_overnight.py \
        --train basketball.paraphrases.train.examples \
        --test basketball.test.examples \
        --output basketball.jsonl

This is documentation-level tooling: it does not download anything, and it
only understands the record shape above. Inspect the output before use.
"""

import argparse
import json
import re
import sys

UTTERANCE_RE = re.compile(r'\(utterance\s+"((?:[^"\\]|\\.)*)"\)')
STRING_RE = re.compile(r"\(string\s+!?([A-Za-z0-9_.]+)\s*\)")


def snake_to_camel(name: str) -> str:
    head, *rest = name.split("_")
    return head + "".join(part.capitalize() for part in rest)


def iter_examples(text: str):
    for chunk in text.split("(example")[1:]:
        utterance = UTTERANCE_RE.search(chunk)
        if not utterance:
            continue
        predicates = sorted(
            {snake_to_camel(m.group(1)) for m in STRING_RE.finditer(chunk)}
        )
        yield utterance.group(1), predicates


def convert(train_path, test_path, output_path):
    written = 0
    with open(output_path, "w", encoding="utf-8") as out:
        for split, path in (("train", train_path), ("test", test_path)):
            if path is None:
                continue
            with open(path, encoding="utf-8") as handle:
                text = handle.read()
            for utterance, predicates in iter_examples(text):
                written += 1
                record = {
                    "id": f"{split}-{written}",
                    "text": utterance,
                    "predicates": predicates,
                    "split": split,
                }
                out.write(json.dumps(record) + "\n")
    return written


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--train", help=".examples file for the train split")
    parser.add_argument("--test", help=".examples file for the test split")
    parser.add_argument("--output", required=True, help="corpus JSONL to write")
    args = parser.parse_args(argv)
    if not args.train and not args.test:
        parser.error("need at least one of --train / --test")
    written = convert(args.train, args.test, args.output)
    print(f"wrote {written} records to {args.output}")
    return 0 if written else 1


if __name__ == "__main__":
    sys.exit(main())
