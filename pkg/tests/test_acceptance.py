"""Acceptance suite: one test per exit criterion.

Each test prints one ``acceptance <n>: PASS/FAIL`` line (visible under
``pytest -s`` or in captured output) and asserts the criterion at its stated
tolerance.
"""

import json
import statistics
import time

import numpy as np

from parascope.cli import main
from parascope.dataset import (
    DEFAULT_EXCLUDED_PREDICATES,
    DOMAIN_ADJACENT,
    IN_DOMAIN,
    Instance,
    SplitSpec,
    exclude_predicates,
    mix_test_set,
    tokenize,
)
from parascope.detector import adjacency_score, build_index, calibrate_threshold, flag_scores
from parascope.embeddings import DOMAIN_SPECIFIC, EmbeddingTable
from parascope.encoders import encode_instances, encode_surprise, surprise_weights
from parascope.harness import (
    compute_roc_auc,
    downstream_accuracy,
    load_parse_outcomes,
)
from parascope.mapping import TrainingParams, context_logits, train_mapping, materialize_domain_table
from synth import planted_surprise_domain, write_corpus, write_demo_workspace, write_vectors_file


def check(criterion, description, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"acceptance {criterion}: {status} - {description}{suffix}")
    assert ok, f"criterion {criterion} failed: {description}{suffix}"


def records_to_instances(records):
    return [
        Instance(
            instance_id=r["id"],
            raw_text=r["text"],
            tokens=tuple(tokenize(r["text"])),
            predicates=frozenset(r["predicates"]),
            split=r["split"],
        )
        for r in records
    ]


def test_criterion_1_auc_matches_pairwise_oracle():
    """Trapezoidal AUC equals the O(n^2) pairwise statistic within 1e-12."""

    def pairwise_oracle(scored):
        positives = [s for s, label in scored if label == DOMAIN_ADJACENT]
        negatives = [s for s, label in scored if label == IN_DOMAIN]
        total = 0.0
        for p in positives:
            for n in negatives:
                total += 1.0 if p > n else (0.5 if p == n else 0.0)
        return total / (len(positives) * len(negatives))

    rng = np.random.default_rng(1001)
    started = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 201))
        while True:
            labels = rng.random(n) < rng.uniform(0.2, 0.8)
            if labels.any() and not labels.all():
                break
        scores = rng.normal(size=n)
        tie_mask = rng.random(n) < 0.4
        scores[tie_mask] = np.round(scores[tie_mask], 1)  # force exact ties
        scored = [
            (float(s), DOMAIN_ADJACENT if flag else IN_DOMAIN)
            for s, flag in zip(scores, labels)
        ]
        worst = max(worst, abs(compute_roc_auc(scored).auc - pairwise_oracle(scored)))
    elapsed = time.perf_counter() - started
    check(
        1,
        "AUC equals pairwise oracle on 100 random tied score sets",
        worst <= 1e-12 and elapsed < 5.0,
        f"max |diff| {worst:.2e}, {elapsed:.2f}s",
    )


def test_criterion_2_knn_matches_brute_force():
    """adjacency_score equals an independent brute-force scan within 1e-12."""

    def oracle_distance(a, b):
        norm_a = float(np.linalg.norm(a))
        norm_b = float(np.linalg.norm(b))
        if norm_a == 0.0 or norm_b == 0.0:
            return 1.0
        value = float(np.dot(a, b)) / (norm_a * norm_b)
        return 1.0 - min(1.0, max(-1.0, value))

    rng = np.random.default_rng(1002)
    vectors = rng.normal(size=(1000, 50))
    queries = rng.normal(size=(100, 50))
    started = time.perf_counter()
    worst = 0.0
    indexes = {k: build_index(vectors, k) for k in (1, 5, 1000)}
    for query in queries:
        distances = sorted(oracle_distance(query, v) for v in vectors)
        for k, index in indexes.items():
            expected = float(np.mean(distances[:k]))
            worst = max(worst, abs(adjacency_score(index, query) - expected))
    elapsed = time.perf_counter() - started
    check(
        2,
        "kNN scores equal brute force for 100 queries at k in {1, 5, N}",
        worst <= 1e-12 and elapsed < 10.0,
        f"max |diff| {worst:.2e}, {elapsed:.2f}s",
    )


def test_criterion_3_surprise_degeneracies():
    """Single-token weight, equal-weight mean reduction, scale invariance."""
    single = surprise_weights(
        ["only"], EmbeddingTable(1, {"only": np.ones(1)}, DOMAIN_SPECIFIC)
    )
    single_ok = single.tolist() == [1.0]

    rng = np.random.default_rng(1003)
    pretrained = EmbeddingTable(4, {t: rng.normal(size=4) for t in "abc"})
    orthogonal = EmbeddingTable(
        3,
        {"a": [1.0, 0, 0], "b": [0, 1.0, 0], "c": [0, 0, 1.0]},
        DOMAIN_SPECIFIC,
    )
    emb = encode_surprise(["a", "b", "c"], pretrained, orthogonal, window=2)
    mean = np.mean([pretrained.get(t) for t in "abc"], axis=0)
    mean_ok = bool(np.all(np.abs(emb.vector - mean) <= 1e-9))

    tokens = [f"w{i}" for i in range(10)]
    entries = {t: rng.normal(size=6) for t in tokens}
    domain = EmbeddingTable(6, entries, DOMAIN_SPECIFIC)
    scaled = EmbeddingTable(6, {t: 7.3 * v for t, v in entries.items()}, DOMAIN_SPECIFIC)
    scale_ok = True
    for _ in range(25):
        sentence = [str(t) for t in rng.choice(tokens, size=6, replace=False)]
        delta = surprise_weights(sentence, domain) - surprise_weights(sentence, scaled)
        scale_ok = scale_ok and bool(np.all(np.abs(delta) <= 1e-9))

    check(
        3,
        "surprise degeneracies (single token, equal weights, 7.3x scaling)",
        single_ok and mean_ok and scale_ok,
        f"single={single_ok} mean={mean_ok} scale={scale_ok}",
    )


def test_criterion_4_cbow_learning_sanity():
    """Loss decreases and the middle token is recovered on a triplet corpus."""
    started = time.perf_counter()
    rng = np.random.default_rng(1004)
    n_families, per_family = 5, 100
    tokens = [f"{role}{f}" for f in range(n_families) for role in "abc"]
    table = EmbeddingTable(16, {t: rng.normal(size=16) for t in tokens})
    sentences = []
    for f in range(n_families):
        sentences += [[f"a{f}", f"b{f}", f"c{f}"]] * per_family
    order = rng.permutation(len(sentences))
    instances = [
        Instance(str(i), " ".join(sentences[j]), tuple(sentences[j]), frozenset({"p"}), "train")
        for i, j in enumerate(order)
    ]
    assert len(instances) >= 500
    params = TrainingParams(window=2, epochs=10, learning_rate=0.05, seed=41)
    mapping = train_mapping(instances, table, params)
    hits = 0
    for inst in instances:
        first, middle, last = inst.tokens
        logits = context_logits(mapping, [table.get(first), table.get(last)])
        hits += mapping.vocab[int(np.argmax(logits))] == middle
    accuracy = hits / len(instances)
    loss_ok = mapping.epoch_losses[-1] < mapping.epoch_losses[0]
    elapsed = time.perf_counter() - started
    check(
        4,
        "bag-of-words trainer learns a deterministic middle token",
        loss_ok and accuracy >= 0.95 and elapsed < 30.0,
        f"accuracy {accuracy:.3f}, loss {mapping.epoch_losses[0]:.3f}->"
        f"{mapping.epoch_losses[-1]:.3f}, {elapsed:.1f}s",
    )


def test_criterion_5_planted_surprise_separation():
    """Surprise beats the plain average by >= 0.05 AUC on planted tokens."""
    started = time.perf_counter()

    def auc_for_seed(seed):
        records, vectors = planted_surprise_domain(seed)
        dim = len(next(iter(vectors.values())))
        pretrained = EmbeddingTable(dim, vectors)
        instances = records_to_instances(records)
        train, _, test = exclude_predicates(
            instances, SplitSpec(frozenset({"planted"}), "synthetic")
        )
        params = TrainingParams(window=2, epochs=10, learning_rate=0.05, seed=seed)
        domain_table = materialize_domain_table(
            train_mapping(train, pretrained, params), pretrained
        )
        labels = {inst.instance_id: inst.label for inst in test}
        result = {}
        for scheme in ("surprise", "cbow"):
            train_emb, _ = encode_instances(
                train, scheme, pretrained, domain_table=domain_table, window=2
            )
            test_emb, _ = encode_instances(
                test, scheme, pretrained, domain_table=domain_table, window=2
            )
            index = build_index(train_emb, k=5)
            scored = [
                (adjacency_score(index, e.vector), labels[e.sentence_id])
                for e in test_emb
            ]
            result[scheme] = compute_roc_auc(scored).auc
        return result

    results = [auc_for_seed(100 + i) for i in range(5)]
    surprise_median = statistics.median(r["surprise"] for r in results)
    cbow_median = statistics.median(r["cbow"] for r in results)
    elapsed = time.perf_counter() - started
    check(
        5,
        "surprise weighting separates planted-token sentences",
        surprise_median >= 0.8
        and surprise_median >= cbow_median + 0.05
        and elapsed < 120.0,
        f"surprise median {surprise_median:.3f}, cbow median {cbow_median:.3f}, "
        f"{elapsed:.1f}s",
    )


def test_criterion_6_downstream_algebra(tmp_path):
    """Oracle minus NoFilter equals the 0.200 adjacent fraction exactly."""
    rng = np.random.default_rng(1006)
    worst = 0.0
    for trial in range(5):
        test = [
            Instance(f"id{i}", "x", ("x",), frozenset({"core"}), "test", IN_DOMAIN)
            for i in range(80)
        ]
        test += [
            Instance(f"adj{i}", "y", ("y",), frozenset({"out"}), "test", DOMAIN_ADJACENT)
            for i in range(int(rng.integers(20, 60)))
        ]
        mixed = mix_test_set(test, 0.20, seed=trial)
        outcomes_path = tmp_path / f"outcomes_{trial}.jsonl"
        with outcomes_path.open("w", encoding="utf-8") as handle:
            for inst in test:
                if inst.label == IN_DOMAIN:
                    record = {"id": inst.instance_id, "correct": bool(rng.random() < 0.6)}
                    handle.write(json.dumps(record) + "\n")
        outcomes = load_parse_outcomes(outcomes_path)
        oracle = downstream_accuracy(
            mixed.instances, [i.label for i in mixed.instances], outcomes
        )
        nofilter = downstream_accuracy(
            mixed.instances, [False] * len(mixed), outcomes
        )
        worst = max(worst, abs((oracle - nofilter) - 0.200))
    check(
        6,
        "oracle minus no-filter accuracy is exactly the 20% adjacent share",
        worst <= 1e-12,
        f"max |diff| {worst:.2e}",
    )


def test_criterion_7_calibration_rate():
    """3% flag rate lands within 1/1000 on a tie-free 1000-score dev set."""
    rng = np.random.default_rng(1007)
    scores = rng.permutation(np.linspace(0.0, 1.0, 1000))
    assert len(np.unique(scores)) == len(scores)
    threshold = calibrate_threshold(scores, 0.03)
    flagged = float(flag_scores(scores, threshold).mean())
    check(
        7,
        "calibrated threshold flags 3% of a tie-free dev set",
        abs(flagged - 0.03) <= 1.0 / 1000,
        f"flagged {flagged:.4f}",
    )


def test_criterion_8_end_to_end_determinism(tmp_path):
    """Two identical runs produce byte-identical models, scores, reports."""
    config = write_demo_workspace(
        tmp_path, seed=29, domains=("demo",), n_train=70, n_test=24, dim=16,
        n_topic=16, n_pairs=6, n_planted=8,
    )

    def run_into(out_dir):
        args = ["-c", str(config), "--output-dir", str(out_dir)]
        assert main(args + ["evaluate", "--mode", "auc", "--end-to-end"]) == 0
        assert main(args + ["evaluate", "--mode", "downstream"]) == 0

    run_into(tmp_path / "out1")
    run_into(tmp_path / "out2")

    first = sorted(p for p in (tmp_path / "out1").rglob("*") if p.is_file())
    second = sorted(p for p in (tmp_path / "out2").rglob("*") if p.is_file())
    rel_first = [p.relative_to(tmp_path / "out1") for p in first]
    rel_second = [p.relative_to(tmp_path / "out2") for p in second]
    same_tree = rel_first == rel_second
    mismatched = [
        str(rel)
        for rel, a, b in zip(rel_first, first, second)
        if a.read_bytes() != b.read_bytes()
    ]
    check(
        8,
        "identical config and seed reproduce every artifact byte for byte",
        same_tree and not mismatched,
        f"{len(first)} files compared"
        + (f"; mismatches: {', '.join(mismatched)}" if mismatched else ""),
    )


def test_criterion_9_ablation_report_structure(tmp_path):
    """The ablate command emits all four schemes over eight domains."""
    started = time.perf_counter()
    domains = sorted(DEFAULT_EXCLUDED_PREDICATES)
    vectors: dict = {}
    sections = []
    rng = np.random.default_rng(1009)
    for i, name in enumerate(domains):
        records, vecs = planted_surprise_domain(
            2000 + i,
            n_topic=12,
            n_pairs=4,
            n_planted=6,
            dim=300,
            n_train=40,
            n_test=12,
            sentence_len=6,
            token_prefix=f"{name}.",
        )
        excluded = DEFAULT_EXCLUDED_PREDICATES[name]
        for record in records:
            if record["predicates"] == ["planted"]:
                record["predicates"] = [str(rng.choice(excluded))]
            else:
                record["predicates"] = ["onTopic"]
        vectors.update(vecs)
        write_corpus(tmp_path / f"{name}.jsonl", records)
        # No excluded_predicates line: the shipped per-domain defaults apply.
        sections.append(f'[domains.{name}]\ncorpus = "{name}.jsonl"\n')
    write_vectors_file(tmp_path / "vectors.txt", vectors)
    config = tmp_path / "run.toml"
    config.write_text(
        '[paths]\nvectors = "vectors.txt"\noutput_dir = "out"\n'
        "[hyperparams]\nepochs = 2\nseed = 3\n" + "\n".join(sections),
        encoding="utf-8",
    )
    assert main(["-c", str(config), "ablate", "--end-to-end"]) == 0

    tsv = tmp_path / "out" / "reports" / "ablation_auc_results.tsv"
    rows = [line.split("\t") for line in tsv.read_text().splitlines()[1:]]
    auc_rows = [(r[0], r[1], float(r[3])) for r in rows if r[2] == "auc"]
    seen = {(method, domain) for method, domain, _ in auc_rows}
    expected = {
        (m, d)
        for m in ("cbow", "frequency", "pretrained-weights", "surprise")
        for d in domains
    }
    values_ok = all(0.0 <= v <= 1.0 for _, _, v in auc_rows)
    figures_ok = (tmp_path / "out" / "reports" / "ablation_auc_summary.png").is_file()
    elapsed = time.perf_counter() - started
    check(
        9,
        "ablation report covers 4 schemes x 8 domains with AUCs in [0, 1]",
        seen == expected and values_ok and figures_ok,
        f"{len(auc_rows)} cells, {elapsed:.1f}s",
    )
