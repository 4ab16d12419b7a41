"""File-based pipeline stages behind the CLI subcommands.

Every stage reads its inputs from the output directory of the previous one,
so a staged invocation (train-mapping, encode, score, evaluate) and an
``--end-to-end`` evaluate produce identical bytes: floats cross stage
boundaries as shortest exact decimals and round-trip without loss.

Artifact layout under ``output_dir``::

    <domain>/mapping.model
    <domain>/domain_vectors.txt              (optional export)
    <domain>/encoded/<scheme>_<split>.jsonl
    <domain>/encoded/<scheme>_<split>.skipped.jsonl
    <domain>/scores/<scheme>.jsonl
    reports/...
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import dataset as ds
from .config import DomainConfig, RunConfig, derive_seed
from .detector import Threshold, adjacency_score, build_index, calibrate_threshold
from .embeddings import EmbeddingTable, load_embeddings, save_embeddings
from .encoders import (
    SCHEME_FREQUENCY,
    SCHEME_SURPRISE,
    SCHEMES,
    IdfTable,
    build_idf,
    encode_instances,
)
from .mapping import (
    DomainMapping,
    TrainingParams,
    load_mapping,
    materialize_domain_table,
    save_mapping,
    train_mapping,
)

logger = logging.getLogger(__name__)

_TABLE_CACHE: dict[Path, EmbeddingTable] = {}


class MissingArtifactError(RuntimeError):
    """A staged artifact is required but has not been built."""


@dataclass(frozen=True)
class DomainSplits:
    train: list[ds.Instance]
    dev: list[ds.Instance]
    test: list[ds.Instance]
    dev_carved: bool


@dataclass(frozen=True)
class EncodedRecord:
    instance_id: str
    scheme: str
    vector: np.ndarray
    weights: np.ndarray
    fallback: bool


@dataclass(frozen=True)
class ScoreRecord:
    instance_id: str
    score: float
    flagged: bool


@dataclass(frozen=True)
class ScoresFile:
    domain: str
    scheme: str
    k: int
    threshold: Threshold
    records: tuple[ScoreRecord, ...]


def load_pretrained(config: RunConfig) -> EmbeddingTable:
    path = config.vectors.resolve()
    if path not in _TABLE_CACHE:
        _TABLE_CACHE[path] = load_embeddings(path, config.expected_dimension)
    return _TABLE_CACHE[path]


class PipelineContext:
    """Per-domain lazy cache of splits and trained artifacts."""

    def __init__(self, config: RunConfig, domain: DomainConfig):
        self.config = config
        self.domain = domain
        self._splits: DomainSplits | None = None
        self._mapping: DomainMapping | None = None
        self._domain_table: EmbeddingTable | None = None
        self._idf: IdfTable | None = None

    # ---- paths ----------------------------------------------------------
    def domain_dir(self) -> Path:
        return self.config.output_dir / self.domain.name

    def model_path(self) -> Path:
        return self.domain_dir() / "mapping.model"

    def domain_table_path(self) -> Path:
        return self.domain_dir() / "domain_vectors.txt"

    def encoded_path(self, scheme: str, split: str) -> Path:
        return self.domain_dir() / "encoded" / f"{scheme}_{split}.jsonl"

    def skipped_path(self, scheme: str, split: str) -> Path:
        return self.domain_dir() / "encoded" / f"{scheme}_{split}.skipped.jsonl"

    def scores_path(self, scheme: str) -> Path:
        return self.domain_dir() / "scores" / f"{scheme}.jsonl"

    # ---- cached inputs ---------------------------------------------------
    def pretrained(self) -> EmbeddingTable:
        return load_pretrained(self.config)

    def splits(self) -> DomainSplits:
        if self._splits is None:
            corpus = ds.load_corpus(self.domain.corpus)
            spec = ds.SplitSpec(
                excluded_predicates=frozenset(self.domain.excluded_predicates),
                domain_name=self.domain.name,
            )
            train, dev, test = ds.exclude_predicates(corpus, spec)
            carved = False
            if not dev:
                train, dev = ds.carve_dev(
                    train,
                    self.config.dev_fraction,
                    derive_seed(self.config.seed, f"carve:{self.domain.name}"),
                )
                carved = True
                logger.info(
                    "domain %s: carved %d dev instance(s) out of train",
                    self.domain.name,
                    len(dev),
                )
            self._splits = DomainSplits(train=train, dev=dev, test=test, dev_carved=carved)
        return self._splits

    def mapping(self, build: bool = False) -> DomainMapping:
        if self._mapping is None:
            path = self.model_path()
            if not path.is_file():
                if not build:
                    raise MissingArtifactError(
                        f"domain {self.domain.name!r}: mapping model not found at {path}; "
                        "run train-mapping first or pass --end-to-end"
                    )
                stage_train_mapping(self)
            self._mapping = load_mapping(path)
        return self._mapping

    def domain_table(self, build: bool = False) -> EmbeddingTable:
        if self._domain_table is None:
            self._domain_table = materialize_domain_table(
                self.mapping(build=build), self.pretrained()
            )
        return self._domain_table

    def idf(self) -> IdfTable:
        if self._idf is None:
            self._idf = build_idf(self.splits().train)
        return self._idf


# ---- stages ---------------------------------------------------------------


def stage_train_mapping(ctx: PipelineContext, export_table: bool = False) -> Path:
    """Fit and save the domain mapping for one domain; returns the model path."""
    config = ctx.config
    params = TrainingParams(
        window=config.training_window,
        epochs=config.epochs,
        learning_rate=config.learning_rate,
        seed=derive_seed(config.seed, f"mapping:{ctx.domain.name}"),
        domain_dim=config.domain_dim,
    )
    mapping = train_mapping(ctx.splits().train, ctx.pretrained(), params)
    path = ctx.model_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    save_mapping(mapping, path)
    for epoch, loss in enumerate(mapping.epoch_losses, start=1):
        logger.info("domain %s: epoch %d mean loss %.6f", ctx.domain.name, epoch, loss)
    if export_table:
        table = materialize_domain_table(mapping, ctx.pretrained())
        save_embeddings(table, ctx.domain_table_path())
    ctx._mapping = None  # force rereading the file so staged == end-to-end
    ctx._domain_table = None
    return path


def stage_encode(
    ctx: PipelineContext,
    scheme: str,
    splits: Sequence[str] = ds.SPLITS,
    build: bool = False,
) -> dict[str, Path]:
    """Encode the requested splits under ``scheme``; returns split -> path."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    domain_table = ctx.domain_table(build=build) if scheme == SCHEME_SURPRISE else None
    idf = ctx.idf() if scheme == SCHEME_FREQUENCY else None
    data = ctx.splits()
    paths: dict[str, Path] = {}
    for split in splits:
        instances = getattr(data, split)
        embeddings, skipped = encode_instances(
            instances,
            scheme,
            ctx.pretrained(),
            domain_table=domain_table,
            idf=idf,
            window=ctx.config.surprise_window,
        )
        path = ctx.encoded_path(scheme, split)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as handle:
            for emb in embeddings:
                record = {
                    "id": emb.sentence_id,
                    "scheme": emb.scheme,
                    "vector": [float(x) for x in emb.vector],
                    "weights": [float(w) for w in emb.weights],
                    "fallback": emb.fallback,
                }
                handle.write(json.dumps(record) + "\n")
        skipped_file = ctx.skipped_path(scheme, split)
        with skipped_file.open("w", encoding="utf-8") as handle:
            for instance in skipped:
                handle.write(
                    json.dumps(
                        {"id": instance.instance_id, "reason": "no token has a known vector"}
                    )
                    + "\n"
                )
        if skipped:
            logger.warning(
                "domain %s: %d %s sentence(s) not encodable under %s (see %s)",
                ctx.domain.name,
                len(skipped),
                split,
                scheme,
                skipped_file,
            )
        paths[split] = path
    return paths


def read_encoded(path: Path) -> list[EncodedRecord]:
    records = []
    with path.open(encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            raw = json.loads(line)
            records.append(
                EncodedRecord(
                    instance_id=raw["id"],
                    scheme=raw["scheme"],
                    vector=np.asarray(raw["vector"], dtype=np.float64),
                    weights=np.asarray(raw["weights"], dtype=np.float64),
                    fallback=raw["fallback"],
                )
            )
    return records


def _encoded_records(
    ctx: PipelineContext, scheme: str, split: str, build: bool
) -> list[EncodedRecord]:
    path = ctx.encoded_path(scheme, split)
    if not path.is_file():
        if not build:
            raise MissingArtifactError(
                f"domain {ctx.domain.name!r}: encoded {split} split not found at {path}; "
                "run encode first or pass --end-to-end"
            )
        stage_encode(ctx, scheme, splits=(split,), build=True)
    return read_encoded(path)


def stage_score(ctx: PipelineContext, scheme: str, build: bool = False) -> Path:
    """Score the test split against the train index; returns the scores path.

    The threshold comes from the dev split at the configured flag fraction;
    the file carries it as metadata so downstream stages reuse it verbatim.
    """
    train = _encoded_records(ctx, scheme, ds.SPLIT_TRAIN, build)
    dev = _encoded_records(ctx, scheme, ds.SPLIT_DEV, build)
    test = _encoded_records(ctx, scheme, ds.SPLIT_TEST, build)
    if not train:
        raise ValueError(f"domain {ctx.domain.name!r}: no encoded train sentences")
    if not dev:
        raise ValueError(f"domain {ctx.domain.name!r}: no encoded dev sentences")
    k = min(ctx.config.k, len(train))
    if k < ctx.config.k:
        logger.warning(
            "domain %s: k reduced from %d to %d (train size)",
            ctx.domain.name,
            ctx.config.k,
            k,
        )
    index = build_index([r.vector for r in train], k)
    dev_scores = [adjacency_score(index, r.vector) for r in dev]
    threshold = calibrate_threshold(
        dev_scores,
        ctx.config.flag_fraction,
        source=f"{ctx.domain.name}:dev",
    )
    path = ctx.scores_path(scheme)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        meta = {
            "meta": {
                "domain": ctx.domain.name,
                "scheme": scheme,
                "k": k,
                "n_train": len(train),
                "n_dev": len(dev),
                "threshold": {
                    "value": threshold.value,
                    "calibration_fraction": threshold.calibration_fraction,
                    "source": threshold.source,
                },
            }
        }
        handle.write(json.dumps(meta) + "\n")
        for record in test:
            score = adjacency_score(index, record.vector)
            row = {
                "id": record.instance_id,
                "score": score,
                "flagged": bool(score > threshold.value),
            }
            handle.write(json.dumps(row) + "\n")
    return path


def read_scores(path: Path) -> ScoresFile:
    with path.open(encoding="utf-8") as handle:
        lines = [line for line in handle if line.strip()]
    if not lines:
        raise ValueError(f"{path}: empty scores file")
    meta = json.loads(lines[0]).get("meta")
    if meta is None:
        raise ValueError(f"{path}: first line must carry the scores metadata")
    threshold = Threshold(
        value=meta["threshold"]["value"],
        calibration_fraction=meta["threshold"]["calibration_fraction"],
        source=meta["threshold"]["source"],
    )
    records = []
    for line in lines[1:]:
        raw = json.loads(line)
        records.append(
            ScoreRecord(
                instance_id=raw["id"], score=raw["score"], flagged=raw["flagged"]
            )
        )
    return ScoresFile(
        domain=meta["domain"],
        scheme=meta["scheme"],
        k=meta["k"],
        threshold=threshold,
        records=tuple(records),
    )


def ensure_scores(ctx: PipelineContext, scheme: str, build: bool = False) -> ScoresFile:
    """Read the scores artifact for ``scheme``, building it when allowed."""
    path = ctx.scores_path(scheme)
    if not path.is_file():
        if not build:
            raise MissingArtifactError(
                f"domain {ctx.domain.name!r}: scores for {scheme!r} not found at {path}; "
                "run score first or pass --end-to-end"
            )
        stage_score(ctx, scheme, build=True)
    return read_scores(path)


def mixed_test(ctx: PipelineContext) -> ds.MixedTestSet:
    """The seeded resampled test set used by the downstream evaluation."""
    return ds.mix_test_set(
        ctx.splits().test,
        ctx.config.adjacent_fraction,
        derive_seed(ctx.config.seed, f"mix:{ctx.domain.name}"),
    )
