"""Run configuration: one TOML file, flag overrides, one master seed.

Schema (see docs/formats.md for the full reference)::

    [paths]
    vectors = "vectors.txt"        # pre-trained word vectors
    output_dir = "out"

    [hyperparams]
    surprise_window = 2            # context window for surprise weights
    training_window = 2            # context window for mapping training
    epochs = 10
    learning_rate = 0.05
    domain_dim = 0                 # 0 means: use the pre-trained dimension
    k = 5
    flag_fraction = 0.03
    adjacent_fraction = 0.20
    dev_fraction = 0.20
    seed = 13

    methods = ["surprise", "cbow", "frequency", "pretrained-weights"]

    [domains.housing]
    corpus = "housing.jsonl"
    excluded_predicates = ["size"]         # defaults ship for known domains
    parse_outcomes = "housing_out.jsonl"   # downstream evaluation only

All stage randomness is derived from the single ``seed`` by hashing it with
a stage label, so runs are reproducible end to end and stages stay
independent of one another.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .dataset import DEFAULT_EXCLUDED_PREDICATES
from .encoders import SCHEMES

CONFIG_ENV_VAR = "PARASCOPE_CONFIG"


class ConfigError(Exception):
    """Invalid or incomplete run configuration."""


def derive_seed(master: int, label: str) -> int:
    """Deterministic per-stage seed fanned out from the master seed."""
    digest = hashlib.sha256(f"{master}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class DomainConfig:
    name: str
    corpus: Path
    excluded_predicates: tuple[str, ...]
    parse_outcomes: Path | None = None


@dataclass(frozen=True)
class RunConfig:
    vectors: Path
    output_dir: Path
    domains: tuple[DomainConfig, ...]
    methods: tuple[str, ...] = SCHEMES
    surprise_window: int = 2
    training_window: int = 2
    epochs: int = 10
    learning_rate: float = 0.05
    domain_dim: int | None = None
    k: int = 5
    flag_fraction: float = 0.03
    adjacent_fraction: float = 0.20
    dev_fraction: float = 0.20
    seed: int = 13
    expected_dimension: int | None = None
    jobs: int = 1

    def __post_init__(self) -> None:
        for name in ("surprise_window", "training_window", "epochs", "k", "jobs"):
            if getattr(self, name) < (0 if name == "epochs" else 1):
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        for name in ("flag_fraction", "adjacent_fraction", "dev_fraction"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ConfigError(f"{name} must be in (0, 1), got {value}")
        if not self.domains:
            raise ConfigError("at least one domain must be configured")
        if not self.methods:
            raise ConfigError("at least one method must be selected")
        for method in self.methods:
            if method not in SCHEMES:
                raise ConfigError(
                    f"unknown method {method!r}; choose from {', '.join(SCHEMES)}"
                )
        names = [d.name for d in self.domains]
        if len(set(names)) != len(names):
            raise ConfigError("domain names must be unique")

    def domain(self, name: str) -> DomainConfig:
        for domain in self.domains:
            if domain.name == name:
                return domain
        raise ConfigError(f"unknown domain {name!r}")

    def reports_dir(self) -> Path:
        return self.output_dir / "reports"


def _as_path(base: Path, value) -> Path:
    path = Path(value)
    return path if path.is_absolute() else base / path


def load_config(
    path: str | Path | None,
    overrides: Mapping | None = None,
    require_outcomes: bool = False,
) -> RunConfig:
    """Load, override, and validate a run configuration.

    ``path`` falls back to the PARASCOPE_CONFIG environment variable.
    ``overrides`` (typically parsed CLI flags) win over file values.
    Referenced input paths are checked up front so no stage starts against
    missing files.
    """
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR)
    if path is None:
        raise ConfigError(
            f"no config file given and {CONFIG_ENV_VAR} is not set"
        )
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    with path.open("rb") as handle:
        try:
            raw = tomllib.load(handle)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None

    base = path.parent
    paths_section = raw.get("paths", {})
    hyper = raw.get("hyperparams", {})
    overrides = dict(overrides or {})

    def pick(key, section, default):
        if key in overrides and overrides[key] is not None:
            return overrides[key]
        return section.get(key, default)

    vectors = pick("vectors", paths_section, None)
    if vectors is None:
        raise ConfigError("paths.vectors is required")
    output_dir = pick("output_dir", paths_section, None)
    if output_dir is None:
        raise ConfigError("paths.output_dir is required")

    domain_section = raw.get("domains", {})
    if not isinstance(domain_section, dict) or not domain_section:
        raise ConfigError("at least one [domains.<name>] section is required")
    selected = overrides.get("domains")
    domains = []
    for name, body in domain_section.items():
        if selected and name not in selected:
            continue
        if "corpus" not in body:
            raise ConfigError(f"domains.{name}: 'corpus' is required")
        excluded = body.get("excluded_predicates")
        if excluded is None:
            excluded = DEFAULT_EXCLUDED_PREDICATES.get(name.lower())
            if excluded is None:
                raise ConfigError(
                    f"domains.{name}: 'excluded_predicates' is required "
                    "(no shipped default for this domain name)"
                )
        if not excluded:
            raise ConfigError(f"domains.{name}: excluded_predicates must be non-empty")
        outcomes = body.get("parse_outcomes")
        domains.append(
            DomainConfig(
                name=name,
                corpus=_as_path(base, body["corpus"]),
                excluded_predicates=tuple(excluded),
                parse_outcomes=_as_path(base, outcomes) if outcomes else None,
            )
        )
    if selected:
        missing = set(selected) - {d.name for d in domains}
        if missing:
            raise ConfigError(f"unknown domain(s) selected: {', '.join(sorted(missing))}")

    domain_dim = pick("domain_dim", hyper, None)
    if domain_dim in (0, None):
        domain_dim = None
    expected_dimension = pick("expected_dimension", hyper, None)
    if expected_dimension in (0, None):
        expected_dimension = None

    try:
        config = RunConfig(
            vectors=_as_path(base, vectors),
            output_dir=_as_path(base, output_dir),
            domains=tuple(domains),
            methods=tuple(pick("methods", raw, list(SCHEMES))),
            surprise_window=int(pick("surprise_window", hyper, 2)),
            training_window=int(pick("training_window", hyper, 2)),
            epochs=int(pick("epochs", hyper, 10)),
            learning_rate=float(pick("learning_rate", hyper, 0.05)),
            domain_dim=domain_dim,
            k=int(pick("k", hyper, 5)),
            flag_fraction=float(pick("flag_fraction", hyper, 0.03)),
            adjacent_fraction=float(pick("adjacent_fraction", hyper, 0.20)),
            dev_fraction=float(pick("dev_fraction", hyper, 0.20)),
            seed=int(pick("seed", hyper, 13)),
            expected_dimension=expected_dimension,
            jobs=int(overrides.get("jobs") or 1),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None

    validate_paths(config, require_outcomes=require_outcomes)
    return config


def validate_paths(config: RunConfig, require_outcomes: bool = False) -> None:
    """Fail fast when any referenced input file is missing."""
    missing = []
    if not config.vectors.is_file():
        missing.append(f"vectors file {config.vectors}")
    for domain in config.domains:
        if not domain.corpus.is_file():
            missing.append(f"corpus for domain {domain.name!r}: {domain.corpus}")
        if require_outcomes:
            if domain.parse_outcomes is None:
                missing.append(f"parse_outcomes entry for domain {domain.name!r}")
            elif not domain.parse_outcomes.is_file():
                missing.append(
                    f"parse outcomes for domain {domain.name!r}: {domain.parse_outcomes}"
                )
    if missing:
        raise ConfigError("missing inputs: " + "; ".join(missing))


def restrict_methods(config: RunConfig, methods: Sequence[str]) -> RunConfig:
    """A copy of ``config`` narrowed to the given method list."""
    return replace(config, methods=tuple(methods))
