"""Evaluation: direct detection quality (ROC/AUC) and the downstream
accuracy of a semantic parser whose domain-adjacent inputs are replaced by
an empty parse.

Parser correctness arrives as an external per-instance boolean file; no
parser runs here. The downstream rule: an instance counts as correct when
it is flagged and truly domain-adjacent, or unflagged, in-domain, and
parsed correctly. Flagging an in-domain instance is always an error, and an
unflagged domain-adjacent instance is always an error because no ordinary
parse can match the empty gold parse.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .dataset import DOMAIN_ADJACENT, IN_DOMAIN, Instance

logger = logging.getLogger(__name__)

METHOD_NO_FILTER = "nofilter"
METHOD_ORACLE = "oracle"


@dataclass(frozen=True)
class RocCurve:
    """ROC points (false-positive rate, true-positive rate) and their AUC."""

    points: tuple[tuple[float, float], ...]
    auc: float


def compute_roc_auc(scored: Sequence[tuple[float, str]]) -> RocCurve:
    """ROC curve over (score, label) pairs; domain-adjacent is the positive class.

    The curve sweeps every distinct score as a threshold, so tied scores
    produce diagonal segments and the trapezoidal area equals the pairwise
    ranking statistic with ties counted one half.
    """
    if not scored:
        raise ValueError("no scores given")
    scores = np.asarray([s for s, _ in scored], dtype=np.float64)
    labels = []
    for _, label in scored:
        if label not in (IN_DOMAIN, DOMAIN_ADJACENT):
            raise ValueError(f"unknown label {label!r}")
        labels.append(label == DOMAIN_ADJACENT)
    positive = np.asarray(labels)
    n_pos = int(positive.sum())
    n_neg = len(scored) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError(
            f"ROC needs both labels; got {n_pos} domain-adjacent and {n_neg} in-domain"
        )

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_pos = positive[order]

    points = [(0.0, 0.0)]
    true_pos = 0
    false_pos = 0
    i = 0
    n = len(scored)
    while i < n:
        j = i
        while j < n and sorted_scores[j] == sorted_scores[i]:
            true_pos += bool(sorted_pos[j])
            false_pos += not sorted_pos[j]
            j += 1
        points.append((false_pos / n_neg, true_pos / n_pos))
        i = j

    auc = 0.0
    for (fpr_prev, tpr_prev), (fpr_next, tpr_next) in zip(points, points[1:]):
        auc += (fpr_next - fpr_prev) * (tpr_next + tpr_prev) / 2.0
    return RocCurve(points=tuple(points), auc=auc)


@dataclass(frozen=True)
class ParseOutcome:
    """Whether the external parser got one test instance right."""

    instance_id: str
    parser_correct: bool


def load_parse_outcomes(path: str | Path) -> list[ParseOutcome]:
    """Read a JSON-lines parse-outcome file: one {id, correct} per line."""
    path = Path(path)
    outcomes: list[ParseOutcome] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}, line {line_no}: invalid JSON ({exc})") from None
            if "id" not in record or "correct" not in record:
                raise ValueError(f"{path}, line {line_no}: need fields 'id' and 'correct'")
            if not isinstance(record["correct"], bool):
                raise ValueError(f"{path}, line {line_no}: 'correct' must be a boolean")
            instance_id = str(record["id"])
            if instance_id in seen:
                raise ValueError(f"{path}, line {line_no}: duplicate id {instance_id!r}")
            seen.add(instance_id)
            outcomes.append(ParseOutcome(instance_id=instance_id, parser_correct=record["correct"]))
    return outcomes


def _as_flag(value) -> bool:
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if value in (IN_DOMAIN, DOMAIN_ADJACENT):
        return value == DOMAIN_ADJACENT
    raise ValueError(f"flag must be a boolean or a label, got {value!r}")


def downstream_accuracy(
    test: Sequence[Instance],
    flags: Sequence,
    outcomes: Sequence[ParseOutcome] | Mapping[str, bool],
) -> float:
    """Parser accuracy under empty-parse substitution for flagged inputs.

    ``flags`` aligns with ``test`` (booleans or labels). Outcomes are keyed
    by instance id; an unflagged in-domain instance without an outcome is a
    hard error, while outcomes for domain-adjacent instances are ignored.
    """
    if len(flags) != len(test):
        raise ValueError(f"{len(flags)} flags for {len(test)} instances")
    if isinstance(outcomes, Mapping):
        by_id = dict(outcomes)
    else:
        by_id = {}
        for outcome in outcomes:
            if outcome.instance_id in by_id:
                raise ValueError(f"duplicate parse outcome for id {outcome.instance_id!r}")
            by_id[outcome.instance_id] = outcome.parser_correct
    correct = 0
    for instance, raw_flag in zip(test, flags):
        if instance.label is None:
            raise ValueError(f"instance {instance.instance_id!r} has no label")
        flagged = _as_flag(raw_flag)
        if flagged:
            correct += instance.label == DOMAIN_ADJACENT
        elif instance.label == IN_DOMAIN:
            if instance.instance_id not in by_id:
                raise ValueError(
                    "missing parse outcome for unflagged in-domain instance "
                    f"{instance.instance_id!r}"
                )
            correct += by_id[instance.instance_id]
    return correct / len(test)


@dataclass(frozen=True)
class AucCell:
    """One (method, domain) cell of the direct evaluation."""

    method: str
    domain: str
    auc: float
    roc: RocCurve
    n_test: int
    n_skipped: int


@dataclass(frozen=True)
class DirectEvalReport:
    methods: tuple[str, ...]
    domains: tuple[str, ...]
    cells: tuple[AucCell, ...]

    def auc(self, method: str, domain: str) -> float:
        for cell in self.cells:
            if cell.method == method and cell.domain == domain:
                return cell.auc
        raise KeyError((method, domain))


@dataclass(frozen=True)
class DownstreamRow:
    method: str
    accuracy: float


@dataclass(frozen=True)
class DownstreamReport:
    methods: tuple[str, ...]  # row order: nofilter, oracle, then the methods
    domains: tuple[str, ...]
    rows: Mapping[str, tuple[DownstreamRow, ...]]  # domain -> rows
    adjacent_fraction: float
    achieved_fractions: Mapping[str, float]  # domain -> achieved mix fraction

    def accuracy(self, method: str, domain: str) -> float:
        for row in self.rows[domain]:
            if row.method == method:
                return row.accuracy
        raise KeyError((method, domain))


def run_direct_eval(
    config, end_to_end: bool = False, report_prefix: str = ""
) -> DirectEvalReport:
    """AUC of every configured method on every configured domain.

    Builds (or, without ``end_to_end``, requires) the staged artifacts, then
    scores the test split of each domain and writes the report files under
    ``<output_dir>/reports``.
    """
    from . import report as report_mod
    from . import stages

    cells = []
    for domain in config.domains:
        ctx = stages.PipelineContext(config, domain)
        for method in config.methods:
            scores = stages.ensure_scores(ctx, method, build=end_to_end)
            labels = {inst.instance_id: inst.label for inst in ctx.splits().test}
            pairs = []
            matched = set()
            for record in scores.records:
                if record.instance_id not in labels:
                    raise ValueError(
                        f"score for unknown test instance {record.instance_id!r}"
                    )
                pairs.append((record.score, labels[record.instance_id]))
                matched.add(record.instance_id)
            n_skipped = len(labels) - len(matched)
            if n_skipped:
                logger.warning(
                    "%s/%s: %d unencodable test instance(s) excluded from the ROC",
                    method,
                    domain.name,
                    n_skipped,
                )
            roc = compute_roc_auc(pairs)
            cells.append(
                AucCell(
                    method=method,
                    domain=domain.name,
                    auc=roc.auc,
                    roc=roc,
                    n_test=len(pairs),
                    n_skipped=n_skipped,
                )
            )
    result = DirectEvalReport(
        methods=tuple(config.methods),
        domains=tuple(d.name for d in config.domains),
        cells=tuple(cells),
    )
    report_mod.write_direct_eval(result, config.reports_dir(), prefix=report_prefix)
    return result


def run_downstream_eval(config, end_to_end: bool = False) -> DownstreamReport:
    """Downstream parser accuracy per method, plus NoFilter and Oracle rows.

    The test set of each domain is resampled to the configured
    domain-adjacent fraction, thresholds are calibrated on the dev split at
    the configured flag fraction, and each method's flags feed the
    empty-parse substitution rule.
    """
    from . import report as report_mod
    from . import stages

    rows: dict[str, tuple[DownstreamRow, ...]] = {}
    achieved: dict[str, float] = {}
    for domain in config.domains:
        if domain.parse_outcomes is None:
            raise ValueError(
                f"domain {domain.name!r}: downstream evaluation needs a parse_outcomes file"
            )
        ctx = stages.PipelineContext(config, domain)
        outcomes = load_parse_outcomes(domain.parse_outcomes)
        mixed = stages.mixed_test(ctx)
        achieved[domain.name] = mixed.achieved_fraction
        domain_rows = [
            DownstreamRow(
                METHOD_NO_FILTER,
                downstream_accuracy(mixed.instances, [False] * len(mixed), outcomes),
            ),
            DownstreamRow(
                METHOD_ORACLE,
                downstream_accuracy(
                    mixed.instances, [inst.label for inst in mixed.instances], outcomes
                ),
            ),
        ]
        for method in config.methods:
            scores = stages.ensure_scores(ctx, method, build=end_to_end)
            flagged_by_id = {r.instance_id: r.flagged for r in scores.records}
            # An unencodable instance has no score and is never flagged: the
            # system passes it through to the parser.
            flags = [
                flagged_by_id.get(inst.instance_id, False) for inst in mixed.instances
            ]
            domain_rows.append(
                DownstreamRow(
                    method, downstream_accuracy(mixed.instances, flags, outcomes)
                )
            )
        rows[domain.name] = tuple(domain_rows)
    result = DownstreamReport(
        methods=(METHOD_NO_FILTER, METHOD_ORACLE) + tuple(config.methods),
        domains=tuple(d.name for d in config.domains),
        rows=rows,
        adjacent_fraction=config.adjacent_fraction,
        achieved_fractions=achieved,
    )
    report_mod.write_downstream_eval(result, config.reports_dir())
    return result
