"""Report rendering: TSV records, fixed-width tables, and figures.

Reports carry no timestamps, and the figures are rendered with the Agg
backend from fully deterministic inputs, so two runs with the same config
and seed write identical bytes.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .harness import DirectEvalReport, DownstreamReport

_BAR_COLORS = ("#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee", "#aa3377")


def write_results_tsv(
    path: Path, rows: Iterable[tuple[str, str, str, float]]
) -> None:
    """Write {method, domain, metric, value} records as tab-separated lines."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        handle.write("method\tdomain\tmetric\tvalue\n")
        for method, domain, metric, value in rows:
            handle.write(f"{method}\t{domain}\t{metric}\t{float(value)!r}\n")


def render_method_table(
    values: Mapping[tuple[str, str], float],
    methods: Sequence[str],
    domains: Sequence[str],
    title: str,
) -> str:
    """Fixed-width text table: methods as rows, domains as columns."""
    method_width = max(len("method"), max((len(m) for m in methods), default=0))
    col_widths = [max(len(d), 6) for d in domains]
    lines = [title]
    header = "method".ljust(method_width)
    for domain, width in zip(domains, col_widths):
        header += "  " + domain.rjust(width)
    lines.append(header)
    lines.append("-" * len(header))
    for method in methods:
        row = method.ljust(method_width)
        for domain, width in zip(domains, col_widths):
            value = values.get((method, domain))
            cell = f"{value:.3f}" if value is not None else "-"
            row += "  " + cell.rjust(width)
        lines.append(row)
    return "\n".join(lines) + "\n"


def save_roc_figure(
    path: Path, domain: str, curves: Mapping[str, tuple[Sequence[float], Sequence[float], float]]
) -> None:
    """One ROC plot per domain with a curve per method."""
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    for i, (method, (fpr, tpr, auc)) in enumerate(sorted(curves.items())):
        ax.plot(fpr, tpr, label=f"{method} (auc={auc:.3f})", color=_BAR_COLORS[i % len(_BAR_COLORS)])
    ax.plot([0, 1], [0, 1], linestyle=":", color="grey", linewidth=1)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title(f"domain-adjacent detection: {domain}")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    ax.legend(loc="lower right", fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_grouped_bars(
    path: Path,
    values: Mapping[tuple[str, str], float],
    methods: Sequence[str],
    domains: Sequence[str],
    ylabel: str,
    title: str,
) -> None:
    """Grouped bar chart: domains along x, one bar per method."""
    fig, ax = plt.subplots(figsize=(max(6.0, 1.1 * len(domains)), 4.0))
    group_width = 0.8
    bar_width = group_width / max(len(methods), 1)
    for i, method in enumerate(methods):
        offsets = [
            j - group_width / 2 + bar_width * (i + 0.5) for j in range(len(domains))
        ]
        heights = [values.get((method, d), 0.0) for d in domains]
        ax.bar(
            offsets,
            heights,
            width=bar_width,
            label=method,
            color=_BAR_COLORS[i % len(_BAR_COLORS)],
        )
    ax.set_xticks(range(len(domains)))
    ax.set_xticklabels(domains, rotation=30, ha="right")
    ax.set_ylabel(ylabel)
    ax.set_ylim(0, 1.05)
    ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_direct_eval(
    result: DirectEvalReport, reports_dir: Path, prefix: str = ""
) -> None:
    """Persist the AUC evaluation: TSV, aligned table, ROC and bar figures."""
    reports_dir.mkdir(parents=True, exist_ok=True)
    rows = [(c.method, c.domain, "auc", c.auc) for c in result.cells]
    rows += [
        (c.method, c.domain, "n_test", float(c.n_test)) for c in result.cells
    ]
    rows += [
        (c.method, c.domain, "n_skipped", float(c.n_skipped))
        for c in result.cells
        if c.n_skipped
    ]
    write_results_tsv(reports_dir / f"{prefix}auc_results.tsv", rows)

    values = {(c.method, c.domain): c.auc for c in result.cells}
    table = render_method_table(
        values, result.methods, result.domains, "AUC for domain-adjacent identification"
    )
    (reports_dir / f"{prefix}auc_table.txt").write_text(table, encoding="utf-8")

    for domain in result.domains:
        curves = {}
        for cell in result.cells:
            if cell.domain != domain:
                continue
            fpr = [p[0] for p in cell.roc.points]
            tpr = [p[1] for p in cell.roc.points]
            curves[cell.method] = (fpr, tpr, cell.auc)
        save_roc_figure(reports_dir / f"{prefix}roc_{domain}.png", domain, curves)
    save_grouped_bars(
        reports_dir / f"{prefix}auc_summary.png",
        values,
        result.methods,
        result.domains,
        ylabel="AUC",
        title="domain-adjacent identification",
    )


def write_downstream_eval(result: DownstreamReport, reports_dir: Path) -> None:
    """Persist the downstream evaluation: TSV, aligned table, bar figure."""
    reports_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    values = {}
    for domain in result.domains:
        for row in result.rows[domain]:
            rows.append((row.method, domain, "accuracy", row.accuracy))
            values[(row.method, domain)] = row.accuracy
    for domain in result.domains:
        rows.append(("-", domain, "achieved_adjacent_fraction", result.achieved_fractions[domain]))
    write_results_tsv(reports_dir / "downstream_results.tsv", rows)

    table = render_method_table(
        values,
        result.methods,
        result.domains,
        f"parser accuracy with {result.adjacent_fraction:.0%} domain-adjacent test data",
    )
    (reports_dir / "downstream_table.txt").write_text(table, encoding="utf-8")

    save_grouped_bars(
        reports_dir / "downstream_summary.png",
        values,
        result.methods,
        result.domains,
        ylabel="accuracy",
        title="downstream parser accuracy",
    )
