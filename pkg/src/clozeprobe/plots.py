"""Static SVG result displays plus the supervenn-style export.

SVGs are kept byte-reproducible by pinning matplotlib's hash salt to the
run's config hash and dropping the creation date from the metadata.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("svg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

INFO_LEVELS = ("simple", "domain", "range", "combined")


def _configure(config_hash: str) -> None:
    matplotlib.rcParams["svg.hashsalt"] = config_hash or "clozeprobe"


def _save(fig, path: Path, head: dict | None = None) -> None:
    # Date dropped and hashsalt pinned for byte-reproducibility; provenance
    # rides along as SVG document metadata.
    metadata = {"Date": None}
    if head:
        metadata["Title"] = " ".join(f"{k}={v}" for k, v in sorted(head.items()))
    fig.savefig(path, format="svg", metadata=metadata)
    plt.close(fig)


def bounds_bar_svg(bounds_payload: dict, path: str | Path) -> Path:
    """Grouped bars per (syntax, strategy): lower bound, observed combined
    performance, upper bound. No clamping of the observed bar."""
    path = Path(path)
    _configure(bounds_payload.get("provenance", {}).get("config_hash", ""))

    syntaxes = bounds_payload["syntaxes"]
    labels, lowers, observeds, uppers = [], [], [], []
    for syntax, per_strategy in syntaxes.items():
        for strategy, cell in per_strategy.items():
            labels.append(f"{syntax}\n{strategy}")
            lowers.append(cell["lower_p_at_1"])
            observeds.append(cell["observed_p_at_1"])
            uppers.append(cell["upper_p_at_1"])

    x = range(len(labels))
    width = 0.27
    fig, ax = plt.subplots(figsize=(1.8 + 1.4 * len(labels), 4.0))
    ax.bar([i - width for i in x], lowers, width, label="lower (confidence pick)", color="#bbbbbb")
    ax.bar(list(x), observeds, width, label="observed (combined prompt)", color="#7b4fa6")
    ax.bar([i + width for i in x], uppers, width, label="upper (gold-prob pick)", color="#222222")
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels)
    ax.set_ylabel("P@1")
    ax.set_ylim(0, 1)
    ax.set_title("Combined-information performance vs. single-information interval")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    _save(fig, path, bounds_payload.get("provenance"))
    return path


def entropy_grid_svg(entropy_payload: dict, path: str | Path) -> Path:
    """Line grid, one subplot per (syntax, strategy), mean entropy of the
    known subset against the information level."""
    path = Path(path)
    _configure(entropy_payload.get("provenance", {}).get("config_hash", ""))

    grid = entropy_payload.get("grid", {})
    syntaxes = list(grid.keys())
    strategies = sorted({s for row in grid.values() for s in row})
    n_rows = max(len(strategies), 1)
    n_cols = max(len(syntaxes), 1)
    fig, axes = plt.subplots(
        n_rows, n_cols, figsize=(3.2 * n_cols, 2.6 * n_rows), squeeze=False, sharey=True
    )
    for col, syntax in enumerate(syntaxes):
        for row, strategy in enumerate(strategies):
            ax = axes[row][col]
            series = grid.get(syntax, {}).get(strategy)
            if series:
                values = [series[level] for level in INFO_LEVELS]
                ax.plot(range(len(INFO_LEVELS)), values, marker="o", color="#336699")
            ax.set_xticks(range(len(INFO_LEVELS)))
            ax.set_xticklabels(INFO_LEVELS, fontsize=7)
            ax.set_title(f"{syntax} / {strategy}", fontsize=9)
            if col == 0:
                ax.set_ylabel("mean entropy (bits)", fontsize=8)
    known = entropy_payload.get("known_size", 0)
    fig.suptitle(f"Response entropy on the known subset (n={known})", fontsize=10)
    fig.tight_layout(rect=(0, 0, 1, 0.94))
    _save(fig, path, entropy_payload.get("provenance"))
    return path


def partition_matrix_csv(partition_payload: dict, path: str | Path) -> Path:
    """Flatten partition cells into a matrix consumable by external
    multi-set (supervenn-style) tooling: one row per cell and
    (syntax, strategy), one 0/1 column per set, plus the cell size."""
    path = Path(path)
    set_names: list[str] = []
    rows = []
    for syntax, per_strategy in partition_payload["syntaxes"].items():
        for strategy, partition in per_strategy.items():
            for name in partition["set_names"]:
                if name not in set_names:
                    set_names.append(name)
            for cell in partition["cells"]:
                rows.append((syntax, strategy, set(cell["membership"]), cell["size"]))

    with open(path, "w", newline="", encoding="utf-8") as fh:
        head = partition_payload.get("provenance", {})
        for key, value in head.items():
            fh.write(f"# {key}={value}\n")
        writer = csv.writer(fh)
        writer.writerow(["syntax", "strategy"] + set_names + ["size"])
        for syntax, strategy, membership, size in rows:
            writer.writerow(
                [syntax, strategy] + [int(name in membership) for name in set_names] + [size]
            )
    return path


def run_plot(out_dir: str | Path) -> dict[str, Path]:
    """Render every analysis artifact found under ``out_dir/analysis``."""
    out_dir = Path(out_dir)
    analysis_dir = out_dir / "analysis"
    plots_dir = out_dir / "plots"
    plots_dir.mkdir(parents=True, exist_ok=True)
    from .errors import StageMismatch

    artifacts: dict[str, Path] = {}
    bounds_file = analysis_dir / "bounds.json"
    entropy_file = analysis_dir / "entropy.json"
    partition_file = analysis_dir / "partition.json"
    if not (bounds_file.exists() and entropy_file.exists() and partition_file.exists()):
        raise StageMismatch(f"analysis artifacts missing under {analysis_dir}; run 'analyze' first")

    artifacts["bounds_svg"] = bounds_bar_svg(
        json.loads(bounds_file.read_text(encoding="utf-8")), plots_dir / "bounds.svg"
    )
    artifacts["entropy_svg"] = entropy_grid_svg(
        json.loads(entropy_file.read_text(encoding="utf-8")), plots_dir / "entropy.svg"
    )
    artifacts["partition_matrix"] = partition_matrix_csv(
        json.loads(partition_file.read_text(encoding="utf-8")), plots_dir / "partition_matrix.csv"
    )
    return artifacts
