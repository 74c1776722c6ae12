"""Render sweep results as figures next to the delimited output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .experiment import SweepResult


def _by_ratio(result: SweepResult) -> dict[float, list]:
    grouped: dict[float, list] = {}
    for row in result.rows:
        grouped.setdefault(row.train_ratio, []).append(row)
    for rows in grouped.values():
        rows.sort(key=lambda r: r.alpha)
    return grouped


def render_sweep_figures(result: SweepResult, out_dir, stem: str = "sweep") -> list[Path]:
    """Write the precision curve and the positive-prediction-rate curve.

    One line per train ratio, mixing weight on the x axis. Returns the
    created file paths.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    grouped = _by_ratio(result)
    created = []

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for ratio in sorted(grouped):
        rows = grouped[ratio]
        ax.plot(
            [r.alpha for r in rows],
            [r.precision for r in rows],
            marker="o",
            label=f"r = {ratio:g}",
        )
    ax.set_xlabel("social mixing weight")
    ax.set_ylabel("precision on held-out users")
    ax.set_xlim(-0.02, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    path = out_dir / f"{stem}_precision.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    created.append(path)

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for ratio in sorted(grouped):
        rows = grouped[ratio]
        ax.plot(
            [r.alpha for r in rows],
            [r.positive_predictions / r.test_size if r.test_size else 0.0 for r in rows],
            marker="s",
            label=f"r = {ratio:g}",
        )
    ax.set_xlabel("social mixing weight")
    ax.set_ylabel("positive prediction rate")
    ax.set_xlim(-0.02, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    path = out_dir / f"{stem}_positive_rate.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    created.append(path)

    return created
