"""Rate-distortion report rendering: one PNG per report next to the CSV."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def render_rd_figure(rows, path, title: str = "Rate-distortion") -> None:
    """One PSNR-vs-bpv curve per level, finite-PSNR points only."""
    by_level: dict = {}
    for r in rows:
        by_level.setdefault(r["level"], []).append(r)

    fig, ax = plt.subplots(figsize=(7, 5))
    for level in sorted(by_level, key=lambda x: (x is None, x)):
        pts = [
            (r["bpv"], r["psnr_db"])
            for r in by_level[level]
            if r["bpv"] is not None
            and not math.isinf(r["bpv"])
            and math.isfinite(r["psnr_db"])
        ]
        if not pts:
            continue
        pts.sort()
        ax.plot(
            [p[0] for p in pts],
            [p[1] for p in pts],
            marker="o",
            label=f"level {level}",
        )
    ax.set_xlabel("bits per vertex")
    ax.set_ylabel("PSNR (dB)")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    if by_level:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
