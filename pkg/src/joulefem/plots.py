"""Log-log convergence figures rendered to SVG.

Output is deterministic: a fixed hash salt for element ids, no embedded
timestamps, so identical inputs give byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_RC = {
    "svg.hashsalt": "joulefem",
    "svg.fonttype": "none",  # keep labels as text elements (searchable, no font paths)
    "figure.figsize": (6.0, 4.5),
    "font.size": 10,
}


def fitted_slope(hs, errors) -> float:
    """Least-squares slope of log(error) against log(h)."""
    return float(np.polyfit(np.log(np.asarray(hs, dtype=float)),
                            np.log(np.asarray(errors, dtype=float)), 1)[0])


def write_svg_plot(series: dict, path, title: str | None = None) -> None:
    """Render one log-log curve per entry of series to an SVG file.

    series maps a label to an (hs, errors) pair; all data must be positive.
    Reference guides with slopes 1 and 2 are drawn, and each legend entry
    carries the fitted slope to two decimals.  Raises ValueError (and writes
    nothing) for empty or nonpositive input.
    """
    if not series:
        raise ValueError("no series to plot")
    cleaned = {}
    for label, (hs, errors) in series.items():
        hs = np.asarray(hs, dtype=float)
        errors = np.asarray(errors, dtype=float)
        if hs.size == 0 or hs.size != errors.size:
            raise ValueError(f"series {label!r} needs matching nonempty h/error lists")
        if np.any(hs <= 0.0) or np.any(errors <= 0.0):
            raise ValueError(f"series {label!r} must be strictly positive for log axes")
        cleaned[label] = (hs, errors)

    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        all_h = np.concatenate([hs for hs, _ in cleaned.values()])
        all_e = np.concatenate([es for _, es in cleaned.values()])
        for label, (hs, errors) in cleaned.items():
            slope = fitted_slope(hs, errors) if hs.size >= 2 else float("nan")
            ax.loglog(hs, errors, marker="o", label=f"{label} (slope {slope:.2f})")

        h_lo, h_hi = all_h.min(), all_h.max()
        anchor = all_e.min()
        guide_h = np.array([h_lo, h_hi])
        for p, style in ((1, ":"), (2, "--")):
            ax.loglog(guide_h, anchor * (guide_h / h_hi) ** p, style,
                      color="gray", linewidth=0.8, label=f"h^{p}")
        ax.set_xlabel("h")
        ax.set_ylabel("max-in-time error")
        if title:
            ax.set_title(title)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
