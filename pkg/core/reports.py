"""Plain-text tables in the "mean (std)" layout of the published results."""

from __future__ import annotations

from typing import Sequence

from core.evaluation import CvTable, MispeReport, RateProbe


def _cell(mean: float, std: float) -> str:
    return f"{mean:.3f} ({std:.3f})"


def _align(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(h), *(len(r[c]) for r in rows)) if rows else len(h) for c, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(value.ljust(w) for value, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def format_table(reports: Sequence[MispeReport]) -> str:
    header = ["setting", "method", "MISPE", "reps", "params"]
    rows = [
        [
            r.label,
            r.method,
            _cell(r.mean, r.std),
            str(len(r.per_replicate)),
            "" if r.n_params is None else str(r.n_params),
        ]
        for r in reports
    ]
    return _align(header, rows)


def format_cv_table(table: CvTable) -> str:
    header = ["", "config", f"{table.k}-fold CV", "params"]
    rows = []
    for i, row in enumerate(table.rows):
        settings = row.config.to_dict()
        if "width" in settings:
            label = f"W={settings['width']} L={settings['depth']} alpha={settings['alpha']:g}"
        else:
            label = f"K={settings['K']} lambda={settings['lam']:g}"
        rows.append(["*" if i == table.selected else "", label, _cell(row.mean, row.std), str(row.n_params)])
    return _align(header, rows)


def format_rate(result: RateProbe) -> str:
    header = ["n", "mean MISPE", "excess", "used"]
    rows = [
        [str(n), f"{m:.4f}", f"{m - result.noise_floor:.4f}", "yes" if n in result.used else "no"]
        for n, m in zip(result.n_values, result.means)
    ]
    return _align(header, rows) + f"slope of log(excess) on log(n): {result.slope:.3f}\n"
