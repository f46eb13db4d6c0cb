"""Static epidemic-curve charts rendered from time-series CSVs."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .reporting import read_timeseries  # noqa: E402
from .states import PHASE_COLUMNS  # noqa: E402

STATE_COLORS = {
    "susceptible": "green",
    "exposed": "gold",
    "infectious": "red",
    "hospitalized": "purple",
    "icu": "saddlebrown",
    "quarantine": "magenta",
    "recovered": "blue",
    "dead": "gray",
}
DEFAULT_SERIES = PHASE_COLUMNS
FORMATS = ("svg", "pdf")


class PlotError(ValueError):
    pass


@dataclass(frozen=True)
class PlotSpec:
    series: tuple[str, ...] = DEFAULT_SERIES
    output: Path = Path("epidemic.svg")
    title: str | None = None

    @property
    def fmt(self) -> str:
        return Path(self.output).suffix.lstrip(".").lower()


def render_plot(csv_path, spec: PlotSpec) -> Path:
    """Draw the selected state curves; identical input gives identical bytes."""
    if not spec.series:
        raise PlotError("no series selected")
    unknown = [s for s in spec.series if s not in STATE_COLORS]
    if unknown:
        raise PlotError(f"unknown series: {', '.join(unknown)}")
    if spec.fmt not in FORMATS:
        raise PlotError(f"unsupported image format {spec.fmt!r}; use one of {FORMATS}")
    data = read_timeseries(csv_path)
    if len(data["day"]) == 0:
        raise PlotError(f"{csv_path}: no rows")

    with plt.rc_context({"svg.hashsalt": "epihumat", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(8, 4.5))
        for name in spec.series:
            ax.plot(data["day"], data[name], color=STATE_COLORS[name], label=name.capitalize(), linewidth=1.6)
        ax.set_xlabel("Day")
        ax.set_ylabel("Agents")
        ax.set_xlim(0, data["day"][-1])
        ax.set_ylim(bottom=0)
        ax.grid(alpha=0.3)
        ax.legend(loc="center right", fontsize="small")
        if spec.title:
            ax.set_title(spec.title)
        fig.tight_layout()
        out = Path(spec.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        meta = {"Date": None} if spec.fmt == "svg" else {"CreationDate": None, "ModDate": None}
        fig.savefig(out, format=spec.fmt, metadata=meta)
        plt.close(fig)
    return out
