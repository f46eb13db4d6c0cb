"""Time-series CSV files and the run manifest."""

from __future__ import annotations

import csv
import json
import platform
from pathlib import Path

import numpy as np

from .config import SCHEMA_VERSION, ScenarioConfig, config_hash
from .runner import METRIC_COLUMNS, RunResult
from .states import PHASE_COLUMNS

CSV_SCHEMA_VERSION = 1
STATE_SLICE = slice(1, 1 + len(PHASE_COLUMNS))
_INT_COLUMNS = set(METRIC_COLUMNS[:-1])


class CsvSchemaError(ValueError):
    pass


def _check_rows(rows: np.ndarray, size: int, exact: bool) -> None:
    if rows.ndim != 2 or rows.shape[1] != len(METRIC_COLUMNS):
        raise CsvSchemaError(f"expected {len(METRIC_COLUMNS)} columns, got shape {rows.shape}")
    if np.any(rows < 0):
        raise CsvSchemaError("negative value in time series")
    totals = rows[:, STATE_SLICE].sum(axis=1)
    ok = np.all(totals == size) if exact else np.allclose(totals, size, rtol=0, atol=1e-6)
    if not ok:
        raise AssertionError(f"state columns do not sum to population size {size}")


def write_timeseries(path, rows: np.ndarray, size: int, mean: bool = False) -> Path:
    """Write one replicate (integers) or a replicate mean (4 decimals)."""
    rows = np.asarray(rows, dtype=float)
    _check_rows(rows, size, exact=not mean)
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for r in rows:
            out = []
            for name, x in zip(METRIC_COLUMNS, r):
                if name == "day":
                    out.append(str(int(x)))
                elif name in _INT_COLUMNS and not mean:
                    out.append(str(int(x)))
                else:
                    out.append(f"{x:.4f}" if mean else f"{x:.6f}")
            w.writerow(out)
    return path


def read_timeseries(path) -> dict[str, np.ndarray]:
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvSchemaError(f"{path}: empty file") from None
        if tuple(header) != METRIC_COLUMNS:
            raise CsvSchemaError(f"{path}: unexpected header {header}")
        data = [[float(x) for x in row] for row in reader if row]
    arr = np.array(data, dtype=float).reshape(-1, len(METRIC_COLUMNS))
    return {name: arr[:, j] for j, name in enumerate(METRIC_COLUMNS)}


def _versions() -> dict[str, str]:
    from importlib import metadata

    def version(dist):
        try:
            return metadata.version(dist)
        except metadata.PackageNotFoundError:
            return "unknown"

    return {"python": platform.python_version(), "numpy": np.__version__, "package": version("artifact")}


def write_run(result: RunResult, config: ScenarioConfig, out_dir, root_seed: int) -> dict:
    """Per-replicate CSVs, the mean CSV and ``manifest.json`` in ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for i, rows in enumerate(result.replicates):
        name = f"replicate_{i:03d}.csv"
        write_timeseries(out / name, rows, result.population_size)
        files.append(name)
    write_timeseries(out / "mean.csv", result.mean, result.population_size, mean=True)
    files.append("mean.csv")
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "csv_schema_version": CSV_SCHEMA_VERSION,
        "csv_columns": list(METRIC_COLUMNS),
        "scenario": config.name,
        "config_hash": config_hash(config),
        "root_seed": root_seed,
        "seeds": result.seeds,
        "population_size": result.population_size,
        "versions": _versions(),
        "files": files,
        "config": config.model_dump(mode="json"),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest


def summarize(result: RunResult, initial_infected: int) -> dict[str, float]:
    """Headline numbers over the replicate mean."""
    n = result.population_size
    prevalence = sum(result.column(c) for c in ("infectious", "hospitalized", "icu", "quarantine"))
    mean_prev = prevalence.mean(axis=0)
    cumulative = result.column("new_infections").sum(axis=1) + initial_infected
    final = result.column("recovered")[:, -1] + result.column("dead")[:, -1]
    return {
        "peak_prevalence": float(mean_prev.max() / n),
        "peak_day": int(mean_prev.argmax()),
        "attack_rate": float(cumulative.mean() / n),
        "final_recovered_or_dead": float(final.mean() / n),
        "final_dead": float(result.column("dead")[:, -1].mean()),
        "mean_acceptance": float(result.column("acceptance_level").mean()),
    }
