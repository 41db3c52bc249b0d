"""Readers for the run-directory file formats, with named-column diagnostics.

Every loader validates the header or key set it needs before touching the
data, so a malformed file fails with the file name and the exact missing
columns rather than an index error deep inside matplotlib.
"""

import csv
import json
from pathlib import Path

import numpy as np
import yaml


class SchemaError(ValueError):
    """A run-directory file is missing or lacks required columns/keys."""


def _missing(path, kind, names) -> SchemaError:
    return SchemaError(f"{path}: missing {kind} {sorted(names)}")


def read_csv_columns(path, required) -> dict:
    """CSV as {column: float array}; raises SchemaError naming absent columns.

    All columns in the file are returned, not just the required ones.
    """
    path = Path(path)
    if not path.is_file():
        raise SchemaError(f"{path}: file not found")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        absent = set(required) - set(header)
        if absent:
            raise _missing(path, "columns", absent)
        rows = []
        for ln, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path}:{ln}: {len(row)} fields, header has {len(header)}")
            rows.append(row)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=np.float64)
    return {name: data[:, i] for i, name in enumerate(header)}


def _read_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise SchemaError(f"{path}: file not found")
    with path.open() as fh:
        return json.load(fh)


TRACE_REQUIRED = ("iter", "evals", "loss", "soft_coverage", "soft_revisit_min",
                  "hard_coverage", "hard_revisit_min")
BESTSOFAR_REQUIRED = ("evals", "best_loss", "best_hard_coverage", "best_hard_revisit_min")
DENSITY_REQUIRED = ("lat_deg", "lon_deg", "weight", "covered_steps")
LANDSCAPE_REQUIRED = ("x_deg", "y_deg", "relaxed_loss", "hard_loss",
                      "hard_coverage", "hard_revisit_min")
TRAJ_REQUIRED = ("iter", "x_deg", "y_deg")
SAT_KEYS = ("a_km", "e", "inc_deg", "raan_deg", "argp_deg", "ma_deg", "plane")
METRIC_KEYS = ("hard_coverage", "hard_revisit_min", "soft_coverage", "soft_revisit_min")


def read_trace(run_dir) -> dict:
    return read_csv_columns(Path(run_dir) / "trace.csv", TRACE_REQUIRED)


def read_bestsofar(run_dir) -> dict:
    return read_csv_columns(Path(run_dir) / "bestsofar.csv", BESTSOFAR_REQUIRED)


def read_density(run_dir) -> dict:
    return read_csv_columns(Path(run_dir) / "density.csv", DENSITY_REQUIRED)


def read_landscape(dir_) -> dict:
    return read_csv_columns(Path(dir_) / "landscape.csv", LANDSCAPE_REQUIRED)


def read_landscape_traj(dir_) -> dict:
    return read_csv_columns(Path(dir_) / "landscape_traj.csv", TRAJ_REQUIRED)


def read_thetas(run_dir) -> np.ndarray:
    """(m, 1+n) array: iteration column followed by the decision vector."""
    path = Path(run_dir) / "thetas.csv"
    cols = read_csv_columns(path, ("iter",))
    n = len(cols) - 1
    if n < 1:
        raise _missing(path, "columns", ["theta_0"])
    names = [f"theta_{i}" for i in range(n)]
    absent = set(names) - set(cols)
    if absent:
        raise _missing(path, "columns", absent)
    return np.column_stack([cols["iter"]] + [cols[c] for c in names])


def read_satellites(run_dir) -> list:
    """Satellite element records from elements.json, key-checked."""
    path = Path(run_dir) / "elements.json"
    doc = _read_json(path)
    sats = doc.get("satellites")
    if not sats:
        raise _missing(path, "keys", ["satellites"])
    for s in sats:
        absent = set(SAT_KEYS) - set(s)
        if absent:
            raise _missing(path, "satellite keys", absent)
    return sats


def read_metrics(run_dir) -> dict:
    """{"initial": ..., "final": ...} metric blocks, key-checked."""
    path = Path(run_dir) / "metrics.json"
    doc = _read_json(path)
    absent = {"initial", "final"} - set(doc)
    if absent:
        raise _missing(path, "keys", absent)
    for block in ("initial", "final"):
        missing = set(METRIC_KEYS) - set(doc[block])
        if missing:
            raise _missing(path, f"{block} metric keys", missing)
    return doc


def read_config(run_dir) -> dict:
    path = Path(run_dir) / "config.yaml"
    if not path.is_file():
        raise SchemaError(f"{path}: file not found")
    with path.open() as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: not a mapping")
    absent = {"experiment", "model"} - set(doc)
    if absent:
        raise _missing(path, "keys", absent)
    return doc


def read_summary(suite_dir) -> dict:
    """Baseline-suite summary with per-method run lists."""
    path = Path(suite_dir) / "summary.json"
    doc = _read_json(path)
    absent = {"budget", "methods"} - set(doc)
    if absent:
        raise _missing(path, "keys", absent)
    for method, block in doc["methods"].items():
        missing = {"runs", "best"} - set(block)
        if missing:
            raise _missing(path, f"method {method!r} keys", missing)
    return doc


def read_ref_metrics(path) -> dict:
    """A flat metrics JSON (e.g. from `orbitgrad eval --out`)."""
    doc = _read_json(path)
    absent = {"hard_coverage", "hard_revisit_min"} - set(doc)
    if absent:
        raise _missing(path, "keys", absent)
    return doc


def experiment_name(run_dir) -> str:
    """Run label for legends: the config's experiment name, else the dir name."""
    try:
        return str(read_config(run_dir)["experiment"])
    except SchemaError:
        return Path(run_dir).name
