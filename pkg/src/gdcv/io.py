"""CSV and manifest writers with a fixed dialect: comma separators, '.'
decimal point, header row, LF line endings, UTF-8.  Floats are written with
repr (shortest round-trip form) so re-runs are byte-identical."""
from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

import numpy as np


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, fieldnames, rows) -> Path:
    """Write dict rows in the fixed dialect; missing fields become empty."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(fieldnames)]
    for row in rows:
        lines.append(",".join(_fmt(row[f]) if f in row and row[f] is not None else ""
                              for f in fieldnames))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def write_risk_curves(path, curves) -> Path:
    """Risk curves to CSV: columns k, value, label (+ stderr when present)."""
    rows = [row for curve in curves for row in curve.to_rows()]
    fields = ["k", "value", "label"]
    if any("stderr" in r for r in rows):
        fields.append("stderr")
    return write_csv(path, fields, rows)


def write_loo_predictions(path, response, loo_predictions) -> Path:
    """Per-(row, step) LOO predictions: columns i, k, loo_prediction, residual."""
    y = np.asarray(response, dtype=float)
    P = np.asarray(loo_predictions, dtype=float)
    rows = (
        {"i": i, "k": k, "loo_prediction": P[i, k], "residual": y[i] - P[i, k]}
        for i in range(P.shape[0])
        for k in range(P.shape[1])
    )
    return write_csv(path, ["i", "k", "loo_prediction", "residual"], rows)


def write_dataset(path, dataset) -> Path:
    """Dump a Dataset to CSV (features x0..x{d-1}, response in column y).

    The file round-trips through ``load_dataset_csv`` with the default
    named-response convention.
    """
    d = dataset.features.shape[1]
    names = [f"x{j}" for j in range(d)] + ["y"]
    rows = (
        {**{f"x{j}": dataset.features[i, j] for j in range(d)}, "y": dataset.response[i]}
        for i in range(dataset.features.shape[0])
    )
    return write_csv(path, names, rows)


def write_coverage(path, reports) -> Path:
    """Coverage reports to CSV: k, nominal, coverage, stderr, mean_length."""
    rows = [row for rep in reports for row in rep.to_rows()]
    return write_csv(path, ["k", "nominal", "coverage", "stderr", "mean_length"], rows)


def write_limit_curves(path, curve_sets) -> Path:
    """Limit curves / mismatch surfaces to CSV: T, zeta, value, label."""
    rows = [row for c in curve_sets for row in c.to_rows()]
    return write_csv(path, ["T", "zeta", "value", "label"], rows)


def config_digest(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_manifest(path, config: dict, seeds, wall_time_s: float,
                   artifacts) -> Path:
    from . import __version__

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "config_sha256": config_digest(config),
        "config": config,
        "seeds": list(map(int, seeds)),
        "library_version": __version__,
        "wall_time_s": wall_time_s,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "artifacts": [str(a) for a in artifacts],
    }
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return path
