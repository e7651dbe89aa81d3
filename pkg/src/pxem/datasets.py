"""Reading binary-response datasets from CSV."""
from __future__ import annotations

import csv
import io
from importlib import resources
from pathlib import Path

import numpy as np

FINNEY_NAME = "finney"
FINNEY_COLUMNS = ["volume", "rate", "y"]


def finney_path() -> Path:
    return Path(str(resources.files("pxem").joinpath("data/finney.csv")))


def _read_rows(text: str) -> tuple[list[str], np.ndarray]:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    rows = list(csv.reader(io.StringIO("\n".join(lines))))
    if not rows:
        raise ValueError("dataset is empty")
    header = [h.strip() for h in rows[0]]
    try:
        body = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise ValueError(f"non-numeric dataset entry: {exc}") from None
    if body.ndim != 2 or body.shape[1] != len(header):
        raise ValueError("ragged dataset rows")
    return header, body


def finney_design(volume, rate) -> np.ndarray:
    """Covariates (1, ln volume, ln rate)."""
    volume = np.asarray(volume, dtype=float)
    rate = np.asarray(rate, dtype=float)
    return np.column_stack([np.ones_like(volume), np.log(volume), np.log(rate)])


def read_design_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Load ``(x, y)`` from a CSV file.

    Two layouts are accepted: ``y, x1, ..., xp`` taken as is (no implicit
    intercept), and the raw ``volume, rate, y`` layout of the vaso-constriction
    data, which is expanded to (1, ln volume, ln rate). The name ``finney``
    resolves to the bundled copy of that dataset.
    """
    p = Path(path)
    if str(path) in (FINNEY_NAME, FINNEY_NAME + ".csv") and not p.exists():
        p = finney_path()
    header, body = _read_rows(p.read_text())
    if [h.lower() for h in header] == FINNEY_COLUMNS:
        return finney_design(body[:, 0], body[:, 1]), body[:, 2]
    if header[0].lower() != "y" or len(header) < 2:
        raise ValueError(f"expected header 'y, x1, ..., xp' or 'volume, rate, y', got {header}")
    return body[:, 1:], body[:, 0]


def load_finney() -> tuple[np.ndarray, np.ndarray]:
    return read_design_csv(finney_path())
