"""Feature tables as CSV with a fixed header."""

import csv
import io
from pathlib import Path

import numpy as np

from app.echo.features import FEATURE_COLUMNS, FeatureMatrix
from app.infra.files._documents import read_text, write_text
from app.shared.exceptions import FormatError

HEADER: tuple[str, ...] = ("frame", "k", *FEATURE_COLUMNS, "label")


def features_to_csv(features: FeatureMatrix) -> str:
    if features.columns != FEATURE_COLUMNS:
        raise FormatError(f"feature files hold all columns {FEATURE_COLUMNS}")
    out = io.StringIO()
    out.write(",".join(HEADER) + "\n")
    for i in range(features.n_rows):
        label = "" if features.labels is None else str(int(features.labels[i]))
        values = ",".join(repr(float(v)) for v in features.values[i])
        out.write(f"{int(features.frames[i])},{int(features.components[i])},{values},{label}\n")
    return out.getvalue()


def write_features(features: FeatureMatrix, path: Path) -> Path:
    return write_text(Path(path), features_to_csv(features))


def read_features(path: Path) -> FeatureMatrix:
    """Read a feature CSV; labels are kept only when every row carries one."""
    path = Path(path)
    reader = csv.reader(io.StringIO(read_text(path)))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != HEADER:
        raise FormatError(f"{path}:1: expected header {','.join(HEADER)}")
    frames: list[int] = []
    ks: list[int] = []
    rows: list[list[float]] = []
    labels: list[int | None] = []
    for row in reader:
        line = reader.line_num
        if not row:
            continue
        if len(row) != len(HEADER):
            raise FormatError(f"{path}:{line}: expected {len(HEADER)} fields, found {len(row)}")
        try:
            frames.append(int(row[0]))
            ks.append(int(row[1]))
            rows.append([float(v) for v in row[2:-1]])
            labels.append(int(row[-1]) if row[-1].strip() else None)
        except ValueError as exc:
            raise FormatError(f"{path}:{line}: {exc}") from exc
    labelled = bool(labels) and all(label is not None for label in labels)
    return FeatureMatrix(
        frames=frames,
        components=ks,
        columns=FEATURE_COLUMNS,
        values=np.array(rows, dtype=float).reshape(len(rows), len(FEATURE_COLUMNS)),
        labels=labels if labelled else None,
    )
