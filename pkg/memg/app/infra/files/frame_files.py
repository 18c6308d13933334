"""Frames as ``t_ms,amplitude`` CSV files with a JSON metadata sidecar."""

import csv
import io
import logging
from collections.abc import Sequence
from pathlib import Path

from app.echo.models import Frame
from app.infra.files._documents import load_document, read_text, write_document, write_text
from app.infra.model.frame_model import FRAME_SCHEMA_VERSION, FrameMetaDoc
from app.shared.exceptions import FormatError

logger = logging.getLogger(__name__)

HEADER = ("t_ms", "amplitude")


def sidecar_path(path: Path) -> Path:
    return path.with_suffix(".json")


def frame_to_csv(frame: Frame) -> str:
    out = io.StringIO()
    out.write(",".join(HEADER) + "\n")
    for t, value in zip(frame.x, frame.samples):
        out.write(f"{t:.9g},{float(value)!r}\n")
    return out.getvalue()


def write_frame(frame: Frame, path: Path) -> Path:
    """Write a frame CSV and its sidecar; returns the CSV path."""
    path = Path(path)
    write_text(path, frame_to_csv(frame))
    write_document(
        sidecar_path(path),
        FrameMetaDoc(
            schema_version=FRAME_SCHEMA_VERSION,
            fs_khz=float(f"{frame.fs_khz:.12g}"),
            frame_index=frame.frame_index,
            blind_zone_samples=frame.blind_zone,
            f_e_khz=frame.f_e,
        ),
    )
    return path


def write_frames(frames: Sequence[Frame], directory: Path, stem: str = "frame") -> list[Path]:
    directory = Path(directory)
    return [
        write_frame(frame, directory / f"{stem}_{frame.frame_index:04d}.csv") for frame in frames
    ]


def _parse_samples(path: Path) -> list[float]:
    reader = csv.reader(io.StringIO(read_text(path)))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != HEADER:
        raise FormatError(f"{path}:1: expected header {','.join(HEADER)}")
    samples: list[float] = []
    previous = float("-inf")
    for row in reader:
        line = reader.line_num
        if not row:
            continue
        if len(row) != 2:
            raise FormatError(f"{path}:{line}: expected 2 fields, found {len(row)}")
        try:
            t, value = float(row[0]), float(row[1])
        except ValueError as exc:
            raise FormatError(f"{path}:{line}: {exc}") from exc
        if not t > previous:
            raise FormatError(f"{path}:{line}: time axis is not increasing")
        previous = t
        samples.append(value)
    return samples


def read_frame(path: Path) -> Frame:
    """Read one frame CSV together with its sidecar."""
    path = Path(path)
    meta_path = sidecar_path(path)
    if not meta_path.exists():
        raise FormatError(f"{path}: missing metadata sidecar {meta_path.name}")
    meta = load_document(meta_path, FrameMetaDoc, FRAME_SCHEMA_VERSION)
    return Frame.from_rate(
        _parse_samples(path),
        meta.fs_khz,
        frame_index=meta.frame_index,
        blind_zone=meta.blind_zone_samples,
        f_e=meta.f_e_khz,
    )


def read_frames(path: Path) -> list[Frame]:
    """Read a frame file or every frame CSV in a directory, sorted by frame index.

    Args:
        path: A ``.csv`` frame file or a directory of them.

    Returns:
        list[Frame]: Frames ordered by ``frame_index``; empty for an empty
        directory.
    """
    path = Path(path)
    if path.is_dir():
        # reports and other tables in the directory carry no sidecar
        files = [f for f in sorted(path.glob("*.csv")) if sidecar_path(f).exists()]
    elif path.exists():
        files = [path]
    else:
        raise FormatError(f"{path}: no such file or directory")
    frames = [read_frame(file) for file in files]
    frames.sort(key=lambda frame: frame.frame_index)
    logger.debug("io.frames.read path=%s count=%d", path, len(frames))
    return frames
