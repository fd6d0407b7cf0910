"""JSON and JSON-lines encodings for matrices, point batches and results."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import IO, Iterable, Iterator

import numpy as np

from .matrix_core import matrix_from_json, matrix_to_json

POINT_KINDS = ("spd", "unit_det")


def point_to_json(X, kind: str) -> dict:
    if kind not in POINT_KINDS:
        raise ValueError(f"unknown point kind {kind!r}")
    rec = matrix_to_json(X)
    rec["kind"] = kind
    return rec


def dumps_line(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def write_batch(fh: IO[str], points, header: dict, kind: str) -> None:
    """Header line ``{"header": {...}}`` followed by one matrix per line."""
    points = np.asarray(points)
    fh.write(dumps_line({"header": dict(header, count=int(points.shape[0]), kind=kind)}) + "\n")
    for X in points:
        fh.write(dumps_line(point_to_json(X, kind)) + "\n")


class BatchFormatError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


def iter_batch(lines: Iterable[str]) -> Iterator[tuple[int, dict | None, np.ndarray | None]]:
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BatchFormatError(lineno, f"invalid JSON ({exc.msg})") from None
        if not isinstance(obj, dict):
            raise BatchFormatError(lineno, "expected a JSON object")
        if "header" in obj:
            yield lineno, obj["header"], None
            continue
        try:
            yield lineno, None, matrix_from_json(obj)
        except ValueError as exc:
            raise BatchFormatError(lineno, str(exc)) from None


def read_batch(lines: Iterable[str]) -> tuple[dict, np.ndarray]:
    """Parse a JSON-lines batch; the header is optional.

    Raises ``BatchFormatError`` (with a line number) on malformed input,
    mixed shapes or an empty batch.
    """
    header: dict = {}
    mats = []
    shape = None
    last = 0
    for lineno, hdr, M in iter_batch(lines):
        last = lineno
        if hdr is not None:
            header = hdr
            continue
        if shape is None:
            shape = (M.shape, M.dtype.kind)
        elif (M.shape, M.dtype.kind) != shape:
            raise BatchFormatError(lineno, "matrix shape or field differs from earlier lines")
        mats.append(M)
    if not mats:
        raise BatchFormatError(last + 1, "no matrices in input")
    return header, np.stack(mats)


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def to_jsonable(obj):
    """Recursively convert numpy scalars and arrays for ``json.dumps``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj
