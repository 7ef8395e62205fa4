"""On-disk cache of Dirichlet coefficient tables.

Layout: the 6-byte magic ``LLENS1``, the 32-byte SHA-256 of the curve file in
canonical form, T as an unsigned 64-bit little-endian integer, then a_1..a_T as
signed 64-bit little-endian integers.
"""

from __future__ import annotations

import logging
import os
import struct
from pathlib import Path

import numpy as np

from llens.curve import CoefficientTable, extend_coefficients
from llens.curvefile import CurveFile

MAGIC = b"LLENS1"
_HEADER = struct.Struct("<6s32sQ")

log = logging.getLogger(__name__)


def cache_dir() -> Path:
    env = os.environ.get("LLENS_CACHE_DIR")
    if env:
        return Path(env)
    base = os.environ.get("XDG_CACHE_HOME") or Path.home() / ".cache"
    return Path(base) / "llens"


def _safe(label: str) -> str:
    return "".join(ch if ch.isalnum() or ch in ".-_" else "_" for ch in label)


def cache_path(curve: CurveFile, T: int, directory: Path | None = None) -> Path:
    return (directory or cache_dir()) / f"{_safe(curve.label)}.T{T}.bin"


def write_table(path: Path, curve: CurveFile, table: CoefficientTable) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    body = np.asarray(table.values[1:], dtype="<i8").tobytes()
    tmp = path.with_suffix(".tmp")
    tmp.write_bytes(_HEADER.pack(MAGIC, curve.content_hash(), table.limit) + body)
    tmp.replace(path)


def read_table(path: Path, curve: CurveFile) -> CoefficientTable | None:
    """Load a cached table, or return None if the file is missing or does not match."""
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        return None
    if len(data) < _HEADER.size:
        log.warning("cache file %s is truncated; ignoring it", path)
        return None
    magic, digest, T = _HEADER.unpack_from(data)
    if magic != MAGIC or digest != curve.content_hash():
        log.warning("cache file %s belongs to a different curve or format; ignoring it", path)
        return None
    body = data[_HEADER.size:]
    if len(body) != 8 * T:
        log.warning("cache file %s has the wrong length; ignoring it", path)
        return None
    values = np.concatenate([[0], np.frombuffer(body, dtype="<i8")]).astype(np.int64)
    if T >= 1 and values[1] != 1:
        log.warning("cache file %s has a_1 != 1; ignoring it", path)
        return None
    return CoefficientTable(T, values, "cached")


def load_or_build(curve: CurveFile, T: int, directory: Path | None = None, workers: int = 1,
                  use_cache: bool = True) -> CoefficientTable:
    """Coefficient table with at least T entries, reusing a cached table when it is valid."""
    if not use_cache:
        return extend_coefficients(curve.spec, T, workers=workers)
    folder = directory or cache_dir()
    exact = cache_path(curve, T, folder)
    table = read_table(exact, curve)
    if table is not None:
        return table
    # a larger valid table also serves
    if folder.is_dir():
        for other in sorted(folder.glob(f"{_safe(curve.label)}.T*.bin")):
            try:
                size = int(other.name.rsplit(".T", 1)[1][:-4])
            except ValueError:
                continue
            if size > T:
                bigger = read_table(other, curve)
                if bigger is not None:
                    return CoefficientTable(T, bigger.values[: T + 1].copy(), "cached")
    table = extend_coefficients(curve.spec, T, workers=workers)
    try:
        write_table(exact, curve, table)
    except OSError as exc:
        log.warning("could not write cache file %s: %s", exact, exc)
    return table
