"""
File formats: PGM images, self-describing sinogram CSV, operator triplets,
dual reports and plain result tables.
"""

import csv
import os
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from app.models.operator_model import Sinogram, SparseOperator
from app.models.solver_model import DualSolution
from app.utils.constants import PGM_ASCII_MAX_PIXELS
from app.utils.validators import InputFormatError

SINOGRAM_COLUMNS = ["angle_index", "detector_index", "value"]


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def _fmt(value: float) -> str:
    return f"{float(value):.17g}"


# ---------- PGM ----------

def write_pgm(path: str, codes: np.ndarray, maxval: int) -> None:
    """
    Write integer pixel codes in 0..maxval as PGM.

    Images with at most 64 x 64 pixels are written as ASCII (P2), larger ones
    as binary (P5).
    """
    image = np.asarray(codes)
    if image.ndim != 2:
        raise InputFormatError(f"PGM images must be 2-D, got shape {image.shape}")
    if not 1 <= maxval <= 255:
        raise InputFormatError(f"maxval must be in 1..255, got {maxval}")
    if image.size and (image.min() < 0 or image.max() > maxval):
        raise InputFormatError(f"pixel codes must lie in 0..{maxval}")
    rows, cols = image.shape
    _ensure_parent(path)
    pixels = image.astype(np.uint8)
    if image.size <= PGM_ASCII_MAX_PIXELS:
        lines = [f"P2\n{cols} {rows}\n{maxval}\n"]
        lines.extend(" ".join(str(int(v)) for v in row) + "\n" for row in pixels)
        with open(path, "w", newline="\n") as handle:
            handle.write("".join(lines))
    else:
        with open(path, "wb") as handle:
            handle.write(f"P5\n{cols} {rows}\n{maxval}\n".encode("ascii"))
            handle.write(pixels.tobytes())


def _pgm_tokens(data: bytes, count: int) -> Tuple[List[bytes], int]:
    """Read ``count`` header tokens, skipping comments; return them and the offset after the last one."""
    tokens: List[bytes] = []
    pos = 0
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise InputFormatError("truncated PGM header")
        tokens.append(data[start:pos])
    return tokens, pos


def read_pgm(path: str) -> Tuple[np.ndarray, int]:
    """Read a P2 or P5 PGM file; returns (pixel codes, maxval)."""
    with open(path, "rb") as handle:
        data = handle.read()
    (magic, width, height, maxval), pos = _pgm_tokens(data, 4)
    try:
        cols, rows, top = int(width), int(height), int(maxval)
    except ValueError:
        raise InputFormatError(f"{path}: malformed PGM header") from None
    if magic == b"P2":
        values = data[pos:].split()
        if len(values) != rows * cols:
            raise InputFormatError(f"{path}: expected {rows * cols} pixels, found {len(values)}")
        image = np.array([int(v) for v in values], dtype=np.int64).reshape(rows, cols)
    elif magic == b"P5":
        if top > 255:
            raise InputFormatError(f"{path}: 16-bit PGM is not supported")
        body = data[pos + 1:pos + 1 + rows * cols]
        if len(body) != rows * cols:
            raise InputFormatError(f"{path}: truncated PGM raster")
        image = np.frombuffer(body, dtype=np.uint8).reshape(rows, cols).astype(np.int64)
    else:
        raise InputFormatError(f"{path}: not a PGM file (magic {magic!r})")
    return image, top


def write_binary_image(path: str, image: np.ndarray, u0: float, u1: float) -> None:
    """u0 -> 0, u1 -> 1, maxval 1."""
    write_pgm(path, (np.asarray(image) == u1).astype(np.uint8), maxval=1)


def read_binary_image(path: str, u0: float = 0.0, u1: float = 1.0) -> np.ndarray:
    """Read a PGM and map 0 -> u0, maxval -> u1."""
    codes, maxval = read_pgm(path)
    if not np.all((codes == 0) | (codes == maxval)):
        raise InputFormatError(f"{path}: image is not binary")
    return np.where(codes == maxval, u1, u0).astype(np.float64)


# ---------- Sinogram CSV ----------

def _encode_meta(value: Any) -> str:
    if isinstance(value, (list, tuple, np.ndarray)):
        return ",".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return _fmt(value)
    return str(value)


def write_sinogram_csv(path: str, sinogram: Sinogram, row_index: Sequence[Tuple[int, int]]) -> None:
    """
    Write ``angle_index,detector_index,value[,weight]`` rows after a block of
    ``# key=value`` metadata lines.
    """
    if len(row_index) != sinogram.size:
        raise InputFormatError("row index must cover every sinogram entry")
    _ensure_parent(path)
    columns = SINOGRAM_COLUMNS + (["weight"] if sinogram.weights is not None else [])
    with open(path, "w", newline="") as handle:
        meta = {"geometry": sinogram.geometry, **sinogram.metadata}
        for key in meta:
            handle.write(f"# {key}={_encode_meta(meta[key])}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for i, (angle, detector) in enumerate(row_index):
            row = [angle, detector, _fmt(sinogram.values[i])]
            if sinogram.weights is not None:
                row.append(_fmt(sinogram.weights[i]))
            writer.writerow(row)


def read_sinogram_csv(path: str) -> Tuple[Sinogram, List[Tuple[int, int]]]:
    """Inverse of ``write_sinogram_csv``; metadata values are returned as strings."""
    meta: Dict[str, Any] = {}
    body: List[str] = []
    with open(path, "r") as handle:
        for line in handle:
            if line.startswith("#"):
                key, sep, value = line[1:].strip().partition("=")
                if not sep:
                    raise InputFormatError(f"{path}: metadata line without '=': {line.strip()}")
                meta[key.strip()] = value.strip()
            elif line.strip():
                body.append(line)
    reader = csv.DictReader(body)
    if reader.fieldnames is None or any(c not in reader.fieldnames for c in SINOGRAM_COLUMNS):
        raise InputFormatError(f"{path}: sinogram CSV needs columns {', '.join(SINOGRAM_COLUMNS)}")
    index: List[Tuple[int, int]] = []
    values: List[float] = []
    weights: List[float] = []
    try:
        for row in reader:
            index.append((int(row["angle_index"]), int(row["detector_index"])))
            values.append(float(row["value"]))
            if "weight" in row and row["weight"] not in (None, ""):
                weights.append(float(row["weight"]))
    except ValueError as exc:
        raise InputFormatError(f"{path}: {exc}") from None
    geometry = meta.pop("geometry", "")
    sinogram = Sinogram(values=np.array(values), weights=np.array(weights) if weights else None,
                        geometry=geometry, metadata=meta)
    return sinogram, index


# ---------- Operator triplets ----------

def write_operator_triplets(path: str, A: SparseOperator) -> None:
    """Header ``rows cols nnz`` then one ``row col value`` line per stored coefficient."""
    coo = A.matrix.tocoo()
    _ensure_parent(path)
    with open(path, "w") as handle:
        handle.write(f"{A.rows} {A.cols} {A.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            handle.write(f"{r} {c} {_fmt(v)}\n")


def read_operator_triplets(path: str) -> SparseOperator:
    with open(path, "r") as handle:
        header = handle.readline().split()
        if len(header) != 3:
            raise InputFormatError(f"{path}: header must be 'rows cols nnz'")
        rows, cols, nnz = (int(v) for v in header)
        data = np.loadtxt(handle, ndmin=2) if nnz else np.zeros((0, 3))
    if data.shape != (nnz, 3):
        raise InputFormatError(f"{path}: expected {nnz} triplets, found {data.shape[0]}")
    matrix = sp.coo_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(rows, cols))
    return SparseOperator(matrix=matrix)


# ---------- Dual report ----------

def write_dual_report(path: str, solution: DualSolution) -> None:
    _ensure_parent(path)
    with open(path, "w") as handle:
        handle.write(solution.report())


def read_dual_report(path: str) -> Dict[str, Any]:
    """Parse ``objective``, ``kkt_residual`` and ``iterations`` lines followed by nu values."""
    with open(path, "r") as handle:
        lines = [line.strip() for line in handle if line.strip()]
    if len(lines) < 3:
        raise InputFormatError(f"{path}: dual report is truncated")
    try:
        fields = dict(line.split(" ", 1) for line in lines[:3])
        return {
            "objective": float(fields["objective"]),
            "kkt_residual": float(fields["kkt_residual"]),
            "iterations": int(fields["iterations"]),
            "nu": np.array([float(v) for v in lines[3:]]),
        }
    except (KeyError, ValueError) as exc:
        raise InputFormatError(f"{path}: malformed dual report ({exc})") from None


# ---------- Result tables ----------

def write_rows_csv(path: str, rows: Iterable[Dict[str, Any]], fieldnames: Sequence[str],
                   append: bool = False) -> None:
    """Write (or append) dict rows; the header is written when the file is new."""
    _ensure_parent(path)
    exists = append and os.path.exists(path) and os.path.getsize(path) > 0
    with open(path, "a" if append else "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(fieldnames), lineterminator="\n")
        if not exists:
            writer.writeheader()
        for row in rows:
            writer.writerow({k: (_fmt(v) if isinstance(v, float) else v) for k, v in row.items()})


def read_rows_csv(path: str) -> List[Dict[str, str]]:
    with open(path, "r", newline="") as handle:
        return list(csv.DictReader(handle))


def parse_float_list(text: Optional[str]) -> List[float]:
    if not text:
        return []
    return [float(v) for v in text.split(",") if v.strip()]
