"""
Path dumps.

Binary layout: 8-byte magic, little-endian uint64 header length, UTF-8 JSON header
(kind, N, steps, dim, grid params, extra metadata), then the payload as little-endian
float64 in particle-major order.
"""
import json
import logging
from pathlib import Path as FilePath

import numpy as np

from src.errors import SizeMismatch
from src.pathspace.grid import TimeGrid, make_grid

logger = logging.getLogger(__name__)

MAGIC = b"MKVPATH1"


def write_paths(path: str | FilePath, values: np.ndarray, grid: TimeGrid, kind: str = "paths", meta: dict | None = None) -> FilePath:
    """
    Write an (N, L, d) array of paths (or tangents, or controls) to the columnar binary format.

    Returns:
        The path written
    """
    target = FilePath(path)
    values = np.asarray(values, dtype=float)
    if values.ndim != 3:
        raise SizeMismatch(f"expected an (N, L, d) array, got shape {values.shape}")

    header = {
        "kind": kind,
        "N": values.shape[0],
        "length": values.shape[1],
        "dim": values.shape[2],
        "grid": grid.to_dict(),
        "meta": meta or {},
    }
    encoded = json.dumps(header, sort_keys=True).encode("utf-8")
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.array([len(encoded)], dtype="<u8").tobytes())
        fh.write(encoded)
        fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())
    logger.debug(f"Wrote {kind} dump {target} ({values.shape})")
    return target


def read_paths(path: str | FilePath) -> tuple[np.ndarray, TimeGrid, dict]:
    """Read a dump written by write_paths; returns (values, grid, header)."""
    raw = FilePath(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path} is not a path dump")
    size = int(np.frombuffer(raw[8:16], dtype="<u8")[0])
    header = json.loads(raw[16:16 + size].decode("utf-8"))
    shape = (header["N"], header["length"], header["dim"])
    values = np.frombuffer(raw[16 + size:], dtype="<f8").reshape(shape).astype(float)
    g = header["grid"]
    return values, make_grid(g["T"], g["dt"], g["r0"]), header


def write_paths_csv(path: str | FilePath, values: np.ndarray, times: np.ndarray) -> FilePath:
    """Long-format CSV: particle, t, x0..x{d-1}."""
    target = FilePath(path)
    values = np.asarray(values, dtype=float)
    n, length, dim = values.shape
    if times.shape[0] != length:
        raise SizeMismatch(f"{length} path values but {times.shape[0]} times")

    table = np.column_stack([
        np.repeat(np.arange(n), length),
        np.tile(times, n),
        values.reshape(n * length, dim),
    ])
    columns = ["particle", "t"] + [f"x{j}" for j in range(dim)]
    target.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(target, table, delimiter=",", header=",".join(columns), comments="", fmt="%.17g")
    return target
