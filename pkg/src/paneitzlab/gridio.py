"""Binary grid dumps.

Layout: a 48-byte little-endian header
    magic   4 bytes   b"PZG1" (spatial samples) or b"PZF1" (frequency samples)
    dims    3 x uint32
    spacing float64
    origin  3 x float64
followed by float64 payload blocks, one per component, each in row-major
order with x_1 varying fastest.  Frequency dumps store complex samples as a
real block followed by an imaginary block per component.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fields import FieldError, GridSpec

HEADER = struct.Struct("<4s3I4d")
MAGIC_SPATIAL = b"PZG1"
MAGIC_FREQUENCY = b"PZF1"
assert HEADER.size == 48


@dataclass(frozen=True)
class GridDump:
    grid: GridSpec
    values: np.ndarray  # (n1, n2, n3) + component shape
    domain: str  # "spatial" or "frequency"


def _blocks(values: np.ndarray, n: tuple[int, int, int]) -> np.ndarray:
    comps = values.reshape(n + (-1,))
    return np.stack([comps[..., c].ravel(order="F") for c in range(comps.shape[-1])])


def write_grid(path: str | Path, values: np.ndarray, grid: GridSpec, domain: str = "spatial") -> Path:
    path = Path(path)
    values = np.asarray(values)
    n = tuple(int(v) for v in grid.n)
    if values.shape[:3] != n:
        raise FieldError(f"values of shape {values.shape} do not match grid dims {n}")
    if domain == "spatial":
        if np.iscomplexobj(values):
            raise FieldError("spatial dumps hold real samples")
        payload = _blocks(values.astype(float), n)
        magic = MAGIC_SPATIAL
    elif domain == "frequency":
        v = values.astype(complex)
        re, im = _blocks(v.real, n), _blocks(v.imag, n)
        payload = np.stack([re, im], axis=1).reshape(-1, re.shape[-1])
        magic = MAGIC_FREQUENCY
    else:
        raise FieldError(f"unknown grid domain {domain!r}")
    header = HEADER.pack(magic, *n, float(grid.spacing), *(float(o) for o in grid.origin))
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(payload, dtype="<f8").tobytes())
    except OSError as exc:
        raise OSError(f"cannot write grid dump {path}: {exc}") from exc
    return path


def read_grid(path: str | Path, component_shape: tuple[int, ...] = ()) -> GridDump:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < HEADER.size:
        raise FieldError(f"{path}: truncated header")
    magic, n1, n2, n3, h, o1, o2, o3 = HEADER.unpack_from(data)
    if magic not in (MAGIC_SPATIAL, MAGIC_FREQUENCY):
        raise FieldError(f"{path}: bad magic {magic!r}")
    n = (n1, n2, n3)
    flat = np.frombuffer(data, dtype="<f8", offset=HEADER.size)
    npts = n1 * n2 * n3
    if flat.size % npts:
        raise FieldError(f"{path}: payload size is not a multiple of the grid size")
    blocks = flat.reshape(-1, npts)
    if magic == MAGIC_FREQUENCY:
        if blocks.shape[0] % 2:
            raise FieldError(f"{path}: frequency payload needs real/imaginary block pairs")
        blocks = blocks[0::2] + 1j * blocks[1::2]
    ncomp = blocks.shape[0]
    expected = int(np.prod(component_shape)) if component_shape else ncomp
    if expected != ncomp:
        raise FieldError(f"{path}: {ncomp} components, expected shape {component_shape}")
    vals = np.stack([b.reshape(n, order="F") for b in blocks], axis=-1)
    vals = vals.reshape(n + (component_shape or ((ncomp,) if ncomp > 1 else ())))
    grid = GridSpec(n, float(h), (float(o1), float(o2), float(o3)))
    return GridDump(grid, vals, "spatial" if magic == MAGIC_SPATIAL else "frequency")
