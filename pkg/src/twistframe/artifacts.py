"""CSV tables and little-endian binary dumps, all written atomically.

Binary layouts (all integers u32 LE, all values float64 LE, complex numbers
stored as consecutive re, im pairs in row-major order):

``TWKF`` / ``TWZF`` / ``TWSF``
    magic, ndim, shape[ndim], values.  Kernel, Zak field and sampled function.
``TWRF``
    magic, S, M, P, then one S x S matrix per torus point in (xi, xi') order.
    For n > 1, M and P are the flattened torus sizes M^n and P^n.
"""

from __future__ import annotations

import csv
import io
import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grids import GridSpec, SampledFunction
from .rangeops import FiberOperatorField
from .weyl import KernelField
from .zak import BracketField, ZakField

ARRAY_MAGICS = (b"TWKF", b"TWZF", b"TWSF")
RANGE_MAGIC = b"TWRF"


def atomic_write(path: str | os.PathLike, data: bytes | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return atomic_write(path, buf.getvalue())


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return v


def write_json(path, obj) -> Path:
    return atomic_write(path, json.dumps(obj, indent=2, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


# --------------------------------------------------------------------------
# CSV tables


def bracket_rows(br: BracketField):
    s = br.spec
    if s.n != 1:
        raise ValueError("bracket CSV is defined for n = 1")
    mask = br.omega_mask
    for a in range(s.M):
        for b in range(s.P):
            v = br.values[a, b]
            yield a / s.M, b / s.P, v.real, v.imag, bool(mask[a, b])


def write_bracket_csv(path, br: BracketField) -> Path:
    return write_csv(path, ("xi", "xi_prime", "re", "im", "in_omega"), bracket_rows(br))


FRAME_REPORT_HEADER = ("label", "A", "B", "A_est", "B_est", "is_frame", "is_parseval",
                       "omega_fraction", "Kmax")


def write_frame_reports(path, reports) -> Path:
    rows = ([r.row()[k] for k in FRAME_REPORT_HEADER] for r in reports)
    return write_csv(path, FRAME_REPORT_HEADER, rows)


def write_kernel_csv(path, spec: GridSpec, table: np.ndarray, xi: np.ndarray, eta: np.ndarray,
                     mask: np.ndarray | None = None) -> Path:
    """Rows (xi, eta, re, im) of a table indexed by (xi, eta); masked entries skipped."""
    def rows():
        for a in range(table.shape[0]):
            for c in range(table.shape[1]):
                if mask is None or mask[a, c]:
                    v = table[a, c]
                    yield xi[a], eta[c], v.real, v.imag
    return write_csv(path, ("xi", "eta", "re", "im"), rows())


def kernel_to_csv(path, K: KernelField) -> Path:
    if K.spec.n != 1:
        raise ValueError("kernel CSV is defined for n = 1")
    ax = K.spec.axis()
    return write_kernel_csv(path, K.spec, K.values, ax, ax)


# --------------------------------------------------------------------------
# binary dumps


def _pack_array(magic: bytes, arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr, dtype="<c16")
    head = magic + struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape)
    return head + arr.tobytes()


def dump_array(path, magic: bytes, arr: np.ndarray) -> Path:
    if magic not in ARRAY_MAGICS:
        raise ValueError(f"unknown magic {magic!r}")
    return atomic_write(path, _pack_array(magic, arr))


def dump_function(path, f: SampledFunction) -> Path:
    return dump_array(path, b"TWSF", f.values)


def dump_kernel(path, K: KernelField) -> Path:
    return dump_array(path, b"TWKF", K.values)


def dump_zak(path, Z: ZakField) -> Path:
    return dump_array(path, b"TWZF", Z.values)


def load_array(path) -> tuple[bytes, np.ndarray]:
    data = Path(path).read_bytes()
    magic = data[:4]
    if magic not in ARRAY_MAGICS:
        raise ValueError(f"{path}: bad magic {magic!r}")
    (ndim,) = struct.unpack_from("<I", data, 4)
    shape = struct.unpack_from(f"<{ndim}I", data, 8)
    off = 8 + 4 * ndim
    arr = np.frombuffer(data, dtype="<c16", offset=off).reshape(shape)
    return magic, arr.astype(np.complex128)


def load_function(path, spec: GridSpec, label: str = "") -> SampledFunction:
    magic, arr = load_array(path)
    if magic != b"TWSF":
        raise ValueError(f"{path} holds {magic!r}, not a sampled function")
    return SampledFunction(spec, arr, label or Path(path).stem)


def dump_range_field(path, R: FiberOperatorField) -> Path:
    s = R.spec
    C = np.ascontiguousarray(R.compressed(), dtype="<c16")
    head = RANGE_MAGIC + struct.pack("<3I", R.S, s.M**s.n, s.P**s.n)
    return atomic_write(path, head + C.tobytes())


def load_range_field(path) -> np.ndarray:
    """Per-fiber matrices with shape (M, P, S, S)."""
    data = Path(path).read_bytes()
    if data[:4] != RANGE_MAGIC:
        raise ValueError(f"{path}: bad magic {data[:4]!r}")
    S, M, P = struct.unpack_from("<3I", data, 4)
    return np.frombuffer(data, dtype="<c16", offset=16).reshape(M, P, S, S).astype(np.complex128)
