"""Binary checkpoint format for compressor parameters.

Layout: magic ``RPLC``, then five little-endian u32 fields (version, dim,
contextual query count, non-contextual query count, anchor count), then the
two query banks as row-major little-endian float64, contextual bank first.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..compressor import PlcParams
from .errors import DataError

MAGIC = b"RPLC"
VERSION = 1
_HEADER = struct.Struct("<4sIIIII")


def save_params(params: PlcParams, path: str | Path) -> None:
    n_ctx, dim = params.q_contextual.shape
    n_nc = params.q_noncontextual.shape[0]
    header = _HEADER.pack(MAGIC, VERSION, dim, n_ctx, n_nc, params.n_anchor)
    body = (params.q_contextual.astype("<f8").tobytes()
            + params.q_noncontextual.astype("<f8").tobytes())
    Path(path).write_bytes(header + body)


def load_params(path: str | Path) -> PlcParams:
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise DataError(f"cannot read checkpoint {path}: {e}") from e
    if len(raw) < _HEADER.size:
        raise DataError(f"checkpoint {path} is truncated")
    magic, version, dim, n_ctx, n_nc, n_anchor = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DataError(f"checkpoint {path} has wrong magic {magic!r}")
    if version != VERSION:
        raise DataError(f"checkpoint {path} has unsupported version {version}")
    expected = _HEADER.size + (n_ctx + n_nc) * dim * 8
    if len(raw) != expected:
        raise DataError(
            f"checkpoint {path} has {len(raw)} bytes, expected {expected}")
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    q_ctx = body[: n_ctx * dim].reshape(n_ctx, dim).astype(np.float64)
    q_nc = body[n_ctx * dim:].reshape(n_nc, dim).astype(np.float64)
    return PlcParams(q_contextual=q_ctx, q_noncontextual=q_nc, n_anchor=n_anchor)
