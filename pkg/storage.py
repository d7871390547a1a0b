"""
Report and trajectory serialization.

  JSON  reports and trajectory envelopes, always carrying schema_version
  CSV   energy ledgers, fixed column order (ledger.CSV_COLUMNS)
  .bin  raw coefficient dumps: 8-byte magic, little-endian int64 header
        [version, dim, N, domain code, samples, values per sample, is_complex],
        one float64 dealias fraction, then little-endian float64 data
        (complex coefficients as interleaved real/imaginary pairs)
"""
import json
import logging
import math
from pathlib import Path
from typing import Any, List, Sequence, Tuple, Union

import numpy as np

from errors import ConfigurationError
from ledger import CSV_COLUMNS, EnergyLedger
from spectral import BOX, TORUS, GridSpec, SpectralField, StatePair

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MAGIC = b"DWSPEC01"
BINARY_VERSION = 1
_DOMAIN_CODES = {TORUS: 0, BOX: 1}

PathLike = Union[str, Path]


def to_jsonable(obj: Any) -> Any:
    """numpy values to plain Python; non-finite floats become None"""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def envelope(kind: str, payload: dict) -> dict:
    return {"schema_version": SCHEMA_VERSION, "kind": kind, **to_jsonable(payload)}


def write_json(path: PathLike, document: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, indent=2, allow_nan=False))
    logger.info(f"wrote {path}")
    return path


def read_json(path: PathLike) -> dict:
    document = json.loads(Path(path).read_text())
    if document.get("schema_version") != SCHEMA_VERSION:
        raise ConfigurationError(f"{path}: unsupported schema_version {document.get('schema_version')}")
    return document


def trajectory_envelope(record) -> dict:
    """JSON envelope of a TrajectoryRecord: parameters, integrator metadata, times and ledger rows"""
    meta = record.meta
    rows = [dict(zip(CSV_COLUMNS, row.csv_values())) for row in record.ledger.rows]
    return envelope("trajectory", {
        "params": record.params.describe(),
        "integrator": {"dt": meta.dt, "stride": meta.stride, "steps": meta.steps,
                       "scheme": meta.scheme, "order": meta.order, "dealias": meta.dealias},
        "times": record.times,
        "ledger": rows,
    })


def write_ledger_csv(path: PathLike, ledger: EnergyLedger) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, ledger.table(), delimiter=",", header=",".join(CSV_COLUMNS), comments="", fmt="%.17g")
    return path


def read_ledger_csv(path: PathLike) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if tuple(header) != CSV_COLUMNS:
        raise ConfigurationError(f"{path}: unexpected ledger columns {header}")
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def write_coefficients(path: PathLike, states: Sequence[StatePair]) -> Path:
    """Dump the (u, v) coefficients of every state, u then v per sample"""
    if not states:
        raise ConfigurationError("nothing to dump")
    grid = states[0].grid
    fields: List[SpectralField] = [f for xi in states for f in (xi.u, xi.v)]
    data = np.stack([f.coeffs.ravel() for f in fields])
    is_complex = np.iscomplexobj(data)
    header = np.array([BINARY_VERSION, grid.dim, grid.n, _DOMAIN_CODES[grid.kind],
                       len(fields), grid.n ** grid.dim, int(is_complex)], dtype="<i8")
    body = data.astype("<c16" if is_complex else "<f8").view("<f8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(header.tobytes())
        fh.write(np.array([grid.dealias], dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(body).tobytes())
    return path


def read_coefficients(path: PathLike) -> Tuple[GridSpec, List[StatePair]]:
    raw = Path(path).read_bytes()
    if raw[:len(MAGIC)] != MAGIC:
        raise ConfigurationError(f"{path}: not a coefficient dump")
    offset = len(MAGIC)
    header = np.frombuffer(raw, dtype="<i8", count=7, offset=offset)
    version, dim, n, code, samples, values, is_complex = (int(h) for h in header)
    if version != BINARY_VERSION:
        raise ConfigurationError(f"{path}: unsupported dump version {version}")
    offset += header.nbytes
    dealias = float(np.frombuffer(raw, dtype="<f8", count=1, offset=offset)[0])
    offset += 8
    kind = {v: k for k, v in _DOMAIN_CODES.items()}[code]
    grid = GridSpec(dim, n, kind, dealias)
    body = np.frombuffer(raw, dtype="<f8", offset=offset)
    data = body.view("<c16") if is_complex else body
    data = data.reshape(samples, values)
    fields = [SpectralField(grid, row.reshape(grid.shape)) for row in data]
    return grid, [StatePair(u, v) for u, v in zip(fields[::2], fields[1::2])]
