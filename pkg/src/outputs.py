"""Result files: diagonal line-out CSV, conserved-field dump and profile.

Dump layout: three little-endian u32 dims (nx, ny, nz), then nx*ny*nz*5
little-endian f64 values, cells ordered x fastest, 5 values per cell
(rho, rho*ux, rho*uy, rho*uz, E).
"""
from pathlib import Path
from typing import Dict

import numpy as np

from config import RunConfig
from errors import OutputError
from logger import get_logger
from phase_space import SpatialGrid, primitives_of
from profiler import ProfileReport

logger = get_logger(__name__)

DIMS_DTYPE = np.dtype('<u4')
VALUE_DTYPE = np.dtype('<f8')
CSV_HEADER = 'x,rho,ux,uy,uz,T'
CSV_NAME = 'diagonal.csv'
DUMP_NAME = 'conserved.bin'
PROFILE_NAME = 'profile.txt'


def diagonal_lineout(conserved: np.ndarray, sgrid: SpatialGrid) -> np.ndarray:
    """(n, 6) rows of x, rho, ux, uy, uz, T along the cells (i, i, i)."""
    idx = np.arange(conserved.shape[0])
    prim = primitives_of(conserved[idx, idx, idx])
    rows = np.empty((len(idx), 6))
    rows[:, 0] = sgrid.centers[idx]
    rows[:, 1] = prim.rho
    rows[:, 2:5] = prim.u
    rows[:, 5] = prim.T
    return rows


def format_lineout_csv(rows: np.ndarray) -> str:
    lines = [CSV_HEADER]
    lines.extend(','.join(format(float(v), '.17g') for v in row) for row in rows)
    return '\n'.join(lines) + '\n'


def encode_conserved_dump(conserved: np.ndarray) -> bytes:
    nx, ny, nz, _ = conserved.shape
    header = np.array([nx, ny, nz], dtype=DIMS_DTYPE).tobytes()
    # (nx, ny, nz, 5) -> z, y, x order so that x varies fastest
    body = np.ascontiguousarray(conserved.transpose(2, 1, 0, 3), dtype=VALUE_DTYPE).tobytes()
    return header + body


def decode_conserved_dump(data: bytes) -> np.ndarray:
    if len(data) < 12:
        raise OutputError(f"dump of {len(data)} bytes has no header")
    nx, ny, nz = (int(d) for d in np.frombuffer(data, dtype=DIMS_DTYPE, count=3))
    expected = 12 + nx * ny * nz * 5 * VALUE_DTYPE.itemsize
    if len(data) != expected:
        raise OutputError(f"dump for {nx}x{ny}x{nz} cells should be {expected} bytes, got {len(data)}")
    values = np.frombuffer(data, dtype=VALUE_DTYPE, offset=12).reshape(nz, ny, nx, 5)
    return values.transpose(2, 1, 0, 3).astype(float)


def write_conserved_dump(path, conserved: np.ndarray) -> Path:
    return _write(Path(path), encode_conserved_dump(conserved))


def read_conserved_dump(path) -> np.ndarray:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise OutputError(f"cannot read dump ({e.strerror})", path) from e
    try:
        return decode_conserved_dump(data)
    except OutputError as e:
        raise OutputError(str(e), path) from e


def format_profile(report: ProfileReport) -> str:
    return report.to_table() + '\n\n[profile]\n' + report.to_key_values()


def _write(path: Path, payload) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(payload, bytes):
            path.write_bytes(payload)
        else:
            path.write_text(payload, encoding='utf-8')
    except OSError as e:
        raise OutputError(f"cannot write output ({e.strerror})", path) from e
    return path


def emit_outputs(conserved: np.ndarray, sgrid: SpatialGrid, report: ProfileReport,
                 config: RunConfig) -> Dict[str, Path]:
    """Write the line-out CSV, the conserved dump and the profile under config.out_dir."""
    out_dir = Path(config.out_dir)
    paths = {
        'csv': _write(out_dir / CSV_NAME, format_lineout_csv(diagonal_lineout(conserved, sgrid))),
        'dump': write_conserved_dump(out_dir / DUMP_NAME, conserved),
        'profile': _write(out_dir / PROFILE_NAME, format_profile(report)),
        'config': _write(out_dir / 'run.cfg', config.to_config().serialize()),
    }
    for kind, path in paths.items():
        logger.info(f"Wrote {kind} to {path}")
    return paths


def lineout_from_dump(path, sgrid: SpatialGrid) -> str:
    """CSV text recomputed from a dump file."""
    return format_lineout_csv(diagonal_lineout(read_conserved_dump(path), sgrid))
