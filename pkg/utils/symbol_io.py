"""
Binary files for symbol frames and optical fields.

Both formats are a fixed little-endian header followed by float64 samples
interleaved as (re_x, im_x, re_y, im_y).

Symbol file header (32 bytes):
    magic b'CCQF' | version u2 | pairing u1 | interleaved u1 | symbols u8 | n u4 | pad u4 | seed i8

Field file header (40 bytes):
    magic b'CCOF' | version u2 | dual u1 | pad u1 | samples u8 | sample_rate f8 | center_offset f8 | symbol_gain f8
"""

import logging
from pathlib import Path
from typing import Union

import numpy as np

from utils.channel import OpticalField
from utils.mapping import QamFrame

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
SYMBOL_MAGIC = b'CCQF'
FIELD_MAGIC = b'CCOF'

PAIRING_CODES = {'intra': 0, 'inter': 1, 'uniform': 2, 'external': 255}
PAIRING_NAMES = {v: k for k, v in PAIRING_CODES.items()}

SYMBOL_HEADER = np.dtype([
    ('magic', 'S4'), ('version', '<u2'), ('pairing', 'u1'), ('interleaved', 'u1'),
    ('symbols', '<u8'), ('n', '<u4'), ('pad', '<u4'), ('seed', '<i8'),
])

FIELD_HEADER = np.dtype([
    ('magic', 'S4'), ('version', '<u2'), ('dual', 'u1'), ('pad', 'u1'),
    ('samples', '<u8'), ('sample_rate', '<f8'), ('center_offset', '<f8'), ('symbol_gain', '<f8'),
])

PathLike = Union[str, Path]


class SymbolFileError(ValueError):
    """File is truncated, has a wrong magic or an unsupported version."""


def _interleave(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.empty((x.size, 4), dtype='<f8')
    out[:, 0], out[:, 1] = x.real, x.imag
    out[:, 2], out[:, 3] = y.real, y.imag
    return out


def _read_header(raw: bytes, dtype: np.dtype, magic: bytes, path: PathLike) -> np.void:
    if len(raw) < dtype.itemsize:
        raise SymbolFileError(f"{path}: file shorter than its {dtype.itemsize}-byte header")
    header = np.frombuffer(raw[:dtype.itemsize], dtype=dtype)[0]
    if header['magic'] != magic:
        raise SymbolFileError(f"{path}: bad magic {header['magic']!r}, expected {magic!r}")
    if header['version'] != FORMAT_VERSION:
        raise SymbolFileError(f"{path}: unsupported format version {header['version']}")
    return header


def _read_samples(raw: bytes, offset: int, count: int, path: PathLike) -> np.ndarray:
    body = np.frombuffer(raw[offset:], dtype='<f8')
    if body.size != 4 * count:
        raise SymbolFileError(f"{path}: expected {4 * count} float64 values, found {body.size}")
    return body.reshape(count, 4)


def write_symbol_file(frame: QamFrame, path: PathLike) -> None:
    header = np.zeros(1, dtype=SYMBOL_HEADER)
    header['magic'] = SYMBOL_MAGIC
    header['version'] = FORMAT_VERSION
    header['pairing'] = PAIRING_CODES.get(frame.pairing_mode, PAIRING_CODES['external'])
    header['interleaved'] = int(frame.interleaved)
    header['symbols'] = len(frame)
    header['n'] = frame.block_length_n
    header['seed'] = -1 if frame.seed is None else frame.seed
    with open(path, 'wb') as fh:
        fh.write(header.tobytes())
        fh.write(_interleave(frame.symbols_x, frame.symbols_y).tobytes())
    logger.info(f"Wrote {len(frame)} symbols to {path}")


def read_symbol_file(path: PathLike) -> dict:
    """
    Read a symbol file.

    Returns:
        Dict with symbols_x, symbols_y and the header fields n, pairing_mode,
        interleaved and seed (None when not recorded)

    Raises:
        SymbolFileError: On a malformed file
    """
    raw = Path(path).read_bytes()
    header = _read_header(raw, SYMBOL_HEADER, SYMBOL_MAGIC, path)
    count = int(header['symbols'])
    samples = _read_samples(raw, SYMBOL_HEADER.itemsize, count, path)
    seed = int(header['seed'])
    return {
        'symbols_x': samples[:, 0] + 1j * samples[:, 1],
        'symbols_y': samples[:, 2] + 1j * samples[:, 3],
        'n': int(header['n']),
        'pairing_mode': PAIRING_NAMES.get(int(header['pairing']), 'external'),
        'interleaved': bool(header['interleaved']),
        'seed': None if seed < 0 else seed,
    }


def write_field_file(field: OpticalField, path: PathLike) -> None:
    """Dump a waveform for debugging; single-polarization fields store zeros for y."""
    header = np.zeros(1, dtype=FIELD_HEADER)
    header['magic'] = FIELD_MAGIC
    header['version'] = FORMAT_VERSION
    header['dual'] = int(field.dual_polarization)
    header['samples'] = len(field)
    header['sample_rate'] = field.sample_rate
    header['center_offset'] = field.center_offset
    header['symbol_gain'] = field.symbol_gain
    y = field.y if field.dual_polarization else np.zeros_like(field.x)
    with open(path, 'wb') as fh:
        fh.write(header.tobytes())
        fh.write(_interleave(field.x, y).tobytes())


def read_field_file(path: PathLike) -> OpticalField:
    raw = Path(path).read_bytes()
    header = _read_header(raw, FIELD_HEADER, FIELD_MAGIC, path)
    count = int(header['samples'])
    samples = _read_samples(raw, FIELD_HEADER.itemsize, count, path)
    x = samples[:, 0] + 1j * samples[:, 1]
    y = samples[:, 2] + 1j * samples[:, 3] if header['dual'] else None
    return OpticalField(
        x=x, y=y,
        sample_rate=float(header['sample_rate']),
        center_offset=float(header['center_offset']),
        symbol_gain=float(header['symbol_gain']),
    )
