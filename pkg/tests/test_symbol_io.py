import numpy as np
import pytest

from utils.channel import OpticalField
from utils.mapping import build_frame
from utils.symbol_io import (
    FIELD_HEADER,
    SYMBOL_HEADER,
    SymbolFileError,
    read_field_file,
    read_symbol_file,
    write_field_file,
    write_symbol_file,
)


def test_header_sizes():
    assert SYMBOL_HEADER.itemsize == 32
    assert FIELD_HEADER.itemsize == 40


def test_symbol_file(tmp_path, shaped_alphabet):
    frame = build_frame(shaped_alphabet, 20, 'inter', 1000, True, seed=12, fec_block_len=500)
    path = tmp_path / 'frame.bin'
    write_symbol_file(frame, path)
    assert path.stat().st_size == 32 + 1000 * 32

    data = read_symbol_file(path)
    np.testing.assert_array_equal(data['symbols_x'], frame.symbols_x)
    np.testing.assert_array_equal(data['symbols_y'], frame.symbols_y)
    assert data['n'] == 20
    assert data['pairing_mode'] == 'inter'
    assert data['interleaved'] is True
    assert data['seed'] == 12


def test_field_file(tmp_path, rng):
    x = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    field = OpticalField(x=x, y=None, sample_rate=256e9, center_offset=5e9, symbol_gain=0.25)
    path = tmp_path / 'field.bin'
    write_field_file(field, path)

    restored = read_field_file(path)
    assert not restored.dual_polarization
    np.testing.assert_array_equal(restored.x, x)
    assert restored.sample_rate == 256e9
    assert restored.center_offset == 5e9
    assert restored.symbol_gain == 0.25


def test_bad_magic(tmp_path, shaped_alphabet):
    path = tmp_path / 'frame.bin'
    write_symbol_file(build_frame(shaped_alphabet, 10, 'intra', 100, False, seed=1), path)
    with pytest.raises(SymbolFileError, match='bad magic'):
        read_field_file(path)


def test_truncated_file(tmp_path, shaped_alphabet):
    path = tmp_path / 'frame.bin'
    write_symbol_file(build_frame(shaped_alphabet, 10, 'intra', 100, False, seed=1), path)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(SymbolFileError, match='expected 400'):
        read_symbol_file(path)
    path.write_bytes(b'CCQF')
    with pytest.raises(SymbolFileError, match='header'):
        read_symbol_file(path)
