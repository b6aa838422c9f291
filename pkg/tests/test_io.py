import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from uosc import io


def test_matrix_header_layout(tmp_path):
    X = np.arange(6.0).reshape(2, 3)
    io.write_matrix(tmp_path / "x.mat", X)
    raw = (tmp_path / "x.mat").read_bytes()
    assert raw[:4] == b"UOSM"
    assert struct.unpack("<II", raw[4:12]) == (2, 3)
    assert struct.unpack("<6d", raw[12:]) == tuple(range(6))


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(0, 5), st.integers(0, 5)),
              elements=st.floats(allow_nan=False, width=64)))
def test_matrix_roundtrip(tmp_path_factory, X):
    path = tmp_path_factory.mktemp("m") / "x.mat"
    io.write_matrix(path, X)
    assert np.array_equal(io.read_matrix(path), X)


def test_blocks_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    blocks = [rng.standard_normal((4, w)) for w in (0, 2, 3)]
    io.write_blocks(tmp_path / "b.mat", blocks)
    back = io.read_blocks(tmp_path / "b.mat")
    assert [b.shape for b in back] == [(4, 0), (4, 2), (4, 3)]
    assert all(np.array_equal(a, b) for a, b in zip(back, blocks))


def test_blocks_need_common_rows(tmp_path):
    with pytest.raises(ValueError):
        io.write_blocks(tmp_path / "b.mat", [np.zeros((2, 1)), np.zeros((3, 1))])


def test_bad_magic_and_truncation(tmp_path):
    p = tmp_path / "x.mat"
    p.write_bytes(b"XXXX" + struct.pack("<II", 1, 1) + bytes(8))
    with pytest.raises(ValueError):
        io.read_matrix(p)
    p.write_bytes(b"UOSM" + struct.pack("<II", 2, 2) + bytes(8))
    with pytest.raises(ValueError):
        io.read_matrix(p)


def test_keyvalues(tmp_path):
    p = tmp_path / "cfg.txt"
    p.write_text("# comment\nM1 = 20, 50\n\nseed=3  # trailing\n")
    assert io.read_keyvalues(p) == {"M1": "20, 50", "seed": "3"}
    p.write_text("no equals here\n")
    with pytest.raises(ValueError):
        io.read_keyvalues(p)
