"""Bit-exact round-trips for the vector, matrix, and interval file formats."""

import math

import numpy as np
import pytest

from ivrepro import dataio
from ivrepro.interval import EndpointInterval, MidRadInterval
from ivrepro.matmul import FpMatrix, IntervalMatrixMR

from conftest import random_finite_array


def _special_values():
    return np.array(
        [0.0, -0.0, 5e-324, -5e-324, 2.0**-1022, 1 + 2.0**-52, -1.7976931348623157e308]
    )


def test_vector_binary_roundtrip(tmp_path, rng):
    vec = np.concatenate([random_finite_array(rng, 1000), _special_values()])
    path = tmp_path / "v.bin"
    dataio.write_vector_binary(path, vec)
    back = dataio.read_vector_binary(path)
    assert back.size == vec.size
    assert (back.view(np.uint64) == vec.view(np.uint64)).all()


def test_vector_binary_bad_length(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"\x00" * 11)
    with pytest.raises(ValueError):
        dataio.read_vector_binary(path)


def test_vector_hex_roundtrip(tmp_path, rng):
    vec = np.concatenate([random_finite_array(rng, 500), _special_values()])
    path = tmp_path / "v.txt"
    dataio.write_vector_hex(path, vec)
    back = dataio.read_vector_hex(path)
    assert (back.view(np.uint64) == vec.view(np.uint64)).all()


def test_matrix_roundtrip(tmp_path, rng):
    m = FpMatrix(random_finite_array(rng, 35).reshape(5, 7))
    path = tmp_path / "m.txt"
    dataio.write_matrix(path, m)
    back = dataio.read_matrix(path)
    assert back.same_bits(m)
    header = path.read_text().splitlines()[0]
    assert header == "5 7"


def test_matrix_bad_files(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("2 2\n0x1p+0 0x1p+0 0x1p+0\n")
    with pytest.raises(ValueError):
        dataio.read_matrix(p)
    p.write_text("nonsense\n")
    with pytest.raises(ValueError):
        dataio.read_matrix(p)


def test_interval_matrix_roundtrip(tmp_path, rng):
    mid = FpMatrix(rng.standard_normal((3, 3)))
    rad = FpMatrix(np.abs(rng.standard_normal((3, 3))))
    m = IntervalMatrixMR(mid, rad)
    dataio.write_interval_matrix(tmp_path / "mid.txt", tmp_path / "rad.txt", m)
    back = dataio.read_interval_matrix(tmp_path / "mid.txt", tmp_path / "rad.txt")
    assert back.mid.same_bits(m.mid)
    assert back.rad.same_bits(m.rad)


def test_intervals_text_roundtrip(tmp_path):
    ivs = [
        EndpointInterval(-1.0, 2.0),
        EndpointInterval(-math.inf, 0.0),
        EndpointInterval(-0.0, 5e-324),
    ]
    path = tmp_path / "ivs.txt"
    dataio.write_intervals_text(path, ivs)
    back = dataio.read_intervals_text(path)
    assert len(back) == 3
    for orig, got in zip(ivs, back):
        assert got.same_bits(orig)


def test_intervals_text_midrad(tmp_path):
    path = tmp_path / "mr.txt"
    path.write_text("<0x1.8p+0;0x1.0p-53>\n\n[0x0p+0,0x1p+0]\n")
    got = dataio.read_intervals_text(path)
    assert isinstance(got[0], MidRadInterval)
    assert got[0] == MidRadInterval(1.5, 2.0**-53)
    assert isinstance(got[1], EndpointInterval)
