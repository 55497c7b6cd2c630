import numpy as np
import pytest

from quasisteady.fieldio import (
    FieldFormatError,
    atomic_write,
    read_field_binary,
    read_field_csv,
    write_field_binary,
    write_field_csv,
)
from quasisteady.halfspace import BoundaryField, DiscreteField, TangentialGrid


@pytest.fixture
def fields(rng):
    grid = TangentialGrid(2, 2, L=3.0)
    t = np.linspace(0.0, 0.5, 4)
    y = np.array([0.0, 0.1, 0.4])
    b = rng.standard_normal((4, grid.n_modes, 2)) + 1j * rng.standard_normal((4, grid.n_modes, 2))
    d = rng.standard_normal((4, grid.n_modes, 3, 1)) + 1j * rng.standard_normal((4, grid.n_modes, 3, 1))
    return BoundaryField(b, t, grid), DiscreteField(d, t, grid, y)


@pytest.mark.parametrize("which", [0, 1])
def test_binary_round_trip(tmp_path, fields, which):
    f = fields[which]
    path = tmp_path / "f.qsf"
    write_field_binary(path, f)
    g = read_field_binary(path)
    assert type(g) is type(f) and g.grid == f.grid
    np.testing.assert_array_equal(g.values, f.values)
    np.testing.assert_array_equal(g.times, f.times)


def test_binary_header_layout(tmp_path, fields):
    path = tmp_path / "f.qsf"
    write_field_binary(path, fields[0])
    raw = path.read_bytes()
    assert raw[:8] == b"QSFIELD\0" and raw[8] == 1 and raw[9] == 0
    assert int.from_bytes(raw[10:12], "little") == 2


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda r: b"XXFIELD\0" + r[8:], "magic"),
        (lambda r: r[:8] + b"\x07" + r[9:], "version"),
        (lambda r: r[:-16], "payload"),
        (lambda r: r[:10], "short"),
    ],
)
def test_binary_rejects_corruption(tmp_path, fields, mutate, message):
    path = tmp_path / "f.qsf"
    write_field_binary(path, fields[1])
    path.write_bytes(mutate(path.read_bytes()))
    with pytest.raises(FieldFormatError, match=message):
        read_field_binary(path)


@pytest.mark.parametrize("which", [0, 1])
def test_csv_round_trip(tmp_path, fields, which):
    f = fields[which]
    path = tmp_path / "f.csv"
    write_field_csv(path, f)
    g = read_field_csv(path, f.grid)
    np.testing.assert_array_equal(g.values, f.values)
    assert path.read_text().splitlines()[0] == "t,k,y,component,re,im"


def test_csv_physical_columns(tmp_path, fields):
    path = tmp_path / "p.csv"
    write_field_csv(path, fields[0], physical=True)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x,y,component,re,im"
    assert len(lines) == 1 + 4 * fields[0].grid.N ** 2 * 2


def test_csv_rejects_foreign_header(tmp_path, fields):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(FieldFormatError):
        read_field_csv(path, fields[0].grid)


def test_atomic_write_leaves_no_temporaries(tmp_path):
    path = tmp_path / "out.json"
    atomic_write(path, "{}")
    atomic_write(path, b"[]")
    assert path.read_text() == "[]"
    assert [p.name for p in tmp_path.iterdir()] == ["out.json"]
