"""Grid container and CSV/PGM serialization round trips."""

import math

import numpy as np
import pytest

from ftme.fieldio import (
    FieldIOError,
    Grid2D,
    ScalarField2D,
    export_csv,
    export_pgm,
    import_csv,
)


def _grid():
    return Grid2D(-1.0, 2.0, 0.0, 1.0, 4, 3)


def _field(values=None, mask=None):
    g = _grid()
    if values is None:
        gen = np.random.Generator(np.random.Philox(key=42))
        values = gen.normal(size=(g.nx, g.ny))
    if mask is None:
        mask = np.ones((g.nx, g.ny), bool)
    return ScalarField2D(g, values, mask)


def test_grid_geometry():
    g = _grid()
    assert g.dx == pytest.approx(1.0)
    assert g.dy == pytest.approx(0.5)
    assert g.node(0, 0) == (-1.0, 0.0)
    assert g.node(3, 2) == (2.0, 1.0)
    nodes = g.nodes()
    assert nodes.shape == (12, 2)
    # row-major: x index outer, y index inner
    assert np.array_equal(nodes[0], [-1.0, 0.0])
    assert np.array_equal(nodes[1], [-1.0, 0.5])
    assert np.array_equal(nodes[3], [0.0, 0.0])


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid2D(0.0, 0.0, 0.0, 1.0, 4, 3)
    with pytest.raises(ValueError):
        Grid2D(0.0, 1.0, 0.0, 1.0, 1, 3)


def test_scalar_field_validation():
    g = _grid()
    with pytest.raises(ValueError):
        ScalarField2D(g, np.zeros((3, 4)), np.ones((5, 5), bool))
    vals = np.zeros((4, 3))
    vals[0, 0] = np.nan
    with pytest.raises(ValueError):
        ScalarField2D(g, vals, np.ones((4, 3), bool))
    # NaN under the mask is acceptable
    mask = np.ones((4, 3), bool)
    mask[0, 0] = False
    fld = ScalarField2D(g, vals, mask)
    assert fld.valid_min() == 0.0


def test_csv_round_trip_is_bit_exact(tmp_path):
    fld = _field()
    path = tmp_path / "field.csv"
    export_csv(fld, path)
    back = import_csv(path)
    assert np.array_equal(back.values, fld.values)
    assert np.array_equal(back.mask, fld.mask)
    assert back.grid == fld.grid


def test_csv_masked_nodes(tmp_path):
    mask = np.ones((4, 3), bool)
    mask[2, 1] = False
    vals = np.arange(12, dtype=float).reshape(4, 3)
    fld = _field(vals, mask)
    path = tmp_path / "field.csv"
    export_csv(fld, path)
    text = path.read_text().splitlines()
    assert text[0] == "x,y,value,valid"
    masked_line = text[1 + 2 * 3 + 1]
    # masked values are written as the valid maximum with valid = 0
    assert masked_line.endswith(",0")
    assert masked_line.split(",")[2] == format(fld.valid_max(), ".17g")
    back = import_csv(path)
    assert not back.mask[2, 1]


def test_csv_import_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("not,a,header\n")
    with pytest.raises(FieldIOError):
        import_csv(p)
    p.write_text("x,y,value,valid\n0,0,1,1\n0,1,abc,1\n")
    with pytest.raises(FieldIOError) as err:
        import_csv(p)
    assert "3" in str(err.value)  # failing line number is reported
    # non-grid coordinates
    p.write_text("x,y,value,valid\n0,0,1,1\n0,1,1,1\n1,0,1,1\n2,1,1,1\n")
    with pytest.raises(FieldIOError):
        import_csv(p)


def test_pgm_orientation_and_scaling(tmp_path):
    g = _grid()
    nodes = g.nodes()
    vals = nodes[:, 1].reshape(g.nx, g.ny)  # increases with y
    fld = ScalarField2D(g, vals, np.ones((g.nx, g.ny), bool))
    path = tmp_path / "field.pgm"
    export_pgm(fld, path)
    raw = path.read_bytes()
    header = f"P5\n{g.nx} {g.ny}\n255\n".encode()
    assert raw.startswith(header)
    img = np.frombuffer(raw[len(header):], dtype=np.uint8)
    img = img.reshape(g.ny, g.nx)
    # image row 0 is the maximum-y grid row
    assert (img[0] == 255).all()
    assert (img[-1] == 0).all()


def test_pgm_masked_and_constant(tmp_path):
    g = _grid()
    mask = np.ones((g.nx, g.ny), bool)
    mask[0, 2] = False  # x index 0, max y -> image row 0, column 0
    fld = ScalarField2D(g, np.full((g.nx, g.ny), 7.5), mask)
    path = tmp_path / "const.pgm"
    export_pgm(fld, path)
    raw = path.read_bytes()
    header = f"P5\n{g.nx} {g.ny}\n255\n".encode()
    img = np.frombuffer(raw[len(header):], dtype=np.uint8).reshape(g.ny, g.nx)
    assert img[0, 0] == 0  # masked renders black
    rest = np.delete(img.ravel(), 0)
    assert (rest == 128).all()  # constant maps to mid-gray


def test_pgm_clip_validation(tmp_path):
    fld = _field()
    with pytest.raises(ValueError):
        export_pgm(fld, tmp_path / "x.pgm", clip=(1.0, 1.0))
    export_pgm(fld, tmp_path / "y.pgm", clip=(-10.0, 10.0))
    assert (tmp_path / "y.pgm").exists()
