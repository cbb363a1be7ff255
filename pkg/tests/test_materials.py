import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shgstack.materials import (MATERIALS_ENV_VAR, MaterialError, MaterialLibrary, OpticalConstants,
                                WavelengthRangeError, default_library, index_at, load_material_table)

GOOD = b"wavelength_nm,n,k\n700,1.5,0\n800,1.6,0.1\n900,1.7,0.2\n"


def test_three_rows_load():
    mat = load_material_table(io.BytesIO(GOOD), "x")
    assert mat.wavelength_nm.size == 3
    assert index_at(mat, 800) == complex(1.6, 0.1)


@pytest.mark.parametrize("body, message", [
    (b"wavelength_nm,n,k\n900,1.5,0\n800,1.6,0\n", "increasing"),
    (b"wavelength_nm,n,k\n800,1.5,0\n900,1.6,-0.1\n", "negative extinction"),
    (b"wavelength_nm,n,k\n800,0,0\n900,1.6,0\n", "n must be > 0"),
    (b"wavelength_nm,n,k\n800,1.5,0\n", "at least 2"),
    (b"wavelength_nm,n,k\n800,1.5\n900,1.6,0\n", "malformed row"),
    (b"wavelength_nm,n,k\n800,abc,0\n900,1.6,0\n", "malformed row"),
    (b"lambda,n,k\n800,1.5,0\n900,1.6,0\n", "header"),
])
def test_invalid_tables_rejected(body, message):
    with pytest.raises(MaterialError, match=message):
        load_material_table(body)


def test_provenance_comment_kept():
    mat = load_material_table(b"# handbook table\n" + GOOD)
    assert mat.provenance == "handbook table"


def test_midpoint_interpolation():
    mat = load_material_table(b"wavelength_nm,n,k\n800,1.5,0\n900,1.6,0\n")
    assert index_at(mat, 850) == pytest.approx(1.55 + 0j, abs=1e-15)


def test_no_extrapolation():
    mat = load_material_table(GOOD)
    with pytest.raises(WavelengthRangeError):
        index_at(mat, 650)
    with pytest.raises(WavelengthRangeError):
        index_at(mat, 900.0001)
    assert index_at(mat, 700) == complex(1.5, 0)   # inclusive ends
    assert index_at(mat, 900) == complex(1.7, 0.2)


def test_bundled_library(lib):
    for name in ("Au", "Ti", "SiO2", "Si", "h-BN", "NbOCl2", "vacuum"):
        assert name in lib
    assert lib.index("vacuum", 890) == 1 + 0j
    n = lib.index("SiO2", 890).real
    assert n == pytest.approx(1.45, abs=0.01)
    # quarter-wave oxide for the 890 nm pump lands near 153 nm
    assert 890 / (4 * n) == pytest.approx(153, abs=2)
    assert lib.index("Au", 890).imag > 5   # good metal


def test_bundled_tables_cover_pump_and_harmonic_bands(lib):
    for name in lib.names():
        lo, hi = lib[name].wavelength_range
        assert lo <= 390 and hi >= 910, name


def test_vacuum_is_exactly_one_everywhere(lib):
    vac = lib["vacuum"]
    for wl in np.linspace(*vac.wavelength_range, 37):
        assert index_at(vac, wl) == 1 + 0j


def test_override_directory(tmp_path, monkeypatch):
    (tmp_path / "SiO2.csv").write_bytes(b"wavelength_nm,n,k\n300,2.0,0\n2000,2.0,0\n")
    (tmp_path / "glass.csv").write_bytes(b"wavelength_nm,n,k\n300,1.5,0\n2000,1.5,0\n")
    monkeypatch.setenv(MATERIALS_ENV_VAR, str(tmp_path))
    lib = default_library()
    assert lib.index("SiO2", 890) == 2 + 0j
    assert lib.index("glass", 890) == 1.5 + 0j
    assert "Au" in lib


def test_missing_override_directory(tmp_path):
    with pytest.raises(MaterialError):
        default_library(tmp_path / "nope")


def test_duplicate_names_rejected():
    a = OpticalConstants.constant("a", 1.5)
    with pytest.raises(MaterialError):
        MaterialLibrary.from_tables([a, a])


def test_constants_are_read_only():
    mat = load_material_table(GOOD)
    with pytest.raises(ValueError):
        mat.n[0] = 3.0


tables = st.lists(st.tuples(st.floats(1.0, 4.0), st.floats(0.0, 3.0)), min_size=2, max_size=8).flatmap(
    lambda rows: st.tuples(st.just(rows),
                           st.lists(st.floats(1.0, 50.0), min_size=len(rows), max_size=len(rows))))


@given(tables, st.floats(0.0, 1.0))
def test_interpolation_bracketed_and_exact_at_nodes(table, frac):
    rows, steps = table
    wl = 300 + np.cumsum(steps)
    mat = OpticalConstants("t", wl, [r[0] for r in rows], [r[1] for r in rows])
    for i, w in enumerate(wl):
        assert index_at(mat, w) == complex(rows[i][0], rows[i][1])
    j = int(frac * (wl.size - 2))
    w = wl[j] + frac * (wl[j + 1] - wl[j])
    v = index_at(mat, w)
    lo_n, hi_n = sorted((rows[j][0], rows[j + 1][0]))
    lo_k, hi_k = sorted((rows[j][1], rows[j + 1][1]))
    assert lo_n - 1e-12 <= v.real <= hi_n + 1e-12
    assert lo_k - 1e-12 <= v.imag <= hi_k + 1e-12


@given(st.floats(1.0, 3.0), st.floats(1.0, 3.0), st.floats(0.0, 1.0))
def test_interpolation_is_linear(n1, n2, frac):
    mat = OpticalConstants("t", [800, 900], [n1, n2], [0, 0])
    assert index_at(mat, 800 + 100 * frac).real == pytest.approx(n1 + frac * (n2 - n1), abs=1e-12)
