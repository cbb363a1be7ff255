"""Tabulated complex refractive indices and their interpolation.

Tables are plain CSV files with a ``wavelength_nm,n,k`` header. Lines starting
with ``#`` before the header are kept as a provenance note. The bundled tables
live in ``shgstack/data``; setting ``SHGSTACK_MATERIALS_DIR`` to a directory of
CSV files overrides (or extends) them, matching on the file stem.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import IO, Iterable, Mapping

import numpy as np

MATERIALS_ENV_VAR = "SHGSTACK_MATERIALS_DIR"

# Ideal mirror (E = 0 at its surface). Only meaningful as a substrate; used as a
# test double for image-source checks and never interpolated.
PERFECT_MIRROR = "pec"

_HEADER = ["wavelength_nm", "n", "k"]


class MaterialError(ValueError):
    """Malformed or physically invalid optical-constant data."""


class WavelengthRangeError(ValueError):
    """Requested wavelength lies outside a material's tabulated range."""


@dataclass(frozen=True)
class OpticalConstants:
    material_name: str
    wavelength_nm: np.ndarray
    n: np.ndarray
    k: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        wl = np.array(self.wavelength_nm, dtype=float)
        n = np.array(self.n, dtype=float)
        k = np.array(self.k, dtype=float)
        if not (wl.ndim == n.ndim == k.ndim == 1 and wl.size == n.size == k.size):
            raise MaterialError(f"{self.material_name}: column lengths differ")
        if wl.size < 2:
            raise MaterialError(f"{self.material_name}: need at least 2 samples, got {wl.size}")
        if not np.all(np.isfinite(wl)) or not np.all(np.isfinite(n)) or not np.all(np.isfinite(k)):
            raise MaterialError(f"{self.material_name}: non-finite value")
        if np.any(np.diff(wl) <= 0):
            raise MaterialError(f"{self.material_name}: wavelengths must be strictly increasing")
        if np.any(n <= 0):
            raise MaterialError(f"{self.material_name}: refractive index n must be > 0")
        if np.any(k < 0):
            raise MaterialError(f"{self.material_name}: negative extinction coefficient k")
        for arr in (wl, n, k):
            arr.setflags(write=False)
        object.__setattr__(self, "wavelength_nm", wl)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "k", k)

    @property
    def wavelength_range(self) -> tuple[float, float]:
        return float(self.wavelength_nm[0]), float(self.wavelength_nm[-1])

    def covers(self, wavelength_nm: float) -> bool:
        lo, hi = self.wavelength_range
        return lo <= wavelength_nm <= hi

    @classmethod
    def constant(cls, name: str, n: float, k: float = 0.0, span=(1.0, 1.0e6)):
        """Dispersionless material, mostly useful in tests."""
        return cls(name, np.array(span, float), np.array([n, n], float), np.array([k, k], float),
                   provenance="constant index")


def load_material_table(source: IO[bytes] | IO[str] | bytes | str, name: str = "unnamed") -> OpticalConstants:
    """Parse a ``wavelength_nm,n,k`` CSV stream into validated optical constants.

    ``source`` may be a binary or text stream, or raw bytes/str content.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw

    prov, body = [], []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            if not body:
                prov.append(stripped.lstrip("#").strip())
            continue
        body.append(stripped)

    if not body:
        raise MaterialError(f"{name}: empty table")
    reader = csv.reader(io.StringIO("\n".join(body)))
    header = [h.strip() for h in next(reader)]
    if header != _HEADER:
        raise MaterialError(f"{name}: expected header {','.join(_HEADER)}, got {','.join(header)}")

    rows = []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != 3:
            raise MaterialError(f"{name}: malformed row {lineno}: {row!r}")
        try:
            rows.append([float(x) for x in row])
        except ValueError as exc:
            raise MaterialError(f"{name}: malformed row {lineno}: {row!r}") from exc

    data = np.array(rows, dtype=float).reshape(-1, 3)
    return OpticalConstants(name, data[:, 0], data[:, 1], data[:, 2], provenance="\n".join(prov))


def index_at(mat: OpticalConstants, wavelength_nm: float) -> complex:
    """Complex index n + ik, linearly interpolated in wavelength (no extrapolation)."""
    lo, hi = mat.wavelength_range
    if not (lo <= wavelength_nm <= hi):
        raise WavelengthRangeError(
            f"{mat.material_name}: {wavelength_nm} nm outside tabulated range [{lo}, {hi}] nm")
    n = np.interp(wavelength_nm, mat.wavelength_nm, mat.n)
    k = np.interp(wavelength_nm, mat.wavelength_nm, mat.k)
    return complex(n, k)


@dataclass(frozen=True)
class MaterialLibrary:
    entries: Mapping[str, OpticalConstants] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "entries", dict(self.entries))

    def __contains__(self, name: str) -> bool:
        return name in self.entries or name == PERFECT_MIRROR

    def __getitem__(self, name: str) -> OpticalConstants:
        try:
            return self.entries[name]
        except KeyError:
            raise KeyError(f"unknown material {name!r}; known: {sorted(self.entries)}") from None

    def names(self) -> list[str]:
        return sorted(self.entries)

    def index(self, name: str, wavelength_nm: float) -> complex:
        return index_at(self[name], wavelength_nm)

    def with_material(self, mat: OpticalConstants) -> "MaterialLibrary":
        entries = dict(self.entries)
        entries[mat.material_name] = mat
        return MaterialLibrary(entries)

    @classmethod
    def from_tables(cls, tables: Iterable[OpticalConstants]) -> "MaterialLibrary":
        entries: dict[str, OpticalConstants] = {}
        for t in tables:
            if t.material_name in entries:
                raise MaterialError(f"duplicate material {t.material_name!r}")
            entries[t.material_name] = t
        return cls(entries)


def _read_dir(path: Path) -> dict[str, OpticalConstants]:
    out = {}
    for csv_path in sorted(path.glob("*.csv")):
        with open(csv_path, "rb") as fh:
            out[csv_path.stem] = load_material_table(fh, name=csv_path.stem)
    return out


def default_library(override_dir: str | os.PathLike | None = None) -> MaterialLibrary:
    """Bundled tables, overlaid by ``override_dir`` or ``$SHGSTACK_MATERIALS_DIR``."""
    entries = {}
    data = resources.files("shgstack") / "data"
    for item in sorted(data.iterdir(), key=lambda p: p.name):
        if item.name.endswith(".csv"):
            stem = item.name[:-4]
            entries[stem] = load_material_table(item.read_bytes(), name=stem)
    override = override_dir if override_dir is not None else os.environ.get(MATERIALS_ENV_VAR)
    if override:
        path = Path(override)
        if not path.is_dir():
            raise MaterialError(f"materials directory {path} does not exist")
        entries.update(_read_dir(path))
    return MaterialLibrary(entries)
