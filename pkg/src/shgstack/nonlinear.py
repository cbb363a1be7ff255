"""Second-harmonic and sum-frequency emission from monolayer source sheets.

Every monolayer of a nonlinear layer is a polarization sheet driven by the
(undepleted) pump field at its centre. A sheet of polarization P at depth z_s
obeys E'' + k0^2 n^2 E = -k0^2 P delta(z - z_s) at the output wavelength, so it
launches equal up/down waves of amplitude i k0 P / (2 n_local). Their coherent
sum after all reflections in the stack, measured as the backward amplitude in
the ambient at z = 0, equals

    i k0 / (2 n_ambient) * P * E_out(z_s)

where E_out is the linear field at the output wavelength for unit illumination
from the ambient (the 1D Green's function written with its two homogeneous
solutions, Wronskian 2 i q_ambient). This is what ``radiate`` evaluates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .linear import FieldProfile, LayerCoefficients, solve_linear
from .materials import MaterialLibrary
from .stack import LayerStack, interface_positions, monolayer_positions

PrescribedField = Callable[[np.ndarray], "tuple[np.ndarray, np.ndarray]"] | FieldProfile


class NoNonlinearLayerError(ValueError):
    pass


@dataclass(frozen=True)
class SourceSheet:
    z_nm: float
    amp_dipolar: complex = 0j
    amp_quadrupolar: complex = 0j
    amp_interface: complex = 0j

    @property
    def total(self) -> complex:
        return self.amp_dipolar + self.amp_quadrupolar + self.amp_interface


@dataclass(frozen=True)
class SheetArrays:
    """Column view of a list of sheets, used for vectorised radiation."""

    z: np.ndarray
    dip: np.ndarray
    quad: np.ndarray
    inter: np.ndarray

    def to_sheets(self) -> list[SourceSheet]:
        return [SourceSheet(float(z), complex(a), complex(b), complex(c))
                for z, a, b, c in zip(self.z, self.dip, self.quad, self.inter)]

    @classmethod
    def from_sheets(cls, sheets) -> "SheetArrays":
        if isinstance(sheets, SheetArrays):
            return sheets
        return cls(np.array([s.z_nm for s in sheets], float),
                   np.array([s.amp_dipolar for s in sheets], complex),
                   np.array([s.amp_quadrupolar for s in sheets], complex),
                   np.array([s.amp_interface for s in sheets], complex))

    @classmethod
    def concat(cls, parts) -> "SheetArrays":
        parts = list(parts)
        if not parts:
            e = np.empty(0)
            return cls(e, e.astype(complex), e.astype(complex), e.astype(complex))
        return cls(*(np.concatenate([getattr(p, f) for p in parts]) for f in ("z", "dip", "quad", "inter")))


def _amp_json(a: complex) -> list[float]:
    return [float(np.real(a)), float(np.imag(a))]


@dataclass(frozen=True)
class ShgResult:
    wavelength_pump_nm: float
    wavelength_sh_nm: float
    amp_dip: complex
    amp_quad: complex
    amp_int: complex
    amp_total: complex = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "amp_total", self.amp_dip + self.amp_quad + self.amp_int)

    @property
    def intensity_total(self) -> float:
        return float(abs(self.amp_total) ** 2)

    @property
    def intensity_dip(self) -> float:
        return float(abs(self.amp_dip) ** 2)

    @property
    def intensity_quad(self) -> float:
        return float(abs(self.amp_quad) ** 2)

    @property
    def intensity_int(self) -> float:
        return float(abs(self.amp_int) ** 2)

    def to_dict(self) -> dict:
        return {
            "wavelength_pump_nm": self.wavelength_pump_nm,
            "wavelength_sh_nm": self.wavelength_sh_nm,
            "amp_total": _amp_json(self.amp_total),
            "amp_dip": _amp_json(self.amp_dip),
            "amp_quad": _amp_json(self.amp_quad),
            "amp_int": _amp_json(self.amp_int),
            "intensity_total": self.intensity_total,
            "intensity_dip": self.intensity_dip,
            "intensity_quad": self.intensity_quad,
            "intensity_int": self.intensity_int,
        }


@dataclass(frozen=True)
class SfgResult:
    wavelength_1_nm: float
    wavelength_2_nm: float
    wavelength_out_nm: float
    amp_dip: complex
    amp_quad: complex
    amp_int: complex
    amp_total: complex = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "amp_total", self.amp_dip + self.amp_quad + self.amp_int)

    @property
    def intensity(self) -> float:
        return float(abs(self.amp_total) ** 2)

    def to_dict(self) -> dict:
        return {
            "wavelength_1_nm": self.wavelength_1_nm,
            "wavelength_2_nm": self.wavelength_2_nm,
            "wavelength_out_nm": self.wavelength_out_nm,
            "amp_total": _amp_json(self.amp_total),
            "amp_dip": _amp_json(self.amp_dip),
            "amp_quad": _amp_json(self.amp_quad),
            "amp_int": _amp_json(self.amp_int),
            "intensity": self.intensity,
        }


def sum_frequency_wavelength(lambda_1: float, lambda_2: float) -> float:
    return 1.0 / (1.0 / lambda_1 + 1.0 / lambda_2)


def _field_source(stack, lib, wavelength_nm, prescribed, amplitude):
    if prescribed is None:
        coeffs = solve_linear(stack, lib, wavelength_nm, incident=amplitude)
        return coeffs.field
    if isinstance(prescribed, FieldProfile):
        return lambda z: tuple(amplitude * v for v in prescribed.at(z))

    def call(z):
        E, dE = prescribed(np.asarray(z, float))
        return (amplitude * np.broadcast_to(np.asarray(E, complex), np.shape(z)),
                amplitude * np.broadcast_to(np.asarray(dE, complex), np.shape(z)))
    return call


def _sheets_from_fields(stack: LayerStack, field_1, field_2) -> SheetArrays:
    """Sheets driven by two (possibly identical) pump fields.

    Dipolar source E1 E2, quadrupolar source (E1 dE2 + E2 dE1) / 2; for equal
    fields these reduce to E^2 and E dE/dz.
    """
    idx = stack.nonlinear_layers()
    if not idx:
        raise NoNonlinearLayerError("stack contains no nonlinear layer")
    parts = []
    for i in idx:
        layer = stack.layers[i]
        nl = layer.nonlinear
        z_top = stack.layer_top(i)
        z = monolayer_positions(layer, z_top)
        E1, d1 = field_1(z)
        E2, d2 = (E1, d1) if field_2 is field_1 else field_2(z)
        dip = nl.signs() * nl.chi_d * E1 * E2
        quad = nl.chi_q_eff * 0.5 * (E1 * d2 + E2 * d1)
        zero = np.zeros_like(dip)
        parts.append(SheetArrays(z, dip, quad, zero))
        if nl.twist_interfaces:
            zi = interface_positions(layer, z_top)
            chi = np.array([c for _, c in nl.twist_interfaces], dtype=float)
            E1i, _ = field_1(zi)
            E2i, _ = (E1i, None) if field_2 is field_1 else field_2(zi)
            zi_zero = np.zeros(zi.size, dtype=complex)
            parts.append(SheetArrays(zi, zi_zero, zi_zero, chi * E1i * E2i))
    return SheetArrays.concat(parts)


def build_source_sheets(stack: LayerStack, lib: MaterialLibrary | None, pump_nm: float,
                        prescribed_field: PrescribedField | None = None,
                        pump_amplitude: complex = 1.0) -> list[SourceSheet]:
    """One sheet per monolayer (plus one per twist interface) with its source amplitudes.

    ``prescribed_field`` replaces the solved pump field; it is either a
    FieldProfile or a callable ``z -> (E, dE/dz)``.
    """
    f = _field_source(stack, lib, pump_nm, prescribed_field, pump_amplitude)
    return _sheets_from_fields(stack, f, f).to_sheets()


def emission_kernel(stack: LayerStack, lib: MaterialLibrary, output_nm: float) -> tuple[LayerCoefficients, complex]:
    """Linear solution at the output wavelength and the sheet prefactor i k0 / (2 n_amb)."""
    coeffs = solve_linear(stack, lib, output_nm)
    k0 = 2 * np.pi / output_nm
    return coeffs, 1j * k0 / (2 * coeffs.index[0])


def radiate(stack: LayerStack, lib: MaterialLibrary, sheets, output_nm: float,
            coeffs: LayerCoefficients | None = None) -> complex:
    """Coherent reflected-side amplitude (at z = 0) radiated by ``sheets``."""
    arr = SheetArrays.from_sheets(sheets)
    return _radiate_parts(stack, lib, arr, output_nm, coeffs)[3]


def _radiate_parts(stack, lib, arr: SheetArrays, output_nm, coeffs=None):
    if coeffs is None:
        coeffs, pref = emission_kernel(stack, lib, output_nm)
    else:
        pref = 1j * (2 * np.pi / output_nm) / (2 * coeffs.index[0])
    if arr.z.size == 0:
        return 0j, 0j, 0j, 0j
    G, _ = coeffs.field(arr.z)
    G = pref * G
    dip = complex(np.sum(arr.dip * G))
    quad = complex(np.sum(arr.quad * G))
    inter = complex(np.sum(arr.inter * G))
    return dip, quad, inter, complex(np.sum((arr.dip + arr.quad + arr.inter) * G))


def shg_intensity(stack: LayerStack, lib: MaterialLibrary, pump_nm: float,
                  pump_amplitude: complex = 1.0,
                  prescribed_field: PrescribedField | None = None) -> ShgResult:
    """SH amplitude leaving the stack on the ambient side, split by source class."""
    f = _field_source(stack, lib, pump_nm, prescribed_field, pump_amplitude)
    arr = _sheets_from_fields(stack, f, f)
    sh = pump_nm / 2.0
    dip, quad, inter, _ = _radiate_parts(stack, lib, arr, sh)
    return ShgResult(float(pump_nm), sh, dip, quad, inter)


def sfg_intensity(stack: LayerStack, lib: MaterialLibrary, lambda_1: float, lambda_2: float,
                  amplitude_1: complex = 1.0, amplitude_2: complex = 1.0) -> SfgResult:
    """Sum-frequency amplitude for two independent pump waves."""
    # canonical order keeps the result bit-identical under swapping the inputs
    (l1, a1), (l2, a2) = sorted([(float(lambda_1), amplitude_1), (float(lambda_2), amplitude_2)],
                                key=lambda p: (p[0], abs(p[1])))
    f1 = _field_source(stack, lib, l1, None, a1)
    f2 = f1 if (l1 == l2 and a1 == a2) else _field_source(stack, lib, l2, None, a2)
    arr = _sheets_from_fields(stack, f1, f2)
    out = l1 / 2.0 if l1 == l2 else sum_frequency_wavelength(l1, l2)
    dip, quad, inter, _ = _radiate_parts(stack, lib, arr, out)
    return SfgResult(float(lambda_1), float(lambda_2), out, dip, quad, inter)
