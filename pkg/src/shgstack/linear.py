"""Normal-incidence linear transfer-matrix solver.

Time convention is exp(-i w t): a forward (downward, +z) wave is exp(+i q z),
and absorbing media have Im(n) >= 0 so fields decay into them.

Each region stores a forward amplitude referenced to its top plane and a
backward amplitude referenced to its bottom plane. Both references keep the
exponentials bounded, so thick absorbing layers do not overflow. The ambient
uses z = 0 for both; the semi-infinite substrate uses its top plane.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .materials import PERFECT_MIRROR, MaterialLibrary
from .stack import LayerStack


class DepthRangeError(ValueError):
    pass


@dataclass(frozen=True)
class LayerCoefficients:
    wavelength_nm: float
    index: np.ndarray        # complex index per region: ambient, layers..., substrate
    q: np.ndarray            # 2 pi n / lambda, 1/nm
    forward: np.ndarray      # E+ at the region's top plane
    backward: np.ndarray     # E- at the region's bottom plane
    boundaries: np.ndarray   # interface depths z_0 = 0 ... z_L
    mirror: bool = False     # substrate is an ideal mirror

    @property
    def r(self) -> complex:
        return complex(self.backward[0])

    @property
    def t(self) -> complex:
        return 0j if self.mirror else complex(self.forward[-1])

    def region_tops(self) -> np.ndarray:
        z = self.boundaries
        return np.concatenate([[0.0], z[:-1], [z[-1]]])

    def region_bottoms(self) -> np.ndarray:
        z = self.boundaries
        return np.concatenate([[0.0], z[1:], [z[-1]]])

    def region_of(self, z: np.ndarray) -> np.ndarray:
        """Region index for each depth (0 = ambient, len(index)-1 = substrate)."""
        z = np.asarray(z, dtype=float)
        return np.searchsorted(self.boundaries, z, side="right")

    def waves(self, z) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Forward part, backward part and wavevector at each depth."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        reg = self.region_of(z)
        q = self.q[reg]
        fwd = self.forward[reg] * np.exp(1j * q * (z - self.region_tops()[reg]))
        bwd = self.backward[reg] * np.exp(-1j * q * (z - self.region_bottoms()[reg]))
        return fwd, bwd, q

    def field(self, z) -> tuple[np.ndarray, np.ndarray]:
        """Total field E(z) and its analytic derivative dE/dz."""
        fwd, bwd, q = self.waves(z)
        return fwd + bwd, 1j * q * (fwd - bwd)


@dataclass(frozen=True)
class FieldProfile:
    z_grid: np.ndarray
    E: np.ndarray
    dE_dz: np.ndarray
    wavelength_nm: float

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.E) ** 2

    def at(self, z) -> tuple[np.ndarray, np.ndarray]:
        """Linear interpolation of E and dE/dz (used for prescribed test fields)."""
        z = np.asarray(z, dtype=float)
        E = np.interp(z, self.z_grid, self.E.real) + 1j * np.interp(z, self.z_grid, self.E.imag)
        dE = np.interp(z, self.z_grid, self.dE_dz.real) + 1j * np.interp(z, self.z_grid, self.dE_dz.imag)
        return E, dE

    def to_csv(self) -> str:
        lines = ["z_nm,Re_E,Im_E,Re_dEdz,Im_dEdz"]
        for z, e, d in zip(self.z_grid, self.E, self.dE_dz):
            lines.append(f"{z:.6f},{e.real:.12g},{e.imag:.12g},{d.real:.12g},{d.imag:.12g}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class StackResponse:
    r: complex
    t: complex
    R: float
    T: float
    A: float


def region_indices(stack: LayerStack, lib: MaterialLibrary, wavelength_nm: float) -> tuple[np.ndarray, bool]:
    names = [stack.ambient, *(layer.material_name for layer in stack.layers), stack.substrate]
    mirror = stack.substrate == PERFECT_MIRROR
    if stack.ambient == PERFECT_MIRROR or any(layer.material_name == PERFECT_MIRROR for layer in stack.layers):
        raise ValueError("an ideal mirror can only be used as the substrate")
    n = [lib.index(name, wavelength_nm) if not (mirror and i == len(names) - 1) else 1.0 + 0j
         for i, name in enumerate(names)]
    return np.array(n, dtype=complex), mirror


def solve_indices(n: np.ndarray, thickness_nm, wavelength_nm: float, mirror: bool = False,
                  incident: complex = 1.0) -> LayerCoefficients:
    """Solve for wave amplitudes given region indices and layer thicknesses.

    ``n`` lists ambient, layers and substrate; ``thickness_nm`` the layers only.
    Boundary conditions are continuity of E and dE/dz at every interface, an
    incident forward wave of amplitude ``incident`` in the ambient, and no
    backward wave in the substrate (or E = 0 on an ideal mirror).
    """
    n = np.asarray(n, dtype=complex)
    d = np.asarray(thickness_nm, dtype=float).reshape(-1)
    L = d.size
    if n.size != L + 2:
        raise ValueError("need one index per layer plus ambient and substrate")
    q = 2 * np.pi * n / wavelength_nm
    ph = np.exp(1j * q[1:-1] * d)  # one-pass phase of each layer

    # unknowns: r, (F_1, B_1), ..., (F_L, B_L), t   [t dropped for a mirror]
    nu = 2 * L + (1 if mirror else 2)
    A = np.zeros((nu, nu), dtype=complex)
    b = np.zeros(nu, dtype=complex)

    def col_F(j):  # region j in 1..L+1
        return 2 * j - 1

    def col_B(j):  # region j in 0..L
        return 0 if j == 0 else 2 * j

    row = 0
    for j in range(L + 1):
        below = j + 1
        # region j evaluated at its bottom plane
        if j == 0:
            a_f, a_b = 1.0, 1.0
            inc = incident
        else:
            a_f, a_b = ph[j - 1], 1.0
            inc = None
        last = below == L + 1
        if last and mirror:
            # E = 0 at the mirror surface
            if j > 0:
                A[row, col_F(j)] += a_f
            A[row, col_B(j)] += a_b
            if inc is not None:
                b[row] -= inc
            row += 1
            break
        # region `below` evaluated at its top plane
        b_f = 1.0
        b_b = 0.0 if last else ph[below - 1]
        # E continuity
        if j > 0:
            A[row, col_F(j)] += a_f
        else:
            b[row] -= inc
        A[row, col_B(j)] += a_b
        A[row, col_F(below)] -= b_f
        if not last:
            A[row, col_B(below)] -= b_b
        row += 1
        # q (F - B) continuity
        if j > 0:
            A[row, col_F(j)] += q[j] * a_f
        else:
            b[row] -= q[j] * inc
        A[row, col_B(j)] -= q[j] * a_b
        A[row, col_F(below)] -= q[below] * b_f
        if not last:
            A[row, col_B(below)] += q[below] * b_b
        row += 1

    x = np.linalg.solve(A, b)
    fwd = np.zeros(L + 2, dtype=complex)
    bwd = np.zeros(L + 2, dtype=complex)
    fwd[0] = incident
    bwd[0] = x[0]
    for j in range(1, L + 1):
        fwd[j] = x[col_F(j)]
        bwd[j] = x[col_B(j)]
    if not mirror:
        fwd[L + 1] = x[col_F(L + 1)]
    boundaries = np.concatenate([[0.0], np.cumsum(d)])
    return LayerCoefficients(float(wavelength_nm), n, q, fwd, bwd, boundaries, mirror)


def solve_linear(stack: LayerStack, lib: MaterialLibrary, wavelength_nm: float,
                 incident: complex = 1.0) -> LayerCoefficients:
    n, mirror = region_indices(stack, lib, wavelength_nm)
    d = [layer.thickness_nm for layer in stack.layers]
    return solve_indices(n, d, wavelength_nm, mirror, incident)


def field_profile(coeffs: LayerCoefficients, z_grid, margin_nm: float | None = None) -> FieldProfile:
    """Evaluate E and dE/dz analytically on ``z_grid``.

    Depths may extend into the ambient and up to ``margin_nm`` (default ten
    wavelengths) into the substrate; nothing is allowed below an ideal mirror.
    """
    z = np.asarray(z_grid, dtype=float)
    lam = coeffs.wavelength_nm
    bottom = coeffs.boundaries[-1]
    if margin_nm is None:
        margin_nm = 10 * lam
    top_limit = -10 * lam
    bottom_limit = bottom if coeffs.mirror else bottom + margin_nm
    if z.size and (z.min() < top_limit or z.max() > bottom_limit or not np.all(np.isfinite(z))):
        raise DepthRangeError(f"depths must lie in [{top_limit}, {bottom_limit}] nm")
    E, dE = coeffs.field(z)
    return FieldProfile(z, E, dE, lam)


def response_from(coeffs: LayerCoefficients) -> StackResponse:
    r, t = coeffs.r, coeffs.t
    R = abs(r) ** 2
    if coeffs.mirror:
        T = 0.0
    else:
        T = coeffs.index[-1].real / coeffs.index[0].real * abs(t) ** 2
    return StackResponse(r, t, float(R), float(T), float(1.0 - R - T))


def reflectance(stack: LayerStack, lib: MaterialLibrary, wavelength_nm: float) -> StackResponse:
    return response_from(solve_linear(stack, lib, wavelength_nm))


def layer_grid(stack: LayerStack, index: int, points_per_nm: float = 10.0, endpoint: bool = True) -> np.ndarray:
    """Uniform depth grid spanning one layer of ``stack``."""
    z0 = stack.layer_top(index)
    t = stack.layers[index].thickness_nm
    n = max(2, int(np.ceil(t * points_per_nm)) + 1)
    return np.linspace(z0, z0 + t, n, endpoint=endpoint)
