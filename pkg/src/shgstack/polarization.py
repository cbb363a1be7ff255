"""Second-order susceptibility tensors and polarization-resolved SH patterns.

Contracted (Voigt) notation: column J of the 3x6 ``d`` matrix multiplies
(E1^2, E2^2, E3^2, 2 E2 E3, 2 E1 E3, 2 E1 E2).

In-plane geometry at normal incidence:

* D3h (h-BN): crystal axes x, y in plane, z normal. ``orientation_deg`` is the
  lab angle of the crystal y axis (the d22 axis), so co-polarized maxima sit
  at orientation + k * 60 deg.
* C2 (NbOCl2): axis 1 (a) is out of plane, axes 2 (b, polar) and 3 (c) lie in
  plane. ``orientation_deg`` is the lab angle of b, so the two lobes sit at
  orientation and orientation + 180 deg.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

D3H = "D3h"
C2 = "C2"

CO = "co_polarized"
CROSS = "cross_polarized"
UNANALYZED = "unanalyzed"
ANALYZERS = (CO, CROSS, UNANALYZED)

# Voigt index -> (j, k) pairs, zero-based
_VOIGT = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)]

# tied groups for C2, written with 1-based "ij" labels
_C2_TIES = [("d14", "d25", "d36"), ("d21", "d34"), ("d16", "d23")]
_C2_FREE = {"d22"}
_C2_ALLOWED = {name for group in _C2_TIES for name in group} | _C2_FREE

# in-plane crystal axes (first, second); second is the reference axis
_IN_PLANE = {D3H: (0, 1), C2: (2, 1)}


class TensorError(ValueError):
    pass


@dataclass(frozen=True)
class Chi2Tensor:
    d: np.ndarray
    symmetry: str
    orientation_deg: float = 0.0

    def __post_init__(self):
        d = np.array(self.d, dtype=float)
        if d.shape != (3, 6):
            raise TensorError(f"d must be 3x6, got {d.shape}")
        if self.symmetry not in (D3H, C2):
            raise TensorError(f"unknown symmetry {self.symmetry!r}")
        d.setflags(write=False)
        object.__setattr__(self, "d", d)

    def coefficient(self, label: str) -> float:
        i, j = int(label[1]) - 1, int(label[2]) - 1
        return float(self.d[i, j])

    def polarization(self, E: np.ndarray) -> np.ndarray:
        """P_i = sum_J d_iJ (EE)_J for crystal-frame fields E of shape (..., 3)."""
        E = np.asarray(E)
        EE = np.stack([E[..., 0] ** 2, E[..., 1] ** 2, E[..., 2] ** 2,
                       2 * E[..., 1] * E[..., 2], 2 * E[..., 0] * E[..., 2], 2 * E[..., 0] * E[..., 1]],
                      axis=-1)
        return EE @ self.d.T

    def full(self) -> np.ndarray:
        """Full chi_ijk (symmetric in j, k) equivalent of ``d``."""
        chi = np.zeros((3, 3, 3))
        for J, (j, k) in enumerate(_VOIGT):
            chi[:, j, k] = self.d[:, J]
            chi[:, k, j] = self.d[:, J]
        return chi

    def scaled(self, factor: float) -> "Chi2Tensor":
        return Chi2Tensor(self.d * factor, self.symmetry, self.orientation_deg)

    def rotated(self, delta_deg: float) -> "Chi2Tensor":
        return Chi2Tensor(self.d, self.symmetry, self.orientation_deg + delta_deg)


def _set(d, label, value):
    d[int(label[1]) - 1, int(label[2]) - 1] = value


def make_tensor(symmetry: str, coefficients: dict[str, float] | float, orientation_deg: float = 0.0) -> Chi2Tensor:
    """Build a constraint-complete tensor.

    D3h takes a single scale ``chi0`` (or {"chi0": ...} / {"d22": ...}) and
    sets d22 = chi0, d21 = d16 = -chi0.
    C2 takes any subset of d14, d25, d36, d21, d34, d16, d23, d22; tied
    entries are filled from whichever member is given and contradictory
    members raise TensorError.
    """
    d = np.zeros((3, 6))
    if symmetry == D3H:
        if isinstance(coefficients, dict):
            keys = set(coefficients)
            if keys - {"chi0", "d22"} or len(keys) != 1:
                raise TensorError("D3h takes exactly one of chi0 / d22")
            chi0 = float(next(iter(coefficients.values())))
        else:
            chi0 = float(coefficients)
        _set(d, "d22", chi0)
        _set(d, "d21", -chi0)
        _set(d, "d16", -chi0)
        return Chi2Tensor(d, D3H, orientation_deg)

    if symmetry == C2:
        if not isinstance(coefficients, dict):
            raise TensorError("C2 coefficients must be a mapping of dIJ labels")
        unknown = set(coefficients) - _C2_ALLOWED
        if unknown:
            raise TensorError(f"entries {sorted(unknown)} must vanish for C2")
        for group in _C2_TIES:
            given = [float(coefficients[k]) for k in group if k in coefficients]
            if not given:
                continue
            if not np.allclose(given, given[0], rtol=1e-12, atol=0.0):
                raise TensorError(f"contradictory tied coefficients {group}: {given}")
            for label in group:
                _set(d, label, given[0])
        if "d22" in coefficients:
            _set(d, "d22", float(coefficients["d22"]))
        return Chi2Tensor(d, C2, orientation_deg)

    raise TensorError(f"unknown symmetry {symmetry!r}")


def nbocl2_tensor(d22: float = 1.0, d23_ratio: float = 0.1, orientation_deg: float = 0.0) -> Chi2Tensor:
    """Default NbOCl2 tensor: d22 dominant, d23 = 0.1 d22, other entries zero."""
    return make_tensor(C2, {"d22": d22, "d23": d23_ratio * d22}, orientation_deg)


@dataclass(frozen=True)
class PolarPattern:
    angles_deg: np.ndarray
    intensity: np.ndarray
    analyzer: str = CO

    def to_csv(self) -> str:
        lines = ["theta_deg,intensity"]
        lines += [f"{a:.6f},{v:.12g}" for a, v in zip(self.angles_deg, self.intensity)]
        return "\n".join(lines) + "\n"


def angle_grid(step_deg: float = 1.0) -> np.ndarray:
    n = int(round(360.0 / step_deg))
    return np.arange(n) * (360.0 / n)


def _crystal_field(symmetry: str, angles_rel_rad: np.ndarray) -> np.ndarray:
    """Unit in-plane field at angle phi from the reference (second) in-plane axis."""
    first, second = _IN_PLANE[symmetry]
    E = np.zeros(angles_rel_rad.shape + (3,))
    # the first axis sits 90 deg clockwise from the reference axis
    E[..., second] = np.cos(angles_rel_rad)
    E[..., first] = -np.sin(angles_rel_rad) if symmetry == D3H else np.sin(angles_rel_rad)
    return E


def _in_plane_unit(symmetry: str, angles_rel_rad: np.ndarray) -> np.ndarray:
    return _crystal_field(symmetry, angles_rel_rad)


def polar_pattern(tensor: Chi2Tensor, analyzer: str = CO, angles_deg=None) -> PolarPattern:
    """SH intensity versus pump polarization angle at normal incidence."""
    if analyzer not in ANALYZERS:
        raise TensorError(f"unknown analyzer {analyzer!r}")
    theta = angle_grid() if angles_deg is None else np.asarray(angles_deg, dtype=float)
    phi = np.deg2rad(theta - tensor.orientation_deg)
    E = _crystal_field(tensor.symmetry, phi)
    P = tensor.polarization(E)
    first, second = _IN_PLANE[tensor.symmetry]
    P_in = P.copy()
    P_in[..., [i for i in range(3) if i not in (first, second)]] = 0.0
    if analyzer == CO:
        a = E
    elif analyzer == CROSS:
        a = _in_plane_unit(tensor.symmetry, phi + np.pi / 2)
    else:
        return PolarPattern(theta, np.sum(P_in ** 2, axis=-1), analyzer)
    return PolarPattern(theta, np.sum(P_in * a, axis=-1) ** 2, analyzer)


# --- strain -----------------------------------------------------------------

# Photoelastic constants of the strain correction, in units of chi0 per unit
# strain magnitude. Only their sum enters the co-polarized pattern.
PHOTOELASTIC_P1 = 0.5
PHOTOELASTIC_P2 = 0.5


def strained_d3h_tensor(chi0: float, orientation_deg: float, strain_magnitude: float,
                        strain_angle_deg: float, p1: float = PHOTOELASTIC_P1,
                        p2: float = PHOTOELASTIC_P2) -> Chi2Tensor:
    """D3h tensor with a uniaxial-strain photoelastic correction.

    In complex in-plane notation (u along the maximum axis, E = E_u + i E_v),
    the unstrained response is P = chi0 conj(E)^2. Uniaxial strain
    s exp(2i phi_s) adds the two terms allowed by three-fold symmetry that are
    linear in strain:

        P = chi0 [conj(E)^2 + p1 s e^{2i phi_s} E^2 + p2 s e^{-2i phi_s} |E|^2]

    with phi_s measured from the maximum axis. The returned d matrix is the
    crystal-frame equivalent of this response.
    """
    if strain_magnitude < 0:
        raise TensorError("strain_magnitude must be >= 0")
    s = strain_magnitude
    phs = np.deg2rad(strain_angle_deg - orientation_deg)

    def response(ex, ey):
        # crystal (x, y) -> (u, v) with u = y, v = -x
        E = ey + 1j * (-ex)
        P = chi0 * (np.conj(E) ** 2 + p1 * s * np.exp(2j * phs) * E ** 2
                    + p2 * s * np.exp(-2j * phs) * abs(E) ** 2)
        pu, pv = P.real, P.imag
        return np.array([-pv, pu, 0.0])

    d = np.zeros((3, 6))
    px, py, pxy = response(1, 0), response(0, 1), response(1, 1)
    d[:, 0] = px
    d[:, 1] = py
    d[:, 5] = (pxy - px - py) / 2
    return Chi2Tensor(d, D3H, orientation_deg)


def strained_d3h_pattern(chi0: float, orientation_deg: float, strain_magnitude: float,
                         strain_angle_deg: float, angles_deg=None, analyzer: str = CO,
                         p1: float = PHOTOELASTIC_P1, p2: float = PHOTOELASTIC_P2) -> PolarPattern:
    tensor = strained_d3h_tensor(chi0, orientation_deg, strain_magnitude, strain_angle_deg, p1, p2)
    return polar_pattern(tensor, analyzer, angles_deg)


def d3h_pattern(chi0: float, orientation_deg: float, angles_deg=None, analyzer: str = CO) -> PolarPattern:
    return polar_pattern(make_tensor(D3H, chi0, orientation_deg), analyzer, angles_deg)


def c2_pattern(d22: float, orientation_deg: float, d23_ratio: float = 0.1, angles_deg=None,
               analyzer: str = CO) -> PolarPattern:
    return polar_pattern(nbocl2_tensor(d22, d23_ratio, orientation_deg), analyzer, angles_deg)
