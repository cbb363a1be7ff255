"""One-off calibration of the quadrupole-to-dipole coupling."""

from __future__ import annotations

import numpy as np

from .materials import MaterialLibrary, default_library
from .nonlinear import shg_intensity
from .stack import hbn_on_gold

TARGET_DIP_QUAD_RATIO = 2.5
CALIBRATION_PUMP_NM = 890.0
CALIBRATION_RANGE_NM = (30.0, 100.0)


def odd_counts(lo_nm: float, hi_nm: float, t_ml: float) -> np.ndarray:
    n = np.arange(int(np.ceil(lo_nm / t_ml)), int(np.floor(hi_nm / t_ml)) + 1)
    return n[n % 2 == 1]


def dip_quad_ratios(chi_q_ratio: float, lib: MaterialLibrary | None = None, pump_nm: float = CALIBRATION_PUMP_NM,
                    range_nm=CALIBRATION_RANGE_NM, t_ml: float = 0.333) -> tuple[np.ndarray, np.ndarray]:
    """|amp_dip| / |amp_quad| for odd-N h-BN on gold; returns (thickness_nm, ratio)."""
    lib = lib or default_library()
    counts = odd_counts(*range_nm, t_ml)
    ratios = np.empty(counts.size)
    for k, n in enumerate(counts):
        res = shg_intensity(hbn_on_gold(n * t_ml, "odd", chi_q_ratio=chi_q_ratio), lib, pump_nm)
        ratios[k] = abs(res.amp_dip) / abs(res.amp_quad)
    return counts * t_ml, ratios


def calibrate_chi_q_ratio(lib: MaterialLibrary | None = None, target: float = TARGET_DIP_QUAD_RATIO) -> float:
    """chi_q_ratio that puts the median dipole/quadrupole amplitude ratio at ``target``.

    The quadrupolar amplitude is linear in chi_q_ratio and the dipolar one does
    not depend on it, so a single evaluation at chi_q_ratio = 1 suffices.
    """
    _, ratios = dip_quad_ratios(1.0, lib)
    return float(np.median(ratios) / target)
