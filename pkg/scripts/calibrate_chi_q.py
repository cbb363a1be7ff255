"""Recompute the default chi_q_ratio and report the resulting dipole/quadrupole spread."""

import numpy as np

from shgstack import defaults
from shgstack.calibration import calibrate_chi_q_ratio, dip_quad_ratios


def main():
    value = calibrate_chi_q_ratio()
    thickness, ratios = dip_quad_ratios(value)
    print(f"calibrated chi_q_ratio = {value:.4f} (configured: {defaults.CHI_Q_RATIO})")
    print(f"|dip|/|quad| over {thickness[0]:.1f}-{thickness[-1]:.1f} nm: "
          f"min {ratios.min():.2f}, median {np.median(ratios):.2f}, max {ratios.max():.2f}")


if __name__ == "__main__":
    main()
