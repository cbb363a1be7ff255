"""Joint (h-BN, SiO2) thickness map for an even flake on SiO2/Au and its optima."""

import sys

import numpy as np

from shgstack.materials import default_library
from shgstack.stack import hbn_on_sio2_gold
from shgstack.sweep import SweepTemplate, dominant_optimum, find_optima, sweep_2d


def main(workers=4):
    lib = default_library()
    tpl = SweepTemplate(hbn_on_sio2_gold(10.0, 50.0, "even"), parity="even")
    res = sweep_2d(tpl, lib, "hbn_thickness", "sio2_thickness", np.arange(1.0, 201.0, 2.0),
                   np.arange(0.0, 201.0, 2.0), workers=int(workers))
    opts = find_optima(res)
    for o in opts:
        tag = "boundary" if o.is_boundary else "interior"
        print(f"h-BN {o.refined_location[0]:6.1f} nm  SiO2 {o.refined_location[1]:6.1f} nm  "
              f"I = {o.value:.4g}  ({tag})")
    best = dominant_optimum(opts)
    if best is not None:
        print("dominant:", tuple(round(v, 1) for v in best.refined_location))


if __name__ == "__main__":
    main(*sys.argv[1:])
