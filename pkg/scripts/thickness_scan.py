"""SH intensity versus flake thickness on gold and on 285 nm SiO2/Si, split by source class.

Prints the odd/even contrast and the gold/oxide gain at a few thicknesses.
"""

import numpy as np

from shgstack.materials import default_library
from shgstack.nonlinear import shg_intensity
from shgstack.stack import hbn_on_gold, hbn_on_sio2_si

T_ML = 0.333


def scan(builder, counts, lib):
    out = []
    for n in counts:
        parity = "odd" if n % 2 else "even"
        r = shg_intensity(builder(n * T_ML, parity), lib, 890.0)
        out.append((r.intensity_dip, r.intensity_quad, r.intensity_total))
    return np.array(out)


def main():
    lib = default_library()
    counts = np.arange(45, 301)   # 15-100 nm
    au = scan(hbn_on_gold, counts, lib)
    si = scan(hbn_on_sio2_si, counts, lib)
    # odd N against the even flake one monolayer thicker
    print(" N   t_nm   Au I(N)/I(N+1)   Au/Si at N+1   |dip/quad| Au")
    for n in (45, 61, 91, 151, 201, 299):
        i = n - counts[0]
        ratio = np.sqrt(au[i, 0] / au[i, 1])
        print(f"{n:3d} {n * T_ML:6.1f} {au[i, 2] / au[i + 1, 2]:15.2f} {au[i + 1, 2] / si[i + 1, 2]:14.1f} "
              f"{ratio:13.2f}")


if __name__ == "__main__":
    main()
