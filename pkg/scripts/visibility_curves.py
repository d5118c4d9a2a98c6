"""Model visibility versus COM frequency for one to five ions.

Writes one CSV column per ion number at the fitted temperatures and prints
the local maxima of each curve.

    python3 scripts/visibility_curves.py --out curves.csv
"""

import argparse

import numpy as np

from ioncavity import coupling
from ioncavity.config import khz_to_angular, make_config
from ioncavity.reproduce import DOPPLER_T, FIT_TEMPERATURES_TD, local_maxima


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--lo", type=float, default=400.0, help="kHz")
    parser.add_argument("--hi", type=float, default=620.0, help="kHz")
    parser.add_argument("--step", type=float, default=0.25, help="kHz")
    parser.add_argument("--out", default="visibility_curves.csv")
    args = parser.parse_args()

    grid_khz = np.arange(args.lo, args.hi + 1e-9, args.step)
    grid = khz_to_angular(grid_khz)
    columns = [grid_khz]
    for n, t_td in FIT_TEMPERATURES_TD.items():
        v = coupling.model_visibilities(make_config(40.0, {"num_ions": n}), t_td * DOPPLER_T, grid)
        columns.append(v)
        peaks = ", ".join(f"{f:.1f}" for f in local_maxima(grid_khz, v))
        print(f"N={n} at {t_td} T_D: maxima at [{peaks}] kHz")
    header = "freq_khz," + ",".join(f"v_n{n}" for n in FIT_TEMPERATURES_TD)
    np.savetxt(args.out, np.column_stack(columns), delimiter=",", header=header, comments="", fmt="%.9g")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
