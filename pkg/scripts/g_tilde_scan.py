"""Normalised average coupling g-tilde of the solved string versus frequency.

    python3 scripts/g_tilde_scan.py --ions 5 --lo 400 --hi 620
"""

import argparse

import numpy as np

from ioncavity import chain, coupling
from ioncavity.config import angular_to_khz, khz_to_angular, make_config
from ioncavity.reproduce import DOPPLER_T


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--ions", type=int, default=5)
    parser.add_argument("--lo", type=float, default=400.0, help="kHz")
    parser.add_argument("--hi", type=float, default=620.0, help="kHz")
    parser.add_argument("--points", type=int, default=441)
    parser.add_argument("--temp-td", type=float, default=1.72)
    args = parser.parse_args()

    cfg = make_config(40.0, {"num_ions": args.ions})
    freqs = np.linspace(args.lo, args.hi, args.points)
    u = chain.dimensionless_equilibrium(args.ions)
    g = np.array([coupling.optimise_mean_coupling(u * chain.length_scale(cfg, khz_to_angular(f)),
                                                  cfg.wavenumber)[1] for f in freqs])
    i = int(np.argmax(g))
    print(f"grid best: {g[i]:.5f} at {freqs[i]:.2f} kHz")
    best = coupling.optimise_frequency(cfg, args.temp_td * DOPPLER_T,
                                       (khz_to_angular(args.lo), khz_to_angular(args.hi)), "max-g-tilde")
    half = cfg.wavelength / 2
    print(f"refined:   {best.value:.5f} at {angular_to_khz(best.frequency):.3f} kHz, "
          f"spacings {np.round(best.solution.spacings / half, 2)} x lambda/2, V = {best.visibility:.3f}")


if __name__ == "__main__":
    main()
