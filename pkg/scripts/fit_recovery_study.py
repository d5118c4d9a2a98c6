"""Coverage of the (T, nu0) curve fit over many synthetic datasets.

Repeats the randomised recovery loop and reports how often the truth lies
within 1, 2, 3 and 4 standard errors, together with the pull statistics.

    python3 scripts/fit_recovery_study.py --count 300 --seed 11
"""

import argparse

import numpy as np

from ioncavity.reproduce import recovery_case


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--count", type=int, default=200)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    rows = [recovery_case(i, args.seed) for i in range(args.count)]
    pulls = np.array([[r["z_T"], r["z_nu0"]] for r in rows])
    for k in (1, 2, 3, 4):
        inside = np.mean(np.all(np.abs(pulls) <= k, axis=1))
        print(f"within {k} sigma: {inside:.3f}")
    for name, col in zip(("T", "nu0"), pulls.T):
        print(f"pull {name}: mean {col.mean():+.3f}, std {col.std(ddof=1):.3f}")
    chi2 = np.array([r["chi2_per_dof"] for r in rows])
    print(f"chi2/dof: median {np.median(chi2):.3f}")


if __name__ == "__main__":
    main()
