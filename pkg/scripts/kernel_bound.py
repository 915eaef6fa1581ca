"""Implied constants of the heat-kernel gradient bound ||grad P_t h|| <= C [h]_alpha t^((alpha-1)/2)."""

import argparse

import numpy as np

from lowreg_em.drift import SpaceProfile
from lowreg_em.kolmogorov import kernel_bound_check


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--alpha", type=float, default=0.5)
    args = parser.parse_args()
    t_list = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2]
    x = np.linspace(-2.0, 2.0, 1601)
    profiles = {
        "capped_power": SpaceProfile.capped_power(args.alpha, 1.0),
        "weierstrass": SpaceProfile.weierstrass(args.alpha, terms=12, shift=0.3),
    }
    for name, h in profiles.items():
        rep = kernel_bound_check(h, args.alpha, t_list, x)
        consts = " ".join(f"{c:.4f}" for c in rep.constants)
        print(f"{name:14s} constants {consts}  spread {rep.spread:.3f}  {'ok' if rep.passed else 'FAIL'}")


if __name__ == "__main__":
    main()
