"""Hölder seminorm estimates of Weierstrass profiles against the number of search pairs.

The estimate is a lower bound that can only grow with the pair count; the table shows
where it settles.
"""

import argparse

from lowreg_em.drift import SpaceProfile, holder_seminorm_estimate


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--alpha", type=float, default=0.5)
    parser.add_argument("--terms", type=int, nargs="+", default=[6, 8, 12])
    parser.add_argument("--shift", type=float, default=0.3)
    args = parser.parse_args()
    counts = [1_000, 10_000, 100_000, 1_000_000]
    print("terms " + " ".join(f"{c:>12d}" for c in counts))
    for terms in args.terms:
        h = SpaceProfile.weierstrass(args.alpha, terms=terms, shift=args.shift)
        row = [holder_seminorm_estimate(h, args.alpha, pair_count=c) for c in counts]
        print(f"{terms:5d} " + " ".join(f"{v:12.6f}" for v in row))


if __name__ == "__main__":
    main()
