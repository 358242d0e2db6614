"""Recompute the stopping constant C_HAT used by the dyadic decomposition.

Usage: python scripts/calibrate_c_hat.py [--corpus 10000] [--seed 0]
"""

import argparse
import time

from randhive.qdiff import C_HAT, calibrate_c_hat


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--corpus", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    t0 = time.perf_counter()
    c, worst = calibrate_c_hat(args.corpus, args.seed)
    print(f"corpus={args.corpus} seed={args.seed} min R2/S^4={worst:.6g} -> c_hat={c!r}")
    print(f"stored C_HAT={C_HAT!r} ({'matches' if c == C_HAT else 'differs'}); {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
