"""Joint-distribution check of every sampler kernel; prints the worst |z| per case."""
import argparse
import time

import numpy as np

from infrm.geweke import GEWEKE_CASES, run_geweke


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=10000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    for model, family in GEWEKE_CASES:
        t = time.time()
        res = run_geweke(model, family, samples=args.samples, seed=args.seed)
        worst = res.names[int(np.argmax(np.abs(res.z)))]
        print(f"{model:7s} {family:6s} max|z| {res.max_abs_z:5.2f} ({worst})  {time.time() - t:6.1f}s")


if __name__ == "__main__":
    main()
