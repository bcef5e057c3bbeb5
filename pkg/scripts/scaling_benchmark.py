"""Median InfMM sweep time as n and F grow (truncated, fixed K)."""
import argparse

from infrm.experiments import scaling_ratios


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sweeps", type=int, default=30)
    ap.add_argument("--K", type=int, default=5)
    args = ap.parse_args()
    rn, rf, (t100, t200, tF20) = scaling_ratios(args.sweeps, args.K)
    print(f"n=100 F=2   {t100 * 1e3:8.2f} ms")
    print(f"n=200 F=2   {t200 * 1e3:8.2f} ms")
    print(f"n=200 F=20  {tF20 * 1e3:8.2f} ms")
    print(f"n ratio {rn:.2f}   F ratio {rf:.2f}")


if __name__ == "__main__":
    main()
