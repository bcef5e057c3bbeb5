"""Held-out log-likelihood of Poisson vs binarized Bernoulli InfMM on simulated count data."""
import argparse

from infrm.experiments import count_advantage_trial


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--iterations", type=int, default=400)
    args = ap.parse_args()
    wins = 0
    for seed in range(args.seeds):
        lc, lb = count_advantage_trial(seed, iterations=args.iterations, burn_in=args.iterations // 2)
        wins += lc > lb
        print(f"{seed:4d}  count {lc:10.2f}  binary {lb:10.2f}", flush=True)
    print(f"count model wins {wins}/{args.seeds}")


if __name__ == "__main__":
    main()
