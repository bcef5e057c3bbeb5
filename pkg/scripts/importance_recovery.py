"""Recovered importance of a driving attribute vs a neutral one (smaller means more influence)."""
import argparse

from infrm.experiments import importance_trial


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10)
    args = ap.parse_args()
    hits = 0
    for seed in range(args.seeds):
        imp = importance_trial(seed)
        hits += imp[0] < imp[1]
        print(f"{seed:4d}  log importance driver {imp[0]:7.3f}  neutral {imp[1]:7.3f}", flush=True)
    print(f"driver ranked first {hits}/{args.seeds}")


if __name__ == "__main__":
    main()
