"""Collision rate of each multi-carrier LBT option against a single-carrier rival."""
import argparse
from statistics import mean

from coexist_sim.kernel import MS
from coexist_sim.multichannel import OPTIONS, collision_trial


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--duration-ms", type=float, default=1000.0)
    args = ap.parse_args()
    for opt in OPTIONS:
        rates = [collision_trial(opt, s, round(args.duration_ms * MS)) for s in range(args.seeds)]
        print(f"{opt}: collision rate {mean(rates):.3f} (min {min(rates):.3f}, max {max(rates):.3f})")


if __name__ == "__main__":
    main()
