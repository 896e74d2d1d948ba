"""Placement calibration per preset: hidden-node fraction, in-band fraction and attempts."""
import argparse
from statistics import mean

from coexist_sim.scenario import derive_seed, make_topology
from coexist_sim.topology import PRESETS


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--drops", type=int, default=20)
    args = ap.parse_args()
    for name in sorted(PRESETS):
        topos = [make_topology(name, derive_seed(0, 1.0, d)) for d in range(args.drops)]
        print(f"{name:>9}: calibration fraction {mean(t.calibration_fraction for t in topos):.3f}, "
              f"band fraction {mean(t.band_fraction for t in topos):.3f}, "
              f"attempts {mean(t.attempts for t in topos):.1f} (max {max(t.attempts for t in topos)})")


if __name__ == "__main__":
    main()
