"""Sweep lambda for one preset and print mean UPT, rho, BO and outage per rate.

    python3 scripts/run_sweep.py --preset indoor5 --drops 4 --duration 10
"""
import argparse
from statistics import mean

from coexist_sim.config import DEFAULT_SWEEP
from coexist_sim.scenario import RunSpec, derive_seed, run_single
from coexist_sim.wifi import WifiConfig


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--preset", default="indoor5")
    ap.add_argument("--lambda", dest="lam", type=float, nargs="+", default=DEFAULT_SWEEP)
    ap.add_argument("--drops", type=int, default=4)
    ap.add_argument("--duration", type=float, default=10.0)
    ap.add_argument("--wifi-ed", type=float, default=None, help="override the Wi-Fi ED threshold (dBm)")
    args = ap.parse_args()
    wifi = WifiConfig() if args.wifi_ed is None else WifiConfig(ed_threshold=args.wifi_ed)

    cols = ["lambda", "nru_dl", "wifi_dl", "wifi_ul", "rho_nru", "rho_wifi", "bo_nru", "bo_wifi", "wifi_outage"]
    print(" ".join(f"{c:>10}" for c in cols))
    for lam in args.lam:
        runs = [run_single(RunSpec(args.preset, lam, derive_seed(0, lam, d), args.duration, d, wifi=wifi,
                                   keep_latency=False)) for d in range(args.drops)]
        row = [lam,
               mean(m.mean_upt("nru", "dl") for m in runs) / 1e6,
               mean(m.mean_upt("wifi", "dl") for m in runs) / 1e6,
               mean(m.mean_upt("wifi", "ul") for m in runs) / 1e6,
               mean(m.rho["nru"] or 0.0 for m in runs),
               mean(m.rho["wifi"] or 0.0 for m in runs),
               mean(m.bo["nru"] for m in runs),
               mean(m.bo["wifi"] for m in runs),
               mean(m.outage_fraction("wifi") for m in runs)]
        print(" ".join(f"{v:>10.3f}" for v in row), flush=True)


if __name__ == "__main__":
    main()
