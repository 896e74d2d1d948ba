"""One test per acceptance criterion; each records a PASS/FAIL line shown in the terminal summary.

Scale: ``COEXIST_ACCEPT_SCALE=full`` runs 20 drops of 30 s per point; the default
"quick" scale runs 4 drops of 10 s so the suite fits a single CPU.
"""

import csv
import dataclasses
import os
import random
from decimal import Decimal
from functools import lru_cache

import pytest
from scipy.stats import binomtest, chisquare

from coexist_sim.backoff import Backoff
from coexist_sim.config import DEFAULT_SWEEP, ExperimentPlan
from coexist_sim.kernel import MS, US, Simulator
from coexist_sim.multichannel import collision_trial
from coexist_sim.nr_phy import (HarqTimers, Numerology, allocate_interlaced, build_cot, check_ocb,
                                contiguous_allocation, harq_order_ok)
from coexist_sim.nru import CwState, NruConfig, cat4_contend, update_cw
from coexist_sim.profiles import PROFILES, contention_window, profile
from coexist_sim.scenario import RunSpec, plan_runs, run_experiment, run_single
from coexist_sim.wifi import EdcaState, WifiConfig

RESULTS = []
SCALE = os.environ.get("COEXIST_ACCEPT_SCALE", "quick")
DROPS, DURATION = (20, 30.0) if SCALE == "full" else (4, 10.0)
EIGHT_MS = 8 * MS


def record(label, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


@lru_cache(maxsize=None)
def sweep(preset, lams=tuple(DEFAULT_SWEEP), wifi_ed=None, mode="LBE"):
    wifi = WifiConfig() if wifi_ed is None else WifiConfig(ed_threshold=wifi_ed)
    plan = ExperimentPlan(preset=preset, lambda_sweep=list(lams), drops=DROPS, duration=DURATION,
                          keep_latency=False, wifi=wifi, nru=NruConfig(mode=mode))
    return run_experiment(plan)


def at(runs, lam):
    return [m for m in runs if m.lam == lam]


def avg(xs):
    xs = list(xs)
    return sum(xs) / len(xs)


# 1 --------------------------------------------------------------------------------

def test_01_parameter_tables():
    want = {"AC_VO": [4, 8, 8], "AC_VI": [8, 16, 16], "AC_BE": [16, 32, 64, 128, 256, 512, 1024, 1024],
            "AC_BK": [16, 32, 64, 128, 256, 512, 1024, 1024], "LegacyDCF": [16, 32, 64, 128, 256, 512, 1024, 1024],
            "P1": [4, 8, 8], "P2": [8, 16, 16], "P3": [16, 32, 64, 64],
            "P4": [16, 32, 64, 128, 256, 512, 1024, 1024]}
    bad = [(n, j) for n, chain in want.items() for j, w in enumerate(chain) if contention_window(profile(n), j) != w]
    record("1 parameter tables", not bad, f"{sum(map(len, want.values()))} (profile, j) values, mismatches {bad}")


# 2 --------------------------------------------------------------------------------

def test_02_idle_to_grant_timing():
    bad = []
    for name, p in PROFILES.items():
        for role in ("dl", "ul"):
            for k in (0, 3, 15):
                sim = Simulator()
                got = []
                cat4_contend(Backoff(sim, got.append), CwState(p), role, False, None, k=k)
                sim.run_until(20 * MS)
                if got != [(p.defer_us(role) + 9 * k) * US]:
                    bad.append((name, role, k, got))
    p1 = profile("P1")
    asym = (p1.defer_us("dl"), p1.defer_us("ul")) == (25, 34)
    record("2 timing", not bad and asym, f"tick-exact grants for {len(PROFILES)} profiles x 2 roles x 3 k; "
           f"P1 DL/UL defer {p1.defer_us('dl')}/{p1.defer_us('ul')} us; mismatches {bad}")


# 3 --------------------------------------------------------------------------------

def test_03_cw_adaptation():
    fb = [["NACK"] * 8 + ["ACK"] * 2, ["NACK"] * 10, ["NACK"] * 7 + ["ACK"] * 3, ["NACK"] * 4 + ["ACK"],
          ["ACK"]]
    oracle = [32, 64, 16, 32, 16]
    s = CwState(profile("P3"))
    got = [update_cw(s, f) for f in fb]
    record("3 CW adaptation", got == oracle, f"P3 over 5 COTs {got} vs oracle {oracle}")


# 4 --------------------------------------------------------------------------------

def test_04_occupancy_caps():
    runs = sweep("indoor5") + sweep("outdoor5", (DEFAULT_SWEEP[-1],))
    worst = max(max(m.max_occupancy_ns.values()) for m in runs)
    viol = sum(len(m.occupancy_violations) for m in runs)
    fbe = run_single(RunSpec("indoor5", DEFAULT_SWEEP[-1], 99, DURATION, nru=NruConfig(mode="FBE"),
                             keep_latency=False))
    fbe_bad = len(fbe.fbe_idle_violations)
    ok = viol == 0 and worst <= EIGHT_MS and fbe_bad == 0 and fbe.max_occupancy_ns["nru"] <= EIGHT_MS
    record("4 COT/TXOP caps", ok, f"{len(runs)} runs, longest occupancy {worst / MS:.3f} ms, "
           f"{viol} over-limit intervals; FBE COTs with short idle: {fbe_bad}")


# 5 --------------------------------------------------------------------------------

def test_05_harq_timing_randomized():
    rng = random.Random(2024)
    bad = 0
    for _ in range(1000):
        t = HarqTimers(d0=rng.randint(0, 2), d1=rng.randint(1, 5), d2=rng.randint(1, 4), u0=rng.randint(1, 5),
                       u1=rng.randint(1, 5))
        in_cot = rng.random() < 0.5
        c = build_cot(rng.randrange(100 * MS), Numerology(rng.choice([0, 1])), rng.choice([2, 4, 6, 8, 10]) * MS,
                      rng.randint(0, 20), rng.randint(0, 10), timers=t, in_cot_feedback=in_cot)
        for occ in c.harq:
            order = harq_order_ok(occ, t) and occ.grant_slot <= occ.data_slot < occ.feedback_slot \
                < occ.earliest_retx_slot
            inside = not in_cot or (occ.in_cot and c.first_index <= occ.grant_slot
                                    and occ.feedback_slot <= c.last_index)
            bad += not (order and inside)
    record("5 HARQ timing", bad == 0, f"1000 random COT builds, {bad} ordering/boundary violations")


# 6 --------------------------------------------------------------------------------

def test_06_ocb():
    num = Numerology(0)
    allocs = [allocate_interlaced(list(range(n)), 20, num) for n in range(1, 11)]
    all_ok = all(check_ocb(a, 20.0) for a in allocs)
    option1 = contiguous_allocation("ue", 0, 106 // 4, 20, num)
    rejected = not check_ocb(option1, 20.0)
    m = run_single(RunSpec("indoor5", 1.0, 7, 2.0, keep_latency=False))
    emitted = m.extra["ocb_checked"]
    record("6 OCB", all_ok and rejected and emitted > 0,
           f"interlaced 1..10 UEs pass; contiguous quarter {option1.occupied_span:.2f} MHz rejected; "
           f"{emitted} UL emissions checked in-run")


# 7 --------------------------------------------------------------------------------

def test_07_backoff_uniformity():
    detail, ok = [], True
    for name, j in (("AC_BE", 0), ("P3", 2)):
        sim = Simulator(5)
        rng = sim.stream("accept", name)
        if name == "AC_BE":
            e = EdcaState(sim, profile(name), rng, lambda t: None)
            e.j = j
            draws = [e.draw() for _ in range(100_000)]
            cw = e.window
        else:
            s = CwState(profile(name))
            s.current_cw = cw = contention_window(profile(name), j)
            draws = [s.draw(rng) for _ in range(100_000)]
        counts = [draws.count(i) for i in range(cw)]
        p = chisquare(counts).pvalue
        ok &= p > 0.01
        detail.append(f"{name} j={j} CW={cw} p={p:.3f}")
    record("7 backoff uniformity", ok, "; ".join(detail))


# 8 --------------------------------------------------------------------------------

def test_08_multichannel_ordering():
    dur = 1000 * MS
    rates = {o: [collision_trial(o, 1000 + d, dur) for d in range(20)] for o in ("Opt2", "Opt3", "Opt4")}
    out, ok = [], True
    for other in ("Opt2", "Opt3"):
        wins = sum(a > b for a, b in zip(rates["Opt4"], rates[other]))
        losses = sum(a < b for a, b in zip(rates["Opt4"], rates[other]))
        p = binomtest(wins, wins + losses, 0.5, alternative="greater").pvalue if wins + losses else 1.0
        ok &= p < 0.05 and avg(rates["Opt4"]) >= avg(rates[other])
        out.append(f"Opt4 {avg(rates['Opt4']):.3f} vs {other} {avg(rates[other]):.3f} (sign test p={p:.2g})")
    record("8 multichannel collisions", ok, "; ".join(out))


# 9 --------------------------------------------------------------------------------

def indoor_high():
    runs = sweep("indoor5")
    return at(runs, max(DEFAULT_SWEEP))


def test_09a_indoor_upt():
    hi = indoor_high()
    n, w = avg(m.mean_upt("nru", "dl") for m in hi), avg(m.mean_upt("wifi", "dl") for m in hi)
    record("9a indoor DL UPT NR-U > Wi-Fi", n > w, f"lambda={max(DEFAULT_SWEEP)}: NR-U {n / 1e6:.2f} vs "
           f"Wi-Fi {w / 1e6:.2f} Mb/s")


def test_09b_indoor_rho():
    hi = indoor_high()
    n, w = avg(m.rho["nru"] for m in hi), avg(m.rho["wifi"] for m in hi)
    record("9b indoor rho NR-U > Wi-Fi", n > w, f"lambda={max(DEFAULT_SWEEP)}: NR-U {n:.3f} vs Wi-Fi {w:.3f}")


def test_09c_indoor_bo():
    hi = indoor_high()
    n, w = avg(m.bo["nru"] for m in hi), avg(m.bo["wifi"] for m in hi)
    record("9c indoor BO NR-U >= Wi-Fi", n >= w, f"lambda={max(DEFAULT_SWEEP)}: NR-U {n:.3f} vs Wi-Fi {w:.3f}")


def test_09d_wifi_zero_throughput_users():
    hi = indoor_high()
    frac = avg(m.outage_fraction("wifi") for m in hi)
    record("9d Wi-Fi zero-throughput users >= 15%", frac >= 0.15, f"{frac:.3f} of Wi-Fi users")


def test_09e_light_load_utilisation():
    lo = at(sweep("indoor5"), min(DEFAULT_SWEEP))
    n, w = avg(m.rho["nru"] for m in lo), avg(m.rho["wifi"] for m in lo)
    record("9e light-load rho >= 0.9 both", n >= 0.9 and w >= 0.9,
           f"lambda={min(DEFAULT_SWEEP)}: NR-U {n:.3f}, Wi-Fi {w:.3f}")


# 10 -------------------------------------------------------------------------------

def test_10_outdoor_uplink_beats_nru():
    lam = max(DEFAULT_SWEEP)
    base = sweep("outdoor5", (lam,))
    ctrl = sweep("outdoor5", (lam,), wifi_ed=-72.0)
    n, w = avg(m.mean_upt("nru", "dl") for m in base), avg(m.mean_upt("wifi", "ul") for m in base)
    cn, cw = avg(m.mean_upt("nru", "dl") for m in ctrl), avg(m.mean_upt("wifi", "ul") for m in ctrl)
    gap, cgap = w - n, cw - cn
    record("10 outdoor Wi-Fi UL > NR-U DL, gap shrinks at equal ED", w > n and cgap < gap,
           f"Wi-Fi UL {w / 1e6:.2f} vs NR-U DL {n / 1e6:.2f} Mb/s (gap {gap / 1e6:+.2f}); "
           f"equal -72 dBm ED gap {cgap / 1e6:+.2f}")


# 11 -------------------------------------------------------------------------------

def peak_ratio(preset):
    runs = sweep(preset)
    lams = sorted({m.lam for m in runs})
    peak_n = max(avg(m.mean_upt("nru") for m in at(runs, l)) for l in lams)
    peak_w = max(avg(m.mean_upt("wifi") for m in at(runs, l)) for l in lams)
    return peak_n / peak_w


def test_11_six_ghz_ratio():
    r5, r6 = peak_ratio("indoor5"), peak_ratio("indoor6")
    record("11 6 GHz ratio - 5 GHz ratio >= 0.1", r6 - r5 >= 0.1, f"indoor6 {r6:.2f}, indoor5 {r5:.2f}")


# 12 -------------------------------------------------------------------------------

def test_12_metric_identities(tmp_path):
    plan = ExperimentPlan(lambda_sweep=[1.0, 2.5], drops=2, duration=2.0)
    runs = run_experiment(plan, tmp_path / "a")
    run_experiment(plan, tmp_path / "b")
    bad_lat = sum(r.tp != r.tq + r.tb + r.ti + r.ts or min(r.tq, r.tb, r.ti, r.ts) < 0
                  for m in runs for r in m.latency)
    n_lat = sum(len(m.latency) for m in runs)
    with open(tmp_path / "a" / "latency.csv") as fh:
        rows = list(csv.DictReader(fh))
    bad_csv = sum(Decimal(r["tp_us"]) != sum(Decimal(r[k]) for k in ("tq_us", "tb_us", "ti_us", "ts_us"))
                  for r in rows)
    bad_bits = [(m.run_id, k) for m in runs for k, (off, dlv, drop, buf) in m.conservation.items()
                if off != dlv + drop + buf]
    same = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
               for f in ("summary.csv", "upt.csv", "latency.csv"))
    record("12 metric identities", not bad_lat and not bad_csv and not bad_bits and same,
           f"{n_lat} packets decompose exactly ({bad_lat + bad_csv} bad); bit conservation violations "
           f"{bad_bits}; rerun byte-identical: {same}")
