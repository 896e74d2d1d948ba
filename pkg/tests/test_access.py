"""Contention tables, idle-to-grant timing, CW adaptation, FBE cycles, backoff uniformity."""

import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from coexist_sim.backoff import Backoff
from coexist_sim.kernel import MS, US, Simulator
from coexist_sim.nru import (CwState, DiscoveryConfig, LbtConfig, cat4_contend, fbe_cycle, update_cw)
from coexist_sim.profiles import EDCA, PRIORITY_CLASSES, PROFILES, aifs_us, contention_window, profile
from coexist_sim.wifi import EdcaState, WifiConfig

# hand-copied from the EDCA and CAT4 parameter tables: (defer dl, defer ul, cw_min, cw_max)
TABLE = {
    "AC_VO": (34, 34, 4, 8), "AC_VI": (34, 34, 8, 16), "AC_BE": (43, 43, 16, 1024),
    "AC_BK": (79, 79, 16, 1024), "LegacyDCF": (34, 34, 16, 1024),
    "P1": (25, 34, 4, 8), "P2": (25, 34, 8, 16), "P3": (43, 43, 16, 64), "P4": (79, 79, 16, 1024),
}


def oracle_chain(cw_min, cw_max, n):
    out, w = [], cw_min
    for _ in range(n):
        out.append(w)
        w = min(2 * w, cw_max)
    return out


@pytest.mark.parametrize("name", sorted(TABLE))
def test_profile_matches_table(name):
    dl, ul, lo, hi = TABLE[name]
    p = profile(name)
    assert (p.defer_us("dl"), p.defer_us("ul"), p.cw_min, p.cw_max) == (dl, ul, lo, hi)
    assert [contention_window(p, j) for j in range(12)] == oracle_chain(lo, hi, 12)


def test_named_chains():
    assert [contention_window(profile("AC_VO"), j) for j in range(3)] == [4, 8, 8]
    assert [contention_window(profile("P3"), j) for j in range(4)] == [16, 32, 64, 64]
    assert contention_window(profile("P4"), 40) == 1024
    assert aifs_us(3) == 43


def test_txop_and_cot_limits():
    assert EDCA["AC_VO"].max_occupancy_us == 2080
    assert EDCA["AC_VI"].max_occupancy_us == 4096
    assert WifiConfig().access_profile().max_occupancy_us == 8000
    assert PRIORITY_CLASSES["P1"].max_occupancy_us == 2000


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(sorted(PROFILES)), st.integers(0, 100))
def test_cw_bounded_and_monotone(name, j):
    p = profile(name)
    assert p.cw_min <= contention_window(p, j) <= p.cw_max
    assert contention_window(p, j) <= contention_window(p, j + 1)


def grant_delay(defer_us, k, start_ns=1234):
    sim = Simulator()
    got = []
    sim.run_until(start_ns)
    b = Backoff(sim, got.append)
    b.start(k, defer_us * US, busy=False)
    sim.run_until(start_ns + 20 * MS)
    return got[0] - start_ns


@pytest.mark.parametrize("name", sorted(TABLE))
@pytest.mark.parametrize("role", ["dl", "ul"])
@pytest.mark.parametrize("k", [0, 1, 7, 63])
def test_idle_to_grant_exact(name, role, k):
    p = profile(name)
    assert grant_delay(p.defer_us(role), k) == (TABLE[name][0 if role == "dl" else 1] + 9 * k) * US


def test_p1_downlink_uplink_asymmetry():
    for role, want in (("gnb", 25), ("ue", 34)):
        sim = Simulator()
        got = []
        b = Backoff(sim, got.append)
        cat4_contend(b, CwState(profile("P1")), role, False, None, k=0)
        sim.run_until(MS)
        assert got == [want * US]


def test_edca_grant_on_silent_medium():
    sim = Simulator(3)
    got = []
    e = EdcaState(sim, WifiConfig().access_profile(), sim.stream(0, "backoff"), got.append)
    k = e.attempt(False, k=5)
    sim.run_until(MS)
    assert k == 5 and got == [(43 + 45) * US]


def test_busy_period_freezes_countdown():
    sim = Simulator()
    got = []
    b = Backoff(sim, got.append)
    b.start(10, 43 * US, busy=False)
    # 3 whole slots plus a fraction elapse, then the medium is busy for 100 us
    sim.run_until((43 + 3 * 9 + 4) * US)
    b.set_busy(True)
    assert b.remaining == 7
    sim.run_until(sim.now + 100 * US)
    b.set_busy(False)
    t_idle = sim.now
    sim.run_until(t_idle + MS)
    assert got == [t_idle + (43 + 7 * 9) * US]


def cw_oracle(start, cmin, cmax, feedback):
    """Hand-built reference: double on >= 80% NACK else reset."""
    w, out = start, []
    for fb in feedback:
        frac = fb.count("NACK") / len(fb)
        w = min(2 * w, cmax) if frac >= 0.8 else cmin
        out.append(w)
    return out


def test_cw_adaptation_five_cots():
    fb = [["NACK"] * 4 + ["ACK"],            # 80% -> double
          ["NACK"] * 5,                      # 100% -> double
          ["NACK"] * 3 + ["ACK"] * 2,        # 60% -> reset
          ["NACK"] * 9 + ["ACK"],            # 90% -> double
          ["NACK"] * 79 + ["ACK"] * 21]      # 79% -> reset
    s = CwState(profile("P3"))
    got = [update_cw(s, f) for f in fb]
    assert got == [32, 64, 16, 32, 16]
    assert got == cw_oracle(16, 16, 64, fb)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.lists(st.sampled_from(["ACK", "NACK"]), min_size=1, max_size=12), min_size=1, max_size=8),
       st.sampled_from(["P1", "P2", "P3", "P4"]))
def test_cw_update_matches_oracle(feedback, pc):
    p = profile(pc)
    s = CwState(p)
    assert [update_cw(s, f) for f in feedback] == cw_oracle(p.cw_min, p.cw_min, p.cw_max, feedback)


def test_fbe_idle_at_least_five_percent():
    for cot_ms in (1, 2.5, 8, 10):
        f = fbe_cycle(profile("P3"), round(cot_ms * MS))
        assert f.idle_ns >= 0.05 * f.cot_ns
        assert f.period_ns >= f.cot_ns + f.idle_ns
    with pytest.raises(ValueError):
        fbe_cycle(profile("P3"), 8 * MS, period_ns=8 * MS)
    with pytest.raises(ValueError):
        fbe_cycle(profile("P1"), 3 * MS)


def test_lbt_config_rules():
    with pytest.raises(ValueError):
        LbtConfig(category="CAT1", cot_us=600)
    assert LbtConfig(category="CAT2A").sense_us == 25
    assert LbtConfig(category="CAT2B").sense_us == 16


def test_discovery_candidates_by_numerology():
    assert DiscoveryConfig.for_numerology(0).candidates == 10
    d1 = DiscoveryConfig.for_numerology(1)
    assert d1.candidates == 20 and d1.max_cot_ms == 0.5
    assert DiscoveryConfig().candidate_offsets_ns()[:2] == [0, MS // 2]


@pytest.mark.parametrize("name,j", [("AC_BE", 0), ("P3", 2)])
def test_backoff_draw_uniformity(name, j):
    cw = contention_window(profile(name), j)
    sim = Simulator(11)
    rng = sim.stream("chi", name)
    if name.startswith("P"):
        s = CwState(profile(name))
        s.current_cw = cw
        draws = [s.draw(rng) for _ in range(100_000)]
    else:
        e = EdcaState(sim, profile(name), rng, lambda t: None)
        e.j = j
        draws = [e.draw() for _ in range(100_000)]
    counts = [0] * cw
    for d in draws:
        counts[d] += 1
    assert sum(counts) == 100_000
    assert chisquare(counts).pvalue > 0.01
