import random

from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from coexist_sim.kernel import MS
from coexist_sim.multichannel import (ChannelSet, MultiLbtPolicy, collision_trial, hop_carrier, select_channels,
                                      typeA_init, typeB_update, wideband_ed_threshold)
from coexist_sim.nru import CwState
from coexist_sim.profiles import profile

CS = ChannelSet(0, (1, 2, 3))


def test_all_idle_grants_everything():
    for opt in ("Opt1", "Opt3", "Opt4"):
        assert select_channels(MultiLbtPolicy(opt), CS) == [0, 1, 2, 3]
    assert select_channels(MultiLbtPolicy("Opt2"), CS, completed={0, 1, 2, 3}) == [0, 1, 2, 3]


def test_busy_secondary_handling():
    idle = {0: True, 1: False, 2: True, 3: True}
    assert select_channels(MultiLbtPolicy("Opt3"), CS, idle_now=idle) == [0, 2, 3]
    assert select_channels(MultiLbtPolicy("Opt4"), CS, idle_now=idle) == [0, 1, 2, 3]
    assert select_channels(MultiLbtPolicy("Opt1"), CS, idle_now=idle) == []


@settings(max_examples=200, deadline=None)
@given(st.lists(st.booleans(), min_size=4, max_size=4), st.sets(st.integers(0, 3)))
def test_opt1_all_or_nothing_and_opt2_subset(idle_bits, completed):
    idle = dict(enumerate(idle_bits))
    g1 = select_channels(MultiLbtPolicy("Opt1"), CS, idle_now=idle)
    assert g1 in ([], [0, 1, 2, 3])
    g2 = select_channels(MultiLbtPolicy("Opt2"), CS, completed=completed, idle_now=idle)
    assert set(g2) <= {c for c, ok in idle.items() if ok} and set(g2) <= completed


def test_wideband_threshold_scales():
    assert wideband_ed_threshold(-72, ChannelSet(0, (1,))) == -72 + 10 * __import__("math").log10(2)


def test_type_a_counters():
    assert typeA_init(4, "A2", 16, random.Random(3)) == [typeA_init(1, "A2", 16, random.Random(3))[0]] * 4
    assert typeA_init(1, "A1", 16, random.Random(5)) == typeA_init(1, "A2", 16, random.Random(5))
    rng = random.Random(9)
    rows = [typeA_init(4, "A1", 16, rng) for _ in range(20_000)]
    # independence: joint counts of (ch0 bucket, ch1 bucket) are uniform over 4x4 cells
    cells = [0] * 16
    for r in rows:
        cells[(r[0] // 4) * 4 + r[1] // 4] += 1
    assert chisquare(cells).pvalue > 0.01


def test_type_b_cw_updates():
    shared = CwState(profile("P3"))
    cws = {0: shared, 1: shared}
    typeB_update(cws, "TypeB1", {0: False, 1: True})
    assert shared.current_cw == 32
    cws = {0: CwState(profile("P3")), 1: CwState(profile("P3"))}
    typeB_update(cws, "TypeB2", {0: False, 1: True})
    assert (cws[0].current_cw, cws[1].current_cw) == (16, 32)


def test_hop_rotates_each_period():
    cs = ChannelSet(0, (1,))
    hop = MultiLbtPolicy("TypeB1").hop_ns
    assert hop == 100 * MS
    assert [hop_carrier(cs, t * hop, hop) for t in range(4)] == [0, 1, 0, 1]


def test_primary_only_collides_more_on_a_shared_secondary():
    r = {o: collision_trial(o, 5, 300 * MS) for o in ("Opt2", "Opt3", "Opt4")}
    assert r["Opt4"] > r["Opt2"] and r["Opt4"] > r["Opt3"]
