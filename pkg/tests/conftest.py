from coexist_sim.kernel import S
from coexist_sim.nru import NruConfig
from coexist_sim.scenario import TECH_DIRECTIONS, Network
from coexist_sim.metrics import summarise
from coexist_sim.topology import Topology
from coexist_sim.traffic import FILE_BITS, FileRecord, FtpFlow
from coexist_sim.wifi import WifiConfig

ROLE_TECH = {"gnb": "nru", "ue": "nru", "ap": "wifi", "sta": "wifi"}
ROLE_POWER = {"gnb": 23.0, "ap": 23.0, "ue": 18.0, "sta": 18.0}


def tiny_network(roles, server, loss, seed=1, nru=None, wifi=None):
    """Hand-built network: ``loss`` is a full dB matrix, ``server`` maps user -> BS."""
    n = len(roles)
    topo = Topology("indoor", "indoor5", 1.0, [(0.0, 0.0, 1.0)] * n, [ROLE_TECH[r] for r in roles],
                    list(roles), dict(server), [list(r) for r in loss], [[True] * n for _ in range(n)],
                    0.12, 1, [ROLE_POWER[r] for r in roles])
    return Network(topo, seed, nru or NruConfig(), wifi or WifiConfig())


def uniform_loss(n, db, overrides=None):
    loss = [[0.0 if i == j else db for j in range(n)] for i in range(n)]
    for (i, j), v in (overrides or {}).items():
        loss[i][j] = loss[j][i] = v
    return loss


def push_file(net, tech, direction, src, dst, user, at, fid, size=FILE_BITS):
    flow = FtpFlow(tech, direction, src, dst, user, 1.0)
    f = FileRecord(fid, flow, at, size, 12000)
    net.sim.schedule(at, net.nodes[src].enqueue_file, f)
    return f


def finish(net, horizon_ns):
    net.sim.run_until(horizon_ns)
    return summarise(net.ledger, "t", 1, 1.0, horizon_ns, net.buffered_bits(), TECH_DIRECTIONS)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS, SCALE, DROPS, DURATION
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section(f"acceptance criteria ({SCALE}: {DROPS} drops x {DURATION:g} s)")
        for line in RESULTS:
            terminalreporter.write_line(line)
