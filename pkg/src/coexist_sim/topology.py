"""Node layouts, band presets and calibrated user placement."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .radio import INH_OFFICE, UMI_STREET_CANYON, PathLossModel, los_probability, path_loss

SERVING_MIN_DBM = -82.0
HIDDEN_DBM = -72.0
HIDDEN_WINDOW = (0.10, 0.15)
USERS_PER_BS = 5
MAX_ATTEMPTS = 10_000
USER_TRIES = 1000


class CalibrationError(RuntimeError):
    def __init__(self, constraint: str, attempts: int, detail: str = ""):
        self.constraint = constraint
        self.attempts = attempts
        super().__init__(f"placement calibration failed after {attempts} attempts: {constraint}"
                         + (f" ({detail})" if detail else ""))


@dataclass(frozen=True)
class BandPreset:
    name: str
    carrier_ghz: float
    bs_power: float
    ue_power: float
    pathloss: str
    layout: str
    scale: float = 1.0
    bs_height: float = 3.0
    ue_height: float = 1.0
    hall: tuple = (120.0, 50.0)
    bs_spacing: float = 20.0
    row_gap: float = 10.0
    user_radius: float = 20.0
    calibration_ref: str | None = None  # preset whose link budget the hidden-terminal window applies to

    def model(self) -> PathLossModel:
        return PathLossModel(self.pathloss, self.carrier_ghz)

    def dump(self) -> dict:
        return asdict(self)


PRESETS = {
    "indoor5": BandPreset("indoor5", 5.18, 23.0, 18.0, INH_OFFICE, "indoor"),
    "outdoor5": BandPreset("outdoor5", 5.18, 23.0, 18.0, UMI_STREET_CANYON, "outdoor", scale=1.5,
                           bs_height=10.0, ue_height=1.5, hall=(300.0, 200.0), bs_spacing=40.0 * 1.5 / 2,
                           row_gap=15.0, user_radius=20.0),
    "indoor6": BandPreset("indoor6", 6.18, 18.0, 12.0, INH_OFFICE, "indoor", calibration_ref="indoor5"),
}


def preset(name: str) -> BandPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


@dataclass
class Topology:
    layout: str
    preset: str
    scale: float
    positions: list          # (x, y, z) per node index
    techs: list              # "nru" | "wifi"
    roles: list              # "gnb" | "ap" | "ue" | "sta"
    server: dict             # user index -> serving BS index
    loss_db: list
    los: list
    calibration_fraction: float
    attempts: int
    tx_power: list = field(default_factory=list)
    band_fraction: float | None = None  # hidden fraction at this band's own budget

    @property
    def gnbs(self) -> list:
        return [i for i, r in enumerate(self.roles) if r == "gnb"]

    @property
    def aps(self) -> list:
        return [i for i, r in enumerate(self.roles) if r == "ap"]

    def users_of(self, bs: int) -> list:
        return [u for u, s in self.server.items() if s == bs]

    def rx_dbm(self, src: int, dst: int) -> float:
        return self.tx_power[src] - self.loss_db[src][dst]


def bs_layout(p: BandPreset) -> tuple[list, list]:
    """Two interleaved rows of three; gNB/AP alternate along and across rows."""
    w, h = p.hall
    cx, cy = w / 2, h / 2
    pos, techs = [], []
    for row, y in enumerate((cy - p.row_gap / 2, cy + p.row_gap / 2)):
        for col, x in enumerate((cx - p.bs_spacing, cx, cx + p.bs_spacing)):
            pos.append((x, y, p.bs_height))
            techs.append("nru" if (row + col) % 2 == 0 else "wifi")
    # gNBs first, then APs, so indices are stable across presets
    order = [i for i in range(6) if techs[i] == "nru"] + [i for i in range(6) if techs[i] == "wifi"]
    return [pos[i] for i in order], [techs[i] for i in order]


def _draw_user(rng, centre, radius, hall, z):
    w, h = hall
    for _ in range(1000):
        r = radius * math.sqrt(rng.random())
        a = rng.random() * 2 * math.pi
        x, y = centre[0] + r * math.cos(a), centre[1] + r * math.sin(a)
        if 0 <= x <= w and 0 <= y <= h:
            return (x, y, z)
    return (min(max(centre[0], 0.0), w), min(max(centre[1], 0.0), h), z)


def _pair_geom(a, b, model, rng):
    """3-D distance and a LOS draw for one link."""
    d2 = math.hypot(a[0] - b[0], a[1] - b[1])
    d3 = math.sqrt(d2 * d2 + (a[2] - b[2]) ** 2)
    return max(d3, 1.0), rng.random() < los_probability(model, d2)


def _loss_matrix(geom, n, model):
    loss = [[0.0] * n for _ in range(n)]
    for (i, j), (d3, is_los) in geom.items():
        loss[i][j] = loss[j][i] = path_loss(model, d3, los=is_los)
    return loss


def hidden_fraction(techs, roles, tx_power, loss, threshold=HIDDEN_DBM) -> float:
    """Share of cross-technology links (BS to any node of the other system) below ``threshold``."""
    below = total = 0
    for i, r in enumerate(roles):
        if r not in ("gnb", "ap"):
            continue
        for j in range(len(techs)):
            if techs[j] != techs[i]:
                total += 1
                if tx_power[i] - loss[i][j] < threshold:
                    below += 1
    return below / total if total else 0.0


def place_users(p: BandPreset, rng, users_per_bs: int = USERS_PER_BS, window=HIDDEN_WINDOW,
                max_attempts: int = MAX_ATTEMPTS, hall: tuple | None = None) -> Topology:
    """Rejection-sample users (and per-link LOS states) until both constraints hold."""
    if hall is not None:
        p = BandPreset(**{**p.dump(), "hall": tuple(hall)})
    bs_pos, bs_techs = bs_layout(p)
    if hall is not None:
        bs_pos = [(min(x, hall[0]), min(y, hall[1]), z) for x, y, z in bs_pos]
    model = p.model()
    n_bs = len(bs_pos)
    roles = ["gnb" if t == "nru" else "ap" for t in bs_techs]
    techs = list(bs_techs)
    server = {}
    for b in range(n_bs):
        for _ in range(users_per_bs):
            u = len(techs)
            server[u] = b
            techs.append(bs_techs[b])
            roles.append("ue" if bs_techs[b] == "nru" else "sta")
    tx_power = [p.bs_power if r in ("gnb", "ap") else p.ue_power for r in roles]
    ref = preset(p.calibration_ref) if p.calibration_ref else p
    ref_model = ref.model()
    ref_power = [ref.bs_power if r in ("gnb", "ap") else ref.ue_power for r in roles]
    n = len(techs)
    fails = {"serving power": 0, "strongest server": 0, "hidden-terminal fraction": 0}
    user_fail = None
    last_frac = None
    for attempt in range(1, max_attempts + 1):
        pos = list(bs_pos)
        geom = {}
        for i in range(n_bs):
            for j in range(i + 1, n_bs):
                geom[(i, j)] = _pair_geom(bs_pos[i], bs_pos[j], model, rng)
        placed = True
        # each user is redrawn until its own server is strong enough and strongest
        for u in sorted(server):
            b = server[u]
            for _ in range(USER_TRIES):
                q = _draw_user(rng, bs_pos[b], p.user_radius, p.hall, p.ue_height)
                links = {o: _pair_geom(bs_pos[o], q, model, rng) for o in range(n_bs)}
                pl = {o: path_loss(model, d, los=l) for o, (d, l) in links.items()}
                if p.bs_power - pl[b] < SERVING_MIN_DBM:
                    fails["serving power"] += 1
                    continue
                if any(pl[o] < pl[b] for o in range(n_bs) if o != b and techs[o] == techs[b]):
                    fails["strongest server"] += 1
                    continue
                break
            else:
                placed = False
                user_fail = "serving power" if fails["serving power"] >= fails["strongest server"] \
                    else "strongest server"
                break
            for i in range(n_bs, len(pos)):
                geom[(i, u)] = _pair_geom(pos[i], q, model, rng)
            pos.append(q)
            for o, v in links.items():
                geom[(o, u)] = v
        if not placed:
            break
        ref_loss = _loss_matrix(geom, n, ref_model)
        frac = hidden_fraction(techs, roles, ref_power, ref_loss)
        last_frac = frac
        if not window[0] <= frac <= window[1]:
            fails["hidden-terminal fraction"] += 1
            continue
        loss = _loss_matrix(geom, n, model) if ref is not p else ref_loss
        los = [[True] * n for _ in range(n)]
        for (i, j), (_, is_los) in geom.items():
            los[i][j] = los[j][i] = is_los
        return Topology(p.layout, p.name, p.scale, pos, techs, roles, server, loss, los, frac, attempt,
                        tx_power, hidden_fraction(techs, roles, tx_power, loss))
    worst = user_fail or "hidden-terminal fraction"
    attempts = attempt
    detail = f"last fraction {last_frac:.3f} outside {window}" if worst == "hidden-terminal fraction" and \
        last_frac is not None else f"{fails[worst]} rejections"
    raise CalibrationError(worst, attempts, detail)
