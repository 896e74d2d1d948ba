"""Contention parameter bundles for EDCA access categories and NR-U priority classes."""

from __future__ import annotations

from dataclasses import dataclass, replace

SLOT_US = 9
SIFS_US = 16


@dataclass(frozen=True)
class AccessProfile:
    name: str
    dl_defer_us: int
    ul_defer_us: int
    cw_min: int
    cw_max: int
    max_occupancy_us: float | None  # None: no TXOP limit (single exchange)

    def __post_init__(self):
        if self.cw_min > self.cw_max:
            raise ValueError(f"{self.name}: cw_min {self.cw_min} > cw_max {self.cw_max}")
        if min(self.dl_defer_us, self.ul_defer_us) < SIFS_US:
            raise ValueError(f"{self.name}: defer below SIFS")
        w = self.cw_min
        while w < self.cw_max:
            w *= 2
        if w != self.cw_max:
            raise ValueError(f"{self.name}: cw_max is not on the doubling chain of cw_min")

    def defer_us(self, role: str = "dl") -> int:
        return self.dl_defer_us if role in ("dl", "gnb", "ap") else self.ul_defer_us

    def with_occupancy(self, max_occupancy_us: float) -> "AccessProfile":
        return replace(self, max_occupancy_us=max_occupancy_us)

    def chain(self) -> list[int]:
        out = [self.cw_min]
        while out[-1] < self.cw_max:
            out.append(min(2 * out[-1], self.cw_max))
        return out


def aifs_us(d: int) -> int:
    return SIFS_US + d * SLOT_US


EDCA = {
    "AC_VO": AccessProfile("AC_VO", aifs_us(2), aifs_us(2), 4, 8, 2080),
    "AC_VI": AccessProfile("AC_VI", aifs_us(2), aifs_us(2), 8, 16, 4096),
    "AC_BE": AccessProfile("AC_BE", aifs_us(3), aifs_us(3), 16, 1024, None),
    "AC_BK": AccessProfile("AC_BK", aifs_us(7), aifs_us(7), 16, 1024, None),
    "LegacyDCF": AccessProfile("LegacyDCF", aifs_us(2), aifs_us(2), 16, 1024, None),
}

# max COT uses the largest listed value; P3/P4 list 6, 8, 10 ms
PRIORITY_CLASSES = {
    "P1": AccessProfile("P1", aifs_us(1), aifs_us(2), 4, 8, 2000),
    "P2": AccessProfile("P2", aifs_us(1), aifs_us(2), 8, 16, 4000),
    "P3": AccessProfile("P3", aifs_us(3), aifs_us(3), 16, 64, 10000),
    "P4": AccessProfile("P4", aifs_us(7), aifs_us(7), 16, 1024, 10000),
}

PROFILES = {**EDCA, **PRIORITY_CLASSES}

EVAL_TXOP_US = 8000


def profile(name: str) -> AccessProfile:
    try:
        return PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown access profile {name!r}") from None


def contention_window(p: AccessProfile, j: int) -> int:
    if j < 0:
        raise ValueError("retry index must be non-negative")
    # avoid huge shifts for large j
    if j >= 32:
        return p.cw_max
    return min((1 << j) * p.cw_min, p.cw_max)
