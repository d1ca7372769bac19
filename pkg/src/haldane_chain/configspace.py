"""Occupation configurations, symmetry sectors and the electrostatic energy.

Configurations are stored bit-packed in a Python/numpy integer.  Site ``x``
(1-based) lives in bit ``L - x``, so the integer value of a configuration is
its '0'/'1' string read as a binary number and ascending integer order is the
lexicographic order of the strings.  That order is the canonical basis order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np

MAX_FULL_L = 28
_TABLE_MAX_L = 20


class BC(str, Enum):
    PER = "per"
    OBC = "obc"

    @classmethod
    def of(cls, value: "BC | str") -> "BC":
        if isinstance(value, BC):
            return value
        key = str(value).lower()
        aliases = {"per": cls.PER, "periodic": cls.PER, "obc": cls.OBC, "open": cls.OBC}
        if key not in aliases:
            raise ValueError(f"unknown boundary condition {value!r}")
        return aliases[key]


@dataclass(frozen=True, order=True)
class Config:
    """Occupation string of length L; ``value`` holds the packed bits."""

    L: int
    value: int

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("configuration length must be positive")
        if not 0 <= self.value < (1 << self.L):
            raise ValueError("bits do not fit the length")

    @classmethod
    def from_string(cls, s: str) -> "Config":
        if not s or set(s) - {"0", "1"}:
            raise ValueError(f"not an occupation string: {s!r}")
        return cls(len(s), int(s, 2))

    @classmethod
    def from_sites(cls, L: int, sites) -> "Config":
        v = 0
        for x in sites:
            v |= 1 << (L - x)
        return cls(L, v)

    def __str__(self) -> str:
        return format(self.value, f"0{self.L}b")

    def occ(self, x: int, bc: "BC | str" = BC.OBC) -> int:
        return occupation(self.value, self.L, x, BC.of(bc))

    def sites(self) -> list[int]:
        return [x for x in range(1, self.L + 1) if (self.value >> (self.L - x)) & 1]


def as_config(mu) -> Config:
    if isinstance(mu, Config):
        return mu
    if isinstance(mu, str):
        return Config.from_string(mu)
    raise TypeError(f"cannot interpret {mu!r} as a configuration")


def site_bit(x: int, L: int) -> int:
    """Bit mask of site x (periodic reduction applied)."""
    return 1 << (L - ((x - 1) % L + 1))


def occupation(v: int, L: int, x: int, bc: BC) -> int:
    if bc is BC.OBC and not 1 <= x <= L:
        return 0
    x = (x - 1) % L + 1
    return (v >> (L - x)) & 1


def occupations(values: np.ndarray, L: int, x: int, bc: BC) -> np.ndarray:
    """Vectorized ``occupation`` over an array of packed configurations."""
    if bc is BC.OBC and not 1 <= x <= L:
        return np.zeros(len(values), dtype=np.int64)
    x = (x - 1) % L + 1
    return (values >> (L - x)) & 1


@dataclass(frozen=True)
class Interval:
    a: int
    b: int

    def __post_init__(self):
        if self.a < 1 or self.b < self.a:
            raise ValueError(f"bad interval [{self.a},{self.b}]")

    @property
    def length(self) -> int:
        return self.b - self.a + 1


@dataclass(frozen=True)
class Sector:
    L: int
    bc: BC
    N: int
    M: int

    def to_json(self) -> str:
        return json.dumps({"L": self.L, "bc": self.bc.value, "N": self.N, "M": self.M})

    @classmethod
    def from_json(cls, text: str) -> "Sector":
        d = json.loads(text)
        return cls(d["L"], BC.of(d["bc"]), d["N"], d["M"])


def sector_of(mu, bc) -> Sector:
    mu, bc = as_config(mu), BC.of(bc)
    sites = mu.sites()
    M = sum(sites)
    if bc is BC.PER:
        M %= mu.L
    return Sector(mu.L, bc, len(sites), M)


def electrostatic_energy(mu, bc) -> int:
    """Number of occupied pairs at distance two."""
    mu, bc = as_config(mu), BC.of(bc)
    last = mu.L if bc is BC.PER else mu.L - 2
    return sum(mu.occ(x, bc) & mu.occ(x + 2, bc) for x in range(1, last + 1))


@lru_cache(maxsize=8)
def _table(L: int):
    values = np.arange(1 << L, dtype=np.int64)
    n = np.zeros(1 << L, dtype=np.int64)
    m = np.zeros(1 << L, dtype=np.int64)
    for x in range(1, L + 1):
        bit = (values >> (L - x)) & 1
        n += bit
        m += x * bit
    for arr in (values, n, m):
        arr.setflags(write=False)
    return values, n, m


def all_configs(L: int) -> np.ndarray:
    if L > MAX_FULL_L:
        raise ValueError(f"full-space enumeration capped at L={MAX_FULL_L}")
    return np.arange(1 << L, dtype=np.int64)


def particle_numbers(values: np.ndarray, L: int) -> np.ndarray:
    return sum(((values >> (L - x)) & 1) for x in range(1, L + 1))


def centers_of_mass(values: np.ndarray, L: int, bc) -> np.ndarray:
    m = sum(x * ((values >> (L - x)) & 1) for x in range(1, L + 1))
    return m % L if BC.of(bc) is BC.PER else m


def enumerate_sector(L: int, bc, N: int, M: int) -> np.ndarray:
    """Packed configurations with the given particle number and center of mass.

    Returned in ascending (lexicographic) order.
    """
    bc = BC.of(bc)
    if not 0 <= N <= L:
        raise ValueError("particle number out of range")
    if L <= _TABLE_MAX_L:
        values, n, m = _table(L)
        if bc is BC.PER:
            m = m % L
        return values[(n == N) & (m == M)].copy()
    values, m = _fixed_n(L, N)
    if bc is BC.PER:
        m = m % L
    return values[m == M].copy()


@lru_cache(maxsize=4)
def _fixed_n(L: int, N: int):
    """Sorted configurations with N particles and their site sums."""
    out = np.fromiter((sum(1 << (L - x) for x in c) for c in combinations(range(1, L + 1), N)),
                      dtype=np.int64, count=comb(L, N))
    out.sort()
    m = np.zeros_like(out)
    for x in range(1, L + 1):
        m += x * ((out >> (L - x)) & 1)
    for arr in (out, m):
        arr.setflags(write=False)
    return out, m


def sectors(L: int, bc) -> list[Sector]:
    """All nonempty sectors, ordered by (N, M)."""
    bc = BC.of(bc)
    if L <= _TABLE_MAX_L:
        _, n, m = _table(L)
        if bc is BC.PER:
            m = m % L
        return [Sector(L, bc, N, M) for N, M in sorted(set(zip(n.tolist(), m.tolist())))]
    out = []
    for N in range(L + 1):
        lo, hi = N * (N + 1) // 2, N * (2 * L - N + 1) // 2
        ms = sorted({M % L for M in range(lo, hi + 1)}) if bc is BC.PER else range(lo, hi + 1)
        out.extend(Sector(L, bc, N, M) for M in ms)
    return out


def sector_labels(values: np.ndarray, L: int, bc) -> tuple[np.ndarray, np.ndarray]:
    return particle_numbers(values, L), centers_of_mass(values, L, bc)


def window_sites(start: int, length: int, L: int) -> list[int]:
    """Sites start, start+1, ... reduced to 1..L."""
    return [(start + j - 1) % L + 1 for j in range(length)]


def extract_local(values: np.ndarray, sites: list[int], L: int) -> tuple[np.ndarray, np.ndarray]:
    """Split configurations into the bits on ``sites`` and the remainder.

    The local part is packed with ``sites[0]`` as its most significant bit.
    """
    k = len(sites)
    local = np.zeros(len(values), dtype=np.int64)
    mask = 0
    for j, x in enumerate(sites):
        local |= ((values >> (L - x)) & 1) << (k - 1 - j)
        mask |= 1 << (L - x)
    return local, values & ~np.int64(mask)


def restrict_config(v: int, L: int, a: int, b: int) -> int:
    """Bits of sites a..b as a configuration of length b - a + 1."""
    return (v >> (L - b)) & ((1 << (b - a + 1)) - 1)
