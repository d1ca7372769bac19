"""Tile grammar for configurations of the invariant subspaces.

Bulk tiles are the void V=0, the monomer M=100 and the dimer D=011000.
Open intervals add boundary tiles (B_l on the left; M1, M2, B_r, D1, D2 on
the right) and, for the edge family, the edge tiles E_l, E_r and their
partners T_l1, T_l2, T_r1, T_r2.

Tilings of a ring are anchored: ``anchor`` is the first site of the tile that
covers site 1, and that tile is listed first.  Open tilings always start at 1.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .configspace import BC, Config, Interval, as_config, restrict_config

PATTERNS = {
    "V": "0",
    "M": "100",
    "D": "011000",
    "B_l": "11000",
    "M1": "1",
    "M2": "10",
    "B_r": "011",
    "D1": "0110",
    "D2": "01100",
    "E_l": "1100100",
    "E_r": "10011",
    "T_l1": "1011000",
    "T_l2": "1100011000",
    "T_r1": "01101",
    "T_r2": "01100011",
}

BULK = ("V", "M", "D")
LEFT = ("B_l",)
RIGHT = ("M1", "M2", "B_r", "D1", "D2")
EDGE_LEFT = ("E_l", "T_l1", "T_l2")
EDGE_RIGHT = ("E_r", "T_r1", "T_r2")
EDGE_TILES = EDGE_LEFT + EDGE_RIGHT
DIMERS = ("D", "D1", "D2")
BOUNDARY_DIMERS = ("B_l", "B_r")
FAMILIES = ("vmd", "bvmd", "edge")

# (monomer train, dimer) pairs; both sides cover the same sites
BULK_RULES = ((("M", "M"), ("D",)), (("M", "M1"), ("D1",)), (("M", "M2"), ("D2",)))
EDGE_RULES = (
    (("E_l",), ("T_l1",)),
    (("E_l", "M"), ("T_l2",)),
    (("E_r",), ("T_r1",)),
    (("M", "E_r"), ("T_r2",)),
)


def tile_length(name: str) -> int:
    return len(PATTERNS[name])


@dataclass(frozen=True)
class Tiling:
    bc: BC
    L: int
    tiles: tuple[str, ...]
    anchor: int = 1

    def __post_init__(self):
        bc = BC.of(self.bc)
        object.__setattr__(self, "bc", bc)
        object.__setattr__(self, "tiles", tuple(self.tiles))
        if sum(tile_length(t) for t in self.tiles) != self.L:
            raise ValueError(f"tile lengths do not sum to {self.L}: {self.tiles}")
        if bc is BC.OBC:
            if self.anchor != 1:
                raise ValueError("open tilings start at site 1")
            last = len(self.tiles) - 1
            for k, t in enumerate(self.tiles):
                if t in LEFT + EDGE_LEFT and k != 0:
                    raise ValueError(f"{t} must be the first tile")
                if t in RIGHT + EDGE_RIGHT and k != last:
                    raise ValueError(f"{t} must be the last tile")
        else:
            if any(t not in BULK for t in self.tiles):
                raise ValueError("ring tilings use V, M, D only")
            self._canonicalize()

    def _canonicalize(self):
        L = self.L
        starts = self.starts()
        for k, (s, t) in enumerate(zip(starts, self.tiles)):
            if (1 - s) % L < tile_length(t):
                break
        object.__setattr__(self, "tiles", self.tiles[k:] + self.tiles[:k])
        object.__setattr__(self, "anchor", starts[k])

    def starts(self) -> list[int]:
        out, s = [], self.anchor
        for t in self.tiles:
            out.append((s - 1) % self.L + 1)
            s += tile_length(t)
        return out

    def __str__(self) -> str:
        if self.bc is BC.PER:
            return f"per:{self.L}@{self.anchor}:" + ",".join(self.tiles)
        return f"obc:{self.L}:" + ",".join(self.tiles)

    @classmethod
    def parse(cls, text: str) -> "Tiling":
        """Inverse of ``str``: 'per:6@1:D' or 'obc:9:B_l,V,B_r'."""
        bc, size, tiles = text.split(":", 2)
        tiles = tuple(t for t in tiles.split(",") if t)
        if BC.of(bc) is BC.PER:
            L, anchor = size.split("@")
            return cls(BC.PER, int(L), tiles, int(anchor))
        return cls(BC.OBC, int(size), tiles)

    @property
    def is_edge(self) -> bool:
        return any(t in EDGE_TILES for t in self.tiles)


def config_value(T: Tiling) -> int:
    L = T.L
    v = 0
    for s, t in zip(T.starts(), T.tiles):
        for j, ch in enumerate(PATTERNS[t]):
            if ch == "1":
                v |= 1 << (L - ((s + j - 1) % L + 1))
    return v


def config_of(T: Tiling) -> Config:
    return Config(T.L, config_value(T))


def n_dimers(T: Tiling) -> int:
    counted = DIMERS + BOUNDARY_DIMERS if T.bc is BC.OBC else DIMERS
    return sum(t in counted for t in T.tiles)


def is_root(T: Tiling) -> bool:
    return not any(t in DIMERS or t.startswith("T_") for t in T.tiles)


# parsing


def _linear_parse(bits: str, open_ends: bool) -> list[str] | None:
    """Forced left-to-right parse of a bit string into bulk (and boundary) tiles."""
    n = len(bits)
    tiles, i = [], 0
    while i < n:
        rest = n - i
        if bits[i] == "1":
            if bits[i + 1:i + 2] == "1":
                if not (open_ends and i == 0 and rest >= 5):
                    return None
                t = "B_l"
            elif rest >= 3:
                t = "M"
            elif not open_ends:
                return None
            else:
                t = "M2" if rest == 2 else "M1"
        elif bits[i + 1:i + 3] == "11":
            if rest >= 6:
                t = "D"
            elif not open_ends:
                return None
            else:
                t = {5: "D2", 4: "D1", 3: "B_r"}[rest]
        else:
            t = "V"
        if bits[i:i + tile_length(t)] != PATTERNS[t]:
            return None
        tiles.append(t)
        i += tile_length(t)
    return tiles


def parse_config(mu, bc) -> Tiling | None:
    """The unique VMD (ring) or BVMD (interval) tiling of ``mu``, or None."""
    mu, bc = as_config(mu), BC.of(bc)
    s, L = str(mu), mu.L
    if bc is BC.OBC:
        tiles = _linear_parse(s, True)
        return None if tiles is None else Tiling(bc, L, tuple(tiles))
    occupied = [x for x in range(1, L + 1) if s[x - 1] == "1"]
    if not occupied:
        return Tiling(bc, L, ("V",) * L)
    # a tile boundary sits at every isolated particle and one site before every pair
    start = None
    for x in occupied:
        if s[x % L] == "1":
            start = (x - 2) % L + 1
            break
        if s[(x - 2) % L] == "0":
            start = x
            break
    if start is None:
        return None
    rotated = s[start - 1:] + s[:start - 1]
    tiles = _linear_parse(rotated, False)
    if tiles is None:
        return None
    return Tiling(bc, L, tuple(tiles), start)


def _edge_parse(s: str) -> list[tuple[str, ...]]:
    """All edge-family tilings of the bit string, by exhaustive placement."""
    n = len(s)
    out = []

    def rec(i, acc):
        if i == n:
            if any(t in EDGE_TILES for t in acc):
                out.append(tuple(acc))
            return
        first = i == 0
        for t in BULK + LEFT + RIGHT + EDGE_TILES:
            if t in LEFT + EDGE_LEFT and not first:
                continue
            k = tile_length(t)
            if t in RIGHT + EDGE_RIGHT and i + k != n:
                continue
            if s[i:i + k] == PATTERNS[t]:
                rec(i + k, acc + [t])

    rec(0, [])
    return out


def parse_edge_config(mu) -> Tiling | None:
    mu = as_config(mu)
    found = _edge_parse(str(mu))
    if len(found) > 1:
        raise AssertionError(f"ambiguous edge tiling for {mu}")
    return Tiling(BC.OBC, mu.L, found[0]) if found else None


def is_tiling_config(mu, bc) -> bool:
    """Local characterization of the range of the tiling map.

    (i)  an occupied site with an empty neighbour has an empty site two steps
         beyond it on that side;
    (ii) a pair of neighbouring particles has three empty sites on each side,
         and the next two sites on each side hold at most one particle.
    Sites outside an open interval count as empty.
    """
    mu, bc = as_config(mu), BC.of(bc)
    occ = lambda x: mu.occ(x, bc)  # noqa: E731
    for x in range(1, mu.L + 1):
        if not occ(x):
            continue
        for sgn in (1, -1):
            if not occ(x + sgn) and occ(x + 2 * sgn):
                return False
        if occ(x + 1):
            for k in (2, 3, 4):
                if occ(x + k) or occ(x + 1 - k):
                    return False
            if (occ(x + 5) and occ(x + 6)) or (occ(x - 4) and occ(x - 5)):
                return False
    return True


# replacement rules and classes


def _rules(T: Tiling):
    rules = BULK_RULES + (EDGE_RULES if T.bc is BC.OBC else ())
    for lhs, rhs in rules:
        yield lhs, rhs
        yield rhs, lhs


def _neighbours(T: Tiling):
    tiles, n = T.tiles, len(T.tiles)
    for lhs, rhs in _rules(T):
        k = len(lhs)
        if T.bc is BC.OBC:
            for i in range(n - k + 1):
                if tiles[i:i + k] == lhs:
                    yield Tiling(T.bc, T.L, tiles[:i] + rhs + tiles[i + k:])
        else:
            if k > n:
                continue
            starts = T.starts()
            for i in range(n):
                window = tuple(tiles[(i + j) % n] for j in range(k))
                if window == lhs:
                    rest = tuple(tiles[(i + k + j) % n] for j in range(n - k))
                    yield Tiling(T.bc, T.L, rhs + rest, starts[i])


def equivalence_class(R: Tiling) -> frozenset[Tiling]:
    """Closure of R under the bidirectional replacement rules."""
    seen = {R}
    queue = deque([R])
    while queue:
        T = queue.popleft()
        for S in _neighbours(T):
            if S not in seen:
                seen.add(S)
                queue.append(S)
    return frozenset(seen)


_SPLIT = {"D": ("M", "M"), "D1": ("M", "M1"), "D2": ("M", "M2")}


def root_of(T: Tiling) -> Tiling:
    """Replace every dimer by its monomer pair."""
    if T.is_edge:
        raise ValueError("root_of is defined for non-edge tilings only")
    tiles = tuple(u for t in T.tiles for u in _SPLIT.get(t, (t,)))
    return Tiling(T.bc, T.L, tiles, T.anchor)


# enumeration


def _open_sequences(L: int, family: str):
    if family == "vmd":
        firsts, lasts = (), ()
    elif family == "bvmd":
        firsts, lasts = LEFT, RIGHT
    else:
        firsts, lasts = LEFT + EDGE_LEFT, RIGHT + EDGE_RIGHT

    out = []

    def rec(rem, first, acc):
        if rem == 0:
            out.append(tuple(acc))
            return
        for t in BULK + (firsts if first else ()) + lasts:
            k = tile_length(t)
            if k > rem or (t in lasts and k != rem):
                continue
            rec(rem - k, False, acc + [t])

    rec(L, True, [])
    if family == "edge":
        out = [s for s in out if any(t in EDGE_TILES for t in s)]
    return out


@lru_cache(maxsize=256)
def _linear_bulk(n: int) -> tuple[tuple[str, ...], ...]:
    if n == 0:
        return ((),)
    out = []
    for t in BULK:
        k = tile_length(t)
        if k <= n:
            out.extend((t,) + rest for rest in _linear_bulk(n - k))
    return tuple(out)


@lru_cache(maxsize=128)
def _enumerate(L: int, bc: BC, family: str) -> tuple[Tiling, ...]:
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    if bc is BC.PER:
        if family == "edge":
            return ()
        found = []
        for t in BULK:
            k = tile_length(t)
            if k > L:
                continue
            for offset in range(k):
                anchor = (1 - offset - 1) % L + 1
                for rest in _linear_bulk(L - k):
                    found.append(Tiling(bc, L, (t,) + rest, anchor))
    else:
        found = [Tiling(bc, L, s) for s in _open_sequences(L, family)]
    return tuple(sorted(found, key=lambda T: (config_value(T), str(T))))


def enumerate_tilings(L: int, bc, family: str = "bvmd") -> list[Tiling]:
    """All tilings of the ring or interval in the given family.

    On a ring only V, M, D exist, so every family other than 'edge' yields the
    same VMD tilings.
    """
    if L < 1:
        raise ValueError("L must be positive")
    return list(_enumerate(L, BC.of(bc), family))


def enumerate_roots(L: int, bc, family: str = "bvmd") -> list[Tiling]:
    return [T for T in enumerate_tilings(L, bc, family) if is_root(T)]


@lru_cache(maxsize=64)
def _tiling_configs(L: int, bc: BC, family: str) -> np.ndarray:
    vals = np.array(sorted({config_value(T) for T in _enumerate(L, bc, family)}), dtype=np.int64)
    vals.setflags(write=False)
    return vals


def tiling_configs(L: int, bc, family: str = "bvmd") -> np.ndarray:
    """Sorted packed configurations spanning the tiling subspace."""
    return _tiling_configs(L, BC.of(bc), family)


# truncation


def truncate(T: Tiling, part: Interval) -> Tiling:
    """The open tiling of ``part`` whose configuration is T's restricted to it."""
    if part.b > T.L:
        raise ValueError("interval leaves the system")
    v = restrict_config(config_value(T), T.L, part.a, part.b)
    out = parse_config(Config(part.length, v), BC.OBC)
    if out is None:
        raise ValueError(f"restriction of {T} to [{part.a},{part.b}] has no tiling")
    return out


def monomer_pairs(R: Tiling) -> list[tuple[int, int]]:
    """Particle sites (s, s+3) of neighbouring monomers M followed by M_i."""
    L, n = R.L, len(R.tiles)
    starts = R.starts()
    out = []
    for k in range(n if R.bc is BC.PER else n - 1):
        nxt = (k + 1) % n
        if R.tiles[k] == "M" and R.tiles[nxt] in ("M", "M1", "M2"):
            s = starts[k]
            out.append((s, (s + 2) % L + 1))
    return out


def n_separated(R: Tiling, part: Interval) -> int:
    """Number of neighbouring monomer pairs with exactly one particle inside ``part``."""
    inside = lambda x: part.a <= x <= part.b  # noqa: E731
    return sum(inside(x) != inside(y) for x, y in monomer_pairs(R))
