"""Exact ground states, monomer-train states and their excited partners."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .configspace import BC
from .hamiltonian import ModelParams
from .tiling import (
    PATTERNS,
    Tiling,
    config_value,
    enumerate_roots,
    equivalence_class,
    is_root,
    n_dimers,
)

ANOMALY = "1100011"
RANK_TOL = 1e-10


@dataclass(frozen=True)
class AmplitudeVector:
    """Sparse state: packed configuration -> complex amplitude."""

    L: int
    bc: BC
    amps: dict = field(default_factory=dict)

    def norm2(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.amps.values()))

    def norm(self) -> float:
        return math.sqrt(self.norm2())

    def inner(self, other: "AmplitudeVector") -> complex:
        """<self|other>."""
        small, big = (self, other) if len(self.amps) <= len(other.amps) else (other, self)
        s = sum(np.conj(small.amps[k]) * big.amps[k] for k in small.amps if k in big.amps)
        return complex(s) if small is self else complex(np.conj(s))

    def tensor(self, other: "AmplitudeVector") -> "AmplitudeVector":
        """Concatenation: self on the left sites, other on the right ones."""
        shift = other.L
        amps = {(u << shift) | v: a * b for u, a in self.amps.items() for v, b in other.amps.items()}
        return AmplitudeVector(self.L + other.L, BC.OBC, amps)

    def scaled(self, c: complex) -> "AmplitudeVector":
        return AmplitudeVector(self.L, self.bc, {k: c * a for k, a in self.amps.items()})

    def __add__(self, other: "AmplitudeVector") -> "AmplitudeVector":
        if self.L != other.L:
            raise ValueError("length mismatch")
        amps = dict(self.amps)
        for k, a in other.amps.items():
            amps[k] = amps.get(k, 0) + a
        return AmplitudeVector(self.L, self.bc, amps)

    def __sub__(self, other):
        return self + other.scaled(-1)

    def to_array(self, basis: np.ndarray) -> np.ndarray:
        """Coordinates on a sorted basis; raises if support leaves it."""
        out = np.zeros(len(basis), dtype=complex)
        if not self.amps:
            return out
        keys = np.fromiter(self.amps.keys(), dtype=np.int64)
        vals = np.fromiter(self.amps.values(), dtype=complex)
        pos = np.searchsorted(basis, keys)
        ok = pos < len(basis)
        ok[ok] = basis[pos[ok]] == keys[ok]
        if not np.all(ok | (np.abs(vals) == 0)):
            raise ValueError("state has support outside the basis")
        out[pos[ok]] = vals[ok]
        return out

    def to_json(self) -> str:
        items = sorted(self.amps.items())
        return json.dumps({format(k, f"0{self.L}b"): [complex(a).real, complex(a).imag] for k, a in items})

    @classmethod
    def from_json(cls, text: str, bc=BC.OBC) -> "AmplitudeVector":
        d = json.loads(text)
        L = len(next(iter(d))) if d else 0
        return cls(L, BC.of(bc), {int(k, 2): complex(re, im) for k, (re, im) in d.items()})


SCALAR_ONE = AmplitudeVector(0, BC.OBC, {0: 1.0})


def basis_state(pattern: str, bc=BC.OBC) -> AmplitudeVector:
    return AmplitudeVector(len(pattern), BC.of(bc), {int(pattern, 2): 1.0})


def vmd_ground_state(R: Tiling, lam: complex) -> AmplitudeVector:
    """Sum over the class of R of lam**(replaced dimers) |T>.

    Boundary tiles B_l and B_r are counted as dimers but can never be
    replaced, so they contribute the same power to every member.  That common
    factor is divided out here, keeping the root amplitude equal to 1.
    """
    if not is_root(R) or R.is_edge:
        raise ValueError("expected a non-edge root tiling")
    base = n_dimers(R)
    amps = {}
    for T in sorted(equivalence_class(R), key=config_value):
        amps[config_value(T)] = complex(lam) ** (n_dimers(T) - base)
    return AmplitudeVector(R.L, R.bc, amps)


@dataclass(frozen=True)
class GroundBasis:
    L: int
    bc: BC
    params: ModelParams
    vectors: tuple
    labels: tuple

    def __len__(self):
        return len(self.vectors)


def ground_basis(L: int, bc, params: ModelParams) -> GroundBasis:
    """Kernel basis: one state per root, plus |1100011> on the open chain of 7 sites."""
    bc = BC.of(bc)
    if L < 6:
        raise ValueError("ground basis is provided for L >= 6")
    roots = enumerate_roots(L, bc, "vmd" if bc is BC.PER else "bvmd")
    vecs = [vmd_ground_state(R, params.lam) for R in roots]
    labels: list = list(roots)
    if bc is BC.OBC and L == 7:
        vecs.append(basis_state(ANOMALY))
        labels.append(ANOMALY)
    return GroundBasis(L, bc, params, tuple(vecs), tuple(labels))


# monomer trains


def train_tiling(n: int, i: int) -> Tiling:
    """Root of n monomers on an open interval, the last one being M_i."""
    last = {1: "M1", 2: "M2", 3: "M"}[i]
    return Tiling(BC.OBC, 3 * (n - 1) + i, ("M",) * (n - 1) + (last,))


@lru_cache(maxsize=512)
def phi(n: int, i: int, lam: complex) -> AmplitudeVector:
    """State of an n-monomer train ending in M_i, built by the two-term recursion."""
    if i not in (1, 2, 3):
        raise ValueError("i must be 1, 2 or 3")
    if n == 0:
        return SCALAR_ONE
    mono = basis_state(PATTERNS[{1: "M1", 2: "M2", 3: "M"}[i]])
    if n == 1:
        return mono
    dimer = basis_state(PATTERNS[{1: "D1", 2: "D2", 3: "D"}[i]])
    return phi(n - 1, 3, lam).tensor(mono) + phi(n - 2, 3, lam).tensor(dimer).scaled(lam)


def phi_norm2(n: int, r: float) -> float:
    """Squared norm of phi_n: a_n = a_{n-1} + r a_{n-2}, a_0 = a_1 = 1."""
    a, b = 1.0, 1.0
    for _ in range(n - 1):
        a, b = b, b + r * a
    return b if n >= 1 else 1.0


def beta(n: int, r: float) -> float:
    """Norm ratio |phi_{n-1}|^2 / |phi_n|^2 in closed form."""
    if n < 1:
        raise ValueError("n >= 1 required")
    s = math.sqrt(1 + 4 * r)
    bp, bm = (1 + s) / 2, (1 - s) / 2
    q = bm / bp
    return (1 - q**n) / (1 - q ** (n + 1)) / bp


def beta_limit(r: float) -> float:
    return 2 / (1 + math.sqrt(1 + 4 * r))


def train_split(R: Tiling) -> tuple[Tiling | None, int, int]:
    """Split R into the prefix and its trailing monomer train (n, i)."""
    if R.bc is not BC.OBC:
        raise ValueError("monomer trains live on open intervals")
    tiles = R.tiles
    if not tiles or tiles[-1] not in ("M", "M1", "M2"):
        return (R, 0, 0)
    i = {"M1": 1, "M2": 2, "M": 3}[tiles[-1]]
    n = 1
    while n < len(tiles) and tiles[-1 - n] == "M":
        n += 1
    prefix = tiles[:-n]
    length = R.L - (3 * (n - 1) + i)
    return (Tiling(BC.OBC, length, prefix) if prefix else None, n, i)


def eta_train(n: int, i: int, lam: complex) -> AmplitudeVector:
    """Excited partner of phi_n^(i) inside the span of its class, orthogonal to it."""
    if n < 2:
        raise ValueError("n >= 2 required")
    r = abs(lam) ** 2
    mono = basis_state(PATTERNS[{1: "M1", 2: "M2", 3: "M"}[i]])
    dimer = basis_state(PATTERNS[{1: "D1", 2: "D2", 3: "D"}[i]])
    first = phi(n - 1, 3, lam).tensor(mono).scaled(-np.conj(lam) * beta(n - 1, r))
    return first + phi(n - 2, 3, lam).tensor(dimer)


def eta(R: Tiling, lam: complex) -> AmplitudeVector:
    """Prefix ground state times the excited train state."""
    prefix, n, i = train_split(R)
    if n < 2 or not is_root(R):
        raise ValueError("root must end in two or more monomers")
    head = SCALAR_ONE if prefix is None else vmd_ground_state(prefix, lam)
    return head.tensor(eta_train(n, i, lam))


def ends_in_monomer_pair(R: Tiling) -> bool:
    return R.bc is BC.OBC and is_root(R) and train_split(R)[1] >= 2


# projectors


@dataclass(frozen=True, eq=False)
class Projector:
    """Orthogonal projector Q Q^dag with Q orthonormal columns on ``support``."""

    L: int
    support: np.ndarray
    Q: np.ndarray

    @property
    def rank(self) -> int:
        return self.Q.shape[1]

    def matrix(self, basis: np.ndarray | None = None) -> np.ndarray:
        """Dense matrix on ``basis`` (default: the support)."""
        if basis is None:
            return self.Q @ self.Q.conj().T
        Qb = self.coords(basis)
        return Qb @ Qb.conj().T

    def coords(self, basis: np.ndarray) -> np.ndarray:
        """Rows of Q re-indexed onto ``basis`` (zeros where the support is absent)."""
        out = np.zeros((len(basis), self.rank), dtype=complex)
        pos = np.searchsorted(self.support, basis)
        pos_c = np.minimum(pos, len(self.support) - 1)
        hit = self.support[pos_c] == basis
        out[hit] = self.Q[pos_c[hit]]
        return out


def orthonormal_projector(vectors) -> Projector:
    """Projector onto the span, via an SVD with relative cutoff 1e-10."""
    vectors = list(vectors)
    if not vectors:
        raise ValueError("no vectors")
    L = vectors[0].L
    support = np.array(sorted({k for v in vectors for k in v.amps}), dtype=np.int64)
    A = np.column_stack([v.to_array(support) for v in vectors])
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    keep = s > RANK_TOL * (s[0] if len(s) else 0)
    return Projector(L, support, U[:, keep])


def ground_projector(L: int, bc, params: ModelParams) -> Projector:
    """Orthonormalized ground basis; states of distinct roots never overlap."""
    gb = ground_basis(L, bc, params)
    support = np.array(sorted({k for v in gb.vectors for k in v.amps}), dtype=np.int64)
    Q = np.zeros((len(support), len(gb.vectors)), dtype=complex)
    for j, v in enumerate(gb.vectors):
        Q[:, j] = v.to_array(support) / v.norm()
    return Projector(L, support, Q)
