"""Truncated pseudopotential Hamiltonians on rings and intervals.

    H = sum_x n_x n_{x+2} + kappa * sum_x q_x^dag q_x,
    q_x = s-_x s-_{x+1} - lam * s-_{x-1} s-_{x+2}.

On a ring every site carries both terms (indices mod L).  On an open interval
[1, L] the electrostatic term runs over x = 1..L-2 and the q-term over
x = 2..L-2, so every window stays inside the interval.

Two independent code paths are provided: a vectorized assembler that writes
the operator as a sparse matrix over a sorted configuration basis, and a
matrix-free ``apply_hamiltonian`` acting on sparse amplitude maps.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .configspace import (
    BC,
    Config,
    Sector,
    all_configs,
    as_config,
    enumerate_sector,
    sector_labels,
    site_bit,
    window_sites,
)

MAX_ASSEMBLY_ENTRIES = 1 << 22


@dataclass(frozen=True)
class ModelParams:
    kappa: float
    lam: complex
    alpha: float | None = None

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        object.__setattr__(self, "lam", complex(self.lam))

    @property
    def r(self) -> float:
        return abs(self.lam) ** 2


def physical_params(alpha: float) -> ModelParams:
    """Parameters of the thin-cylinder regime at aspect ratio ``alpha``."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    return ModelParams(math.exp(1.5 * alpha**2) / 4, -3 * math.exp(-2 * alpha**2), alpha)


@dataclass(frozen=True)
class Terms:
    """Electrostatic site pairs and q-windows (x-1, x, x+1, x+2) of one operator."""

    pairs: tuple[tuple[int, int], ...]
    windows: tuple[tuple[int, int, int, int], ...]


def local_terms(L: int, bc, window: tuple[int, int] | None = None) -> Terms:
    """Terms of the full Hamiltonian, or of the open-interval Hamiltonian on
    ``window = (start, length)`` embedded in the system (wrapping allowed on a ring)."""
    bc = BC.of(bc)
    if window is None:
        if bc is BC.PER:
            xs_e, xs_q = range(1, L + 1), range(1, L + 1)
        else:
            xs_e, xs_q = range(1, L - 1), range(2, L - 1)
        red = (lambda y: (y - 1) % L + 1) if bc is BC.PER else (lambda y: y)
        pairs = tuple((red(x), red(x + 2)) for x in xs_e)
        wins = tuple(tuple(red(x + d) for d in (-1, 0, 1, 2)) for x in xs_q)
        return Terms(pairs, wins)
    start, length = window
    if length > L or length < 1:
        raise ValueError("window longer than the system")
    if bc is BC.OBC and not (1 <= start and start + length - 1 <= L):
        raise ValueError("window leaves the open interval")
    sites = window_sites(start, length, L)
    pairs = tuple((sites[j], sites[j + 2]) for j in range(length - 2))
    wins = tuple(tuple(sites[j + d] for d in (-1, 0, 1, 2)) for j in range(1, length - 2))
    return Terms(pairs, wins)


def hop_amplitude(params: ModelParams) -> complex:
    """Matrix element <..0110..|H|..1001..> of one q-window."""
    return -params.kappa * params.lam


@dataclass(frozen=True, eq=False)
class SectorOperator:
    """Hermitian operator on a sorted configuration basis.

    ``upper`` holds the strictly upper triangle; the lower one is its adjoint.
    """

    L: int
    bc: BC
    params: ModelParams
    sector: Sector | None
    basis: np.ndarray
    diagonal: np.ndarray
    upper: sp.csr_matrix
    _lower: sp.csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_lower", self.upper.conj().T.tocsr())

    @property
    def dim(self) -> int:
        return len(self.basis)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v)
        d = self.diagonal if v.ndim == 1 else self.diagonal[:, None]
        return d * v + self.upper @ v + self._lower @ v

    __matmul__ = matvec

    def to_sparse(self) -> sp.csr_matrix:
        return (sp.diags(self.diagonal.astype(complex)) + self.upper + self._lower).tocsr()

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def norm_bound(self) -> float:
        """Row-sum bound on the operator norm."""
        if self.dim == 0:
            return 0.0
        absm = abs(self.upper) + abs(self._lower)
        return float(np.max(np.abs(self.diagonal) + np.asarray(absm.sum(axis=1)).ravel()))

    def index_of(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=np.int64)
        idx = np.searchsorted(self.basis, values)
        idx = np.minimum(idx, max(self.dim - 1, 0))
        if self.dim == 0 or np.any(self.basis[idx] != values):
            raise KeyError("configuration not in basis")
        return idx

    def submatrix(self, idx: np.ndarray, sector: Sector | None = None) -> "SectorOperator":
        idx = np.asarray(idx)
        return SectorOperator(
            self.L, self.bc, self.params, sector, self.basis[idx], self.diagonal[idx],
            self.upper[idx][:, idx].tocsr(),
        )

    def configs(self) -> list[Config]:
        return [Config(self.L, int(v)) for v in self.basis]


def operator_on_basis(L: int, bc, params: ModelParams, basis, window=None,
                      strict: bool = True, sector: Sector | None = None) -> SectorOperator:
    """Assemble H (or the embedded interval Hamiltonian) on a configuration basis.

    With ``strict`` the basis must be invariant: any hop leaving it raises.
    Otherwise such matrix elements are dropped, which yields the compression
    P H P onto the span of the basis.
    """
    bc = BC.of(bc)
    basis = np.asarray(basis, dtype=np.int64)
    if np.any(np.diff(basis) <= 0):
        raise ValueError("basis must be strictly increasing")
    terms = local_terms(L, bc, window)
    n = len(basis)
    if n * (len(terms.windows) + 1) > MAX_ASSEMBLY_ENTRIES:
        raise MemoryError("operator exceeds the explicit assembly budget")
    bit = {x: (basis >> (L - x)) & 1 for x in range(1, L + 1)}

    diag = np.zeros(n)
    for y, z in terms.pairs:
        diag += bit[y] & bit[z]
    kappa, r = params.kappa, params.r
    hop = hop_amplitude(params)
    rows, cols, vals = [], [], []
    for a, b, c, d in terms.windows:
        pair = bit[b] & bit[c]
        outer = bit[a] & bit[d]
        diag += kappa * (pair + r * outer)
        src = np.nonzero(outer & (1 - bit[b]) & (1 - bit[c]))[0]
        if len(src) == 0:
            continue
        flip = site_bit(a, L) | site_bit(b, L) | site_bit(c, L) | site_bit(d, L)
        target = basis[src] ^ flip
        pos = np.searchsorted(basis, target)
        pos_c = np.minimum(pos, n - 1)
        found = basis[pos_c] == target
        if strict and not np.all(found):
            raise ValueError("basis is not invariant under the operator")
        src, pos = src[found], pos_c[found]
        # entry H[target, src] = hop; store it in the upper triangle
        up = pos < src
        rows.append(np.where(up, pos, src))
        cols.append(np.where(up, src, pos))
        vals.append(np.where(up, hop, np.conj(hop)))
    if rows:
        upper = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
        ).tocsr()
        upper.sum_duplicates()
    else:
        upper = sp.csr_matrix((n, n), dtype=complex)
    return SectorOperator(L, bc, params, sector, basis, diag, upper)


def build_hamiltonian(L: int, bc, params: ModelParams, sector: Sector | None = None,
                      window=None):
    """Sector block of H, or a dict ``Sector -> SectorOperator`` covering all sectors."""
    bc = BC.of(bc)
    if L < 4:
        raise ValueError("need at least four sites")
    if sector is not None:
        basis = enumerate_sector(L, bc, sector.N, sector.M)
        return operator_on_basis(L, bc, params, basis, window, sector=sector)
    full = operator_on_basis(L, bc, params, all_configs(L), window)
    n, m = sector_labels(full.basis, L, bc)
    key = n * (L * L + L + 1) + m
    order = np.argsort(key, kind="stable")
    bounds = np.nonzero(np.diff(key[order]))[0] + 1
    out = {}
    for idx in np.split(order, bounds):
        idx = np.sort(idx)
        s = Sector(L, bc, int(n[idx[0]]), int(m[idx[0]]))
        out[s] = full.submatrix(idx, s)
    return out


def full_hamiltonian(L: int, bc, params: ModelParams, window=None) -> SectorOperator:
    """H over all 2^L configurations in lexicographic order."""
    return operator_on_basis(L, bc, params, all_configs(L), window)


# matrix-free path on sparse amplitude maps


def _q_image(v: int, win, L: int, lam: complex):
    a, b, c, d = (site_bit(s, L) for s in win)
    out = []
    if v & b and v & c:
        out.append((v ^ b ^ c, 1.0))
    if v & a and v & d:
        out.append((v ^ a ^ d, -lam))
    return out


def _q_adjoint_image(w: int, win, L: int, lam: complex):
    a, b, c, d = (site_bit(s, L) for s in win)
    out = []
    if not (w & b or w & c):
        out.append((w | b | c, 1.0))
    if not (w & a or w & d):
        out.append((w | a | d, -np.conj(lam)))
    return out


def apply_qx(mu, x: int, params: ModelParams, bc) -> list[tuple[Config, complex]]:
    """q_x |mu> as a list of (configuration, amplitude)."""
    mu, bc = as_config(mu), BC.of(bc)
    L = mu.L
    if bc is BC.OBC:
        if not 2 <= x <= L - 2:
            raise ValueError(f"window of q_{x} leaves the interval [1,{L}]")
        win = (x - 1, x, x + 1, x + 2)
    else:
        win = tuple((x + k - 1) % L + 1 for k in (-1, 0, 1, 2))
    return [(Config(L, w), complex(c)) for w, c in _q_image(mu.value, win, L, params.lam)]


def apply_hamiltonian(amps: dict[int, complex], L: int, bc, params: ModelParams,
                      window=None) -> dict[int, complex]:
    """Matrix-free H acting on a map ``packed configuration -> amplitude``."""
    terms = local_terms(L, bc, window)
    out: dict[int, complex] = {}
    for v, amp in amps.items():
        if amp == 0:
            continue
        e = sum(1 for y, z in terms.pairs if v & site_bit(y, L) and v & site_bit(z, L))
        if e:
            out[v] = out.get(v, 0) + e * amp
        for win in terms.windows:
            for w, c in _q_image(v, win, L, params.lam):
                for u, c2 in _q_adjoint_image(w, win, L, params.lam):
                    out[u] = out.get(u, 0) + params.kappa * c * c2 * amp
    return out


EDGE_PATTERNS = ("1100100", "1011000")


def edge_block(L: int, params: ModelParams):
    """H on span{|1100100 0..0>, |1011000 0..0>} for an open chain.

    Returns the 2x2 block and its eigenvalues; raises if the span is not invariant.
    """
    if L < 7:
        raise ValueError("edge block needs L >= 7")
    vecs = [int(p + "0" * (L - 7), 2) for p in EDGE_PATTERNS]
    block = np.zeros((2, 2), dtype=complex)
    for j, v in enumerate(vecs):
        img = apply_hamiltonian({v: 1.0}, L, BC.OBC, params)
        for u, c in img.items():
            if abs(c) < 1e-14:
                continue
            if u not in vecs:
                raise ValueError("edge span is not invariant")
            block[vecs.index(u), j] += c
    return block, np.linalg.eigvalsh(block)


def export_coo(op: SectorOperator, path) -> None:
    """Write the upper triangle (diagonal included) as 'row col re im' lines.

    The first line is a '#'-prefixed JSON header.
    """
    header = {
        "L": op.L, "bc": op.bc.value, "kappa": op.params.kappa,
        "lambda_re": op.params.lam.real, "lambda_im": op.params.lam.imag,
        "sector": None if op.sector is None else json.loads(op.sector.to_json()),
        "dim": op.dim,
    }
    lines = ["# " + json.dumps(header)]
    entries = [(i, i, complex(d)) for i, d in enumerate(op.diagonal) if d != 0]
    coo = op.upper.tocoo()
    entries += [(int(i), int(j), complex(v)) for i, j, v in zip(coo.row, coo.col, coo.data) if v != 0]
    entries.sort()
    lines += [f"{i} {j} {v.real!r} {v.imag!r}" for i, j, v in entries]
    Path(path).write_text("\n".join(lines) + "\n")


def read_coo(path) -> tuple[dict, sp.csr_matrix]:
    """Read an export back as (header, full Hermitian matrix)."""
    text = Path(path).read_text().splitlines()
    header = json.loads(text[0][1:])
    n = header["dim"]
    rows, cols, vals = [], [], []
    for line in text[1:]:
        i, j, re, im = line.split()
        rows.append(int(i))
        cols.append(int(j))
        vals.append(complex(float(re), float(im)))
    up = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    strict = sp.triu(up, k=1)
    return header, (up + strict.conj().T).tocsr()
