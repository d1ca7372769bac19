"""Eigensolvers, invariant-subspace restriction and the numerical side of every bound."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from . import bounds
from .configspace import BC, Config, all_configs, as_config, electrostatic_energy, extract_local, window_sites
from .hamiltonian import ModelParams, SectorOperator, build_hamiltonian, operator_on_basis
from .states import eta, ends_in_monomer_pair, ground_projector, train_split
from .tiling import Tiling, config_value, enumerate_roots, is_tiling_config, tiling_configs

DENSE_MAX = 4096
ZERO_REL = 1e-10


class SolverError(RuntimeError):
    pass


class InvarianceError(ValueError):
    pass


def zero_tol(norm: float) -> float:
    return ZERO_REL * max(1.0, norm)


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    multiplicity: int
    gap: float
    residuals: np.ndarray
    solver: dict
    vectors: np.ndarray | None = field(default=None, repr=False)

    def to_json(self) -> str:
        return json.dumps({
            "eigenvalues": [float(w) for w in self.eigenvalues],
            "multiplicity": int(self.multiplicity),
            "gap": None if math.isnan(self.gap) else float(self.gap),
            "residuals": [float(r) for r in self.residuals],
            "solver": self.solver,
        })


def _as_matrix(op):
    if isinstance(op, SectorOperator):
        return op.to_sparse()
    if sp.issparse(op):
        return op.tocsr()
    return np.asarray(op)


def _norm_bound(A) -> float:
    if A.shape[0] == 0:
        return 0.0
    return float(np.max(np.asarray(abs(A).sum(axis=1)).ravel()))


def eigen_lowest(op, k: int = 6, method: str = "auto", seed: int = 0) -> SpectrumResult:
    """k lowest eigenpairs; dense up to DENSE_MAX, implicitly restarted Lanczos above."""
    A = _as_matrix(op)
    n = A.shape[0]
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= dim")
    if method == "auto":
        method = "dense" if n <= DENSE_MAX else "iterative"
    if method == "dense":
        M = A.toarray() if sp.issparse(A) else A
        if np.iscomplexobj(M) and not np.any(M.imag):
            M = M.real
        w, V = sla.eigh(M, subset_by_index=[0, k - 1], driver="evx")
        norm = _norm_bound(A)
        info = {"method": "dense", "dim": n}
    else:
        rng = np.random.Generator(np.random.Philox(seed))
        v0 = rng.standard_normal(n) + 0j
        maxiter = int(50 * k * math.sqrt(n))
        try:
            w, V = spla.eigsh(A, k=k, which="SA", v0=v0, maxiter=maxiter, tol=1e-13)
        except spla.ArpackNoConvergence as exc:
            raise SolverError(
                f"Lanczos did not converge: {len(exc.eigenvalues)} of {k} pairs after {maxiter} iterations"
            ) from exc
        order = np.argsort(w)
        w, V = w[order], V[:, order]
        norm = _norm_bound(A)
        info = {"method": "lanczos", "dim": n, "maxiter": maxiter, "seed": seed}
    res = np.linalg.norm(A @ V - V * w, axis=0)
    tol = zero_tol(norm)
    zero = w <= tol
    above = w[~zero]
    info["norm"] = norm
    return SpectrumResult(w, int(zero.sum()), float(above[0]) if len(above) else math.nan, res, info, V)


def restrict(op: SectorOperator, members) -> SectorOperator:
    """Principal submatrix on configuration members, after checking invariance."""
    members = np.asarray(members, dtype=np.int64)
    idx = op.index_of(members)
    A = op.to_sparse()
    outside = np.ones(op.dim, dtype=bool)
    outside[idx] = False
    leak = A[outside][:, idx]
    if leak.nnz and abs(leak).max() > ZERO_REL * max(1.0, op.norm_bound()):
        raise InvarianceError("subspace is not invariant")
    return op.submatrix(np.sort(idx))


def _eigvalsh(op: SectorOperator) -> np.ndarray:
    if op.dim == 0:
        return np.zeros(0)
    return np.linalg.eigvalsh(op.to_dense())


def full_spectrum(L: int, bc, params: ModelParams) -> np.ndarray:
    """All eigenvalues of H, collected over symmetry sectors."""
    ops = build_hamiltonian(L, bc, params)
    return np.sort(np.concatenate([_eigvalsh(o) for o in ops.values()]))


def kernel_dimension(L: int, bc, params: ModelParams) -> int:
    w = full_spectrum(L, bc, params)
    return int(np.sum(w <= zero_tol(w[-1])))


def family(bc) -> str:
    return "vmd" if BC.of(bc) is BC.PER else "bvmd"


def tiling_operator(L: int, bc, params: ModelParams, window=None) -> SectorOperator:
    """H (or an embedded interval Hamiltonian) on the tiling subspace."""
    return operator_on_basis(L, bc, params, tiling_configs(L, bc, family(bc)), window)


def _gap(w: np.ndarray, norm: float) -> float:
    above = w[w > zero_tol(norm)]
    return float(above[0]) if len(above) else math.inf


@dataclass(frozen=True)
class GapSplit:
    L: int
    bc: str
    e1: float
    e0: float
    gap: float
    kernel_dim: int
    norm: float

    def to_dict(self):
        return {k: getattr(self, k) for k in ("L", "bc", "e1", "e0", "gap", "kernel_dim", "norm")}


def gap_split(L: int, params: ModelParams, bc=BC.PER) -> GapSplit:
    """Tiling-subspace gap, complement ground energy and the unrestricted gap.

    Each is computed from its own set of sector blocks.
    """
    bc = BC.of(bc)
    C = tiling_configs(L, bc, family(bc))
    ops = build_hamiltonian(L, bc, params)
    full, inside, outside = [], [], []
    for o in ops.values():
        full.append(_eigvalsh(o))
        mask = np.isin(o.basis, C)
        inside.append(_eigvalsh(restrict(o, o.basis[mask])) if mask.any() else np.zeros(0))
        outside.append(_eigvalsh(restrict(o, o.basis[~mask])) if (~mask).any() else np.zeros(0))
    full, inside, outside = (np.sort(np.concatenate(x)) for x in (full, inside, outside))
    norm = float(full[-1])
    return GapSplit(
        L, bc.value,
        e1=_gap(inside, norm),
        e0=float(outside[0]) if len(outside) else math.inf,
        gap=_gap(full, norm),
        kernel_dim=int(np.sum(full <= zero_tol(norm))),
        norm=norm,
    )


def e1_numeric(L: int, params: ModelParams, bc=BC.PER) -> float:
    """Gap of H restricted to the tiling subspace."""
    w = _eigvalsh(tiling_operator(L, bc, params))
    return _gap(w, float(w[-1]))


def e0_numeric(L: int, params: ModelParams, bc=BC.PER) -> float:
    """Ground energy of H on the complement of the tiling subspace."""
    return gap_split(L, params, bc).e0


def restricted_constants(k: int, params: ModelParams) -> tuple[float, float]:
    """(gap, norm) of the open-chain Hamiltonian on [1,k] restricted to its tiling subspace."""
    w = _eigvalsh(tiling_operator(k, BC.OBC, params))
    return _gap(w, float(w[-1])), float(w[-1])


# embedded ground projectors


def embedded_projector(basis: np.ndarray, L: int, sites: list[int], params: ModelParams,
                       check: bool = True) -> np.ndarray:
    """Dense matrix of G_X (open-chain ground projector of the sites X) tensor identity,
    on the span of ``basis``; the span must be invariant."""
    local, rest = extract_local(basis, sites, L)
    U = ground_projector(len(sites), BC.OBC, params).coords(local)
    P = (U @ U.conj().T) * (rest[:, None] == rest[None, :])
    if check and np.abs(P @ P - P).max() > 1e-10:
        raise InvarianceError("basis span is not invariant under the ground projector")
    return P


def _opnorm(A: np.ndarray) -> float:
    return float(np.linalg.norm(A, 2)) if A.size else 0.0


@dataclass(frozen=True)
class EpsilonResult:
    M: int
    eps: float
    per_root: tuple  # (root string, n, ||G_X eta||^2 / ||eta||^2, f_n)

    @property
    def eps2(self) -> float:
        return self.eps**2


def epsilon_numeric(M: int, params: ModelParams) -> EpsilonResult:
    """Norm of G_X (G_[1,M-3] - G_[1,M]) on the tiling subspace of [1,M], X = [M-8, M]."""
    if M < 10:
        raise ValueError("M >= 10 required")
    C = tiling_configs(M, BC.OBC, "bvmd")
    G = ground_projector(M, BC.OBC, params).matrix(C)
    G_left = embedded_projector(C, M, list(range(1, M - 2)), params)
    G_x = embedded_projector(C, M, list(range(M - 8, M + 1)), params)
    eps = _opnorm(G_x @ (G_left - G))
    rows = []
    r = params.r
    for R in enumerate_roots(M, BC.OBC, "bvmd"):
        if not ends_in_monomer_pair(R):
            continue
        n = train_split(R)[1]
        e = eta(R, params.lam).to_array(C)
        ratio = float(np.linalg.norm(G_x @ e) ** 2 / np.linalg.norm(e) ** 2)
        rows.append((str(R), n, ratio, bounds.f_n(n, r) if n >= 4 else 0.0))
    return EpsilonResult(M, eps, tuple(rows))


# Knabe projector chain on the ring


@dataclass(frozen=True)
class KnabeChainResult:
    L: int
    n: int
    intervals: tuple
    gap_HN: float
    min_gap_Hnk: float
    knabe_rhs: float
    gamma: float
    C: float
    min_gap_local: float
    bound: float
    bound_valid: bool
    projector_error: float
    commutator_max: float
    knabe_eig_min: float
    sandwich_lower_min: float
    sandwich_upper_min: float


def knabe_intervals(L: int) -> list[tuple[int, int]]:
    """(start, length) of the overlapping windows covering the ring; L = 3N + r, r in {3,4,5}."""
    N = (L - 3) // 3
    r = L - 3 * N
    out = [(3 * j - 2, 6) for j in range(1, N + 1)]
    out.append((L - r + 1, r + 3))
    return out


def _cyclic_union(intervals, k, n, L):
    """(start, length) of n consecutive ring windows starting with window k."""
    start = intervals[k][0]
    end = start
    for j in range(n):
        s, ln = intervals[(k + j) % len(intervals)]
        end = max(end, start + (s - start) % L + ln - 1)
    return start, end - start + 1


def knabe_chain(L: int, params: ModelParams, n: int = 2) -> KnabeChainResult:
    if L < 3 * n + 9:
        raise ValueError("ring too short for this coarse-graining size")
    C = tiling_configs(L, BC.PER, "vmd")
    dim = len(C)
    I = np.eye(dim)
    wins = knabe_intervals(L)
    K = len(wins)
    P = [I - embedded_projector(C, L, window_sites(s, ln, L), params) for s, ln in wins]
    proj_err = max(max(np.abs(p @ p - p).max(), np.abs(p - p.conj().T).max()) for p in P)
    comm = 0.0
    for i in range(K):
        for j in range(i + 1, K):
            if (j - i) % K in (1, K - 1):
                continue
            comm = max(comm, np.abs(P[i] @ P[j] - P[j] @ P[i]).max())
    if comm > 1e-10:
        raise ValueError(f"non-neighbouring projectors fail to commute ({comm:.2e})")
    HN = sum(P)
    wN = np.linalg.eigvalsh(HN)
    gap_HN = _gap(wN, wN[-1])
    gaps_nk = []
    for k in range(K):
        Hnk = sum(P[(k + j) % K] for j in range(n))
        w = np.linalg.eigvalsh(Hnk)
        gaps_nk.append(_gap(w, w[-1]))
    min_gap_nk = min(gaps_nk)
    rhs = bounds.knabe(n, min_gap_nk)
    eig_check = float(np.min((n - 1) * wN**2 - n * (min_gap_nk - 1 / n) * wN))

    H = tiling_operator(L, BC.PER, params).to_dense()
    local = [tiling_operator(L, BC.PER, params, window=w).to_dense() for w in wins]
    local_w = [np.linalg.eigvalsh(h) for h in local]
    gamma = min(_gap(w, w[-1]) for w in local_w)
    Cc = max(float(w[-1]) for w in local_w)
    lower = float(np.linalg.eigvalsh(H - gamma / 2 * HN)[0])
    upper = float(np.linalg.eigvalsh(Cc * HN - H)[0])
    big_gaps = []
    for k in range(K):
        win = _cyclic_union(wins, k, n, L)
        w = np.linalg.eigvalsh(tiling_operator(L, BC.PER, params, window=win).to_dense())
        big_gaps.append(_gap(w, w[-1]))
    gmin = min(big_gaps)
    b = bounds.coarse_knabe(gamma, Cc, n, gmin)
    return KnabeChainResult(
        L, n, tuple(wins), gap_HN, min_gap_nk, rhs, gamma, Cc, gmin, b.value, b.valid,
        float(proj_err), float(comm), eig_check, lower, upper,
    )


# martingale chain on the open chain


@dataclass(frozen=True)
class MartingaleChainResult:
    L: int
    intervals: tuple
    eps: float
    gamma: float
    bound: float
    bound_valid: bool
    gap: float
    orthogonality_error: float
    completeness_error: float


def martingale_intervals(L: int) -> list[tuple[int, int]]:
    """[1, 6+r] then nine-site windows [3n+r-5, 3n+r+3]; L = 3N + r with r in {1,2,3}."""
    N = (L - 1) // 3
    r = L - 3 * N
    out = [(1, 6 + r)]
    out += [(3 * n + r - 5, 9) for n in range(2, N)]
    return out


def martingale_chain(L: int, params: ModelParams) -> MartingaleChainResult:
    """Measured eps of the nested chain and the resulting gap bound on the tiling subspace."""
    C = tiling_configs(L, BC.OBC, "bvmd")
    dim = len(C)
    wins = martingale_intervals(L)
    G_lam = [np.eye(dim)]
    for s, ln in wins:
        end = s + ln - 1
        G_lam.append(embedded_projector(C, L, list(range(1, end + 1)), params))
    G_lam.append(np.zeros((dim, dim)))
    E = [G_lam[k] - G_lam[k + 1] for k in range(len(G_lam) - 1)]
    orth = 0.0
    for a in range(len(E)):
        for b in range(len(E)):
            target = E[a] if a == b else 0
            orth = max(orth, np.abs(E[a] @ E[b] - target).max())
    compl = float(np.abs(sum(E) - np.eye(dim)).max())
    G_x = [embedded_projector(C, L, list(range(s, s + ln)), params) for s, ln in wins]
    eps = 0.0
    for k in range(len(wins) - 1):
        eps = max(eps, _opnorm(G_x[k + 1] @ E[k + 1]))
    locs = [np.linalg.eigvalsh(tiling_operator(L, BC.OBC, params, window=w).to_dense()) for w in wins]
    gamma = min(_gap(w, w[-1]) for w in locs)
    b = bounds.martingale(gamma, 3, 3, eps)
    w = np.linalg.eigvalsh(tiling_operator(L, BC.OBC, params).to_dense())
    return MartingaleChainResult(
        L, tuple(wins), eps, gamma, b.value, b.valid, _gap(w, w[-1]), float(orth), compl,
    )


# classification behind the complement ground-energy bound


def _occ(mu: Config, bc: BC):
    return lambda x: mu.occ(x, bc)


def _s3_sites(mu: Config, bc: BC, xs) -> list[int]:
    o = _occ(mu, bc)
    return [x for x in xs if o(x) and o(x + 1) and (o(x - 3) or o(x + 4))]


def _s2_sites(mu: Config, bc: BC) -> list[int]:
    o = _occ(mu, bc)
    return [x for x in range(1, mu.L + 1) if o(x) and o(x + 1) and o(x - 4) and o(x - 5)]


def classify_config(mu, bc=BC.PER) -> str:
    """One of 'tiling', 'S1', 'S2', 'S3', 'S3_edge' (open chains only) or 'unlabeled'."""
    mu, bc = as_config(mu), BC.of(bc)
    if is_tiling_config(mu, bc):
        return "tiling"
    if electrostatic_energy(mu, bc) >= 1:
        return "S1"
    if _s2_sites(mu, bc):
        return "S2"
    if bc is BC.PER:
        return "S3" if _s3_sites(mu, bc, range(1, mu.L + 1)) else "unlabeled"
    if _s3_sites(mu, bc, range(2, mu.L - 1)):
        return "S3"
    if _s3_sites(mu, bc, range(1, mu.L + 1)):
        return "S3_edge"
    return "unlabeled"


def _red(x: int, L: int, bc: BC) -> int:
    return (x - 1) % L + 1 if bc is BC.PER else x


def _move(mu: Config, remove, add, bc: BC) -> Config:
    L = mu.L
    v = mu.value
    for x in remove:
        v &= ~(1 << (L - _red(x, L, bc)))
    for x in add:
        v |= 1 << (L - _red(x, L, bc))
    return Config(L, v)


def gse_witnesses(mu, bc=BC.PER) -> tuple[Config, frozenset]:
    """Witness configuration eta (with positive electrostatic energy) and the set
    D_mu of (nu, x) pairs whose q-terms link mu to eta.

    S3: x is the largest admissible pair site; the pair (x, x+1) hops outward
    to (x-1, x+2).
    S2: with the pattern 1100011 on x-5..x+1 (x largest), the pair (x, x+1)
    hops outward to (x-1, x+2), which creates a 1001 on (x-4, x-1); that one
    hops inward to (x-3, x-2).  Both steps share the intermediate
    configuration, so the chain is
        mu --q_x-- mu' --q_{x-3}-- eta,
    and eta carries the pair (x-5, x-3) at distance two.
    On an open chain with x = L-1 the mirror image is used instead.
    S3_edge (open chains): the 1001 on sites (2,5) or (L-4,L-1) hops inward.
    """
    mu, bc = as_config(mu), BC.of(bc)
    L = mu.L
    label = classify_config(mu, bc)
    if label == "S3":
        xs = range(1, L + 1) if bc is BC.PER else range(2, L - 1)
        x = max(_s3_sites(mu, bc, xs))
        nu = _move(mu, (x, x + 1), (), bc)
        return _move(mu, (x, x + 1), (x - 1, x + 2), bc), frozenset({(nu, _red(x, L, bc))})
    if label == "S2":
        x = max(_s2_sites(mu, bc))
        if bc is BC.PER or x <= L - 2:
            first, second = (x, x + 1), (x - 4, x - 1)
            mid = _move(mu, first, (x - 1, x + 2), bc)
            z1, z2 = x, x - 3
            out = _move(mid, second, (x - 3, x - 2), bc)
        else:
            # mirror image: the left pair hops outward, then the new 1001 closes inward
            if x - 6 < 1:
                raise ValueError("S2 witness would use a boundary term")
            first, second = (x - 5, x - 4), (x - 3, x)
            mid = _move(mu, first, (x - 6, x - 3), bc)
            z1, z2 = x - 5, x - 2
            out = _move(mid, second, (x - 2, x - 1), bc)
        nu1 = _move(mu, first, (), bc)
        nu2 = _move(mid, second, (), bc)
        return out, frozenset({(nu1, _red(z1, L, bc)), (nu2, _red(z2, L, bc))})
    if label == "S3_edge":
        o = _occ(mu, bc)
        if o(1) and o(2) and o(5):
            far, x = (2, 5), 3
        else:
            far, x = (L - 4, L - 1), L - 3
        nu = _move(mu, far, (), bc)
        return _move(mu, far, (x, x + 1), bc), frozenset({(nu, x)})
    raise ValueError(f"{mu} is labelled {label}; witnesses exist for S2, S3 and S3_edge only")


@dataclass(frozen=True)
class PartitionReport:
    L: int
    bc: str
    counts: dict
    unlabeled: int
    no_witness: int
    d_collisions: int
    d_cross_collisions: int
    eta_positive: bool
    c2: int
    c3: int
    c3_edge: int


def gse_partition(L: int, bc=BC.PER) -> PartitionReport:
    """Exhaustive classification and witness statistics over all 2^L configurations.

    ``d_collisions`` counts (nu, x) pairs shared by two configurations of the
    same class; ``d_cross_collisions`` those shared across classes.
    """
    bc = BC.of(bc)
    counts: dict = {}
    owner: dict = {}
    same = cross = missing = 0
    positive = True
    images: dict = {"S2": {}, "S3": {}, "S3_edge": {}}
    for v in range(1 << L):
        mu = Config(L, v)
        lab = classify_config(mu, bc)
        counts[lab] = counts.get(lab, 0) + 1
        if lab not in images:
            continue
        try:
            e, D = gse_witnesses(mu, bc)
        except ValueError:
            missing += 1
            continue
        positive &= electrostatic_energy(e, bc) >= 1
        for item in D:
            if item in owner:
                same += owner[item] == lab
                cross += owner[item] != lab
            else:
                owner[item] = lab
        images[lab][e] = images[lab].get(e, 0) + 1
    mult = {k: max(d.values(), default=0) for k, d in images.items()}
    return PartitionReport(
        L, bc.value, counts, counts.get("unlabeled", 0), missing, same, cross, positive,
        mult["S2"], mult["S3"], mult["S3_edge"],
    )


# open-chain edge modes


@dataclass(frozen=True)
class EdgeSpectrum:
    L: int
    complement_ground: float
    edge_mode: float
    edge_bound: float
    spectrum: SpectrumResult


def blockwise_lowest(blocks, k: int = 4) -> SpectrumResult:
    """Merge the lowest eigenpairs of independent blocks into one result."""
    ws, rs = [], []
    norm = 0.0
    for b in blocks:
        if b.dim == 0:
            continue
        res = eigen_lowest(b, k=min(k, b.dim))
        ws.append(res.eigenvalues)
        rs.append(res.residuals)
        norm = max(norm, res.solver["norm"])
    w, r = np.concatenate(ws), np.concatenate(rs)
    order = np.argsort(w, kind="stable")[:k]
    w, r = w[order], r[order]
    zero = w <= zero_tol(norm)
    above = w[~zero]
    return SpectrumResult(w, int(zero.sum()), float(above[0]) if len(above) else math.nan, r,
                          {"method": "blockwise", "blocks": len(ws), "norm": norm})


def edge_spectrum(L: int, params: ModelParams) -> EdgeSpectrum:
    """Complement ground energy and lowest nonzero eigenvalue of the open chain."""
    if L < 11:
        raise ValueError("L >= 11 required")
    C = tiling_configs(L, BC.OBC, "bvmd")
    ops = build_hamiltonian(L, BC.OBC, params)
    comp = [restrict(o, o.basis[~np.isin(o.basis, C)]) for o in ops.values()]
    res = blockwise_lowest(comp, k=4)
    split = gap_split(L, params, BC.OBC)
    return EdgeSpectrum(L, float(res.eigenvalues[0]), split.gap,
                        bounds.edge_energy_bound(params.kappa, params.lam), res)


def edge_root_configs(L: int) -> set[int]:
    return {config_value(R) for R in enumerate_roots(L, BC.OBC, "edge")}
