import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from haldane_chain import hamiltonian
from haldane_chain.configspace import BC, Config, Sector, electrostatic_energy
from haldane_chain.hamiltonian import (
    ModelParams,
    apply_hamiltonian,
    apply_qx,
    build_hamiltonian,
    edge_block,
    export_coo,
    full_hamiltonian,
    physical_params,
    read_coo,
)
from oracles import kernel_dim, kron_hamiltonian

# kernel dimensions of the tensor-product oracle at kappa=0.25, lambda=-1.3+0.4i
KRON_KERNEL = {
    "per": {4: 5, 5: 6, 6: 10, 7: 15, 8: 21, 9: 31},
    "obc": {4: 8, 5: 11, 6: 17, 7: 26, 8: 37, 9: 54},
}
# lowest eigenvalue of the 2x2 edge block of the oracle, kappa=1, lambda=-0.1, L=8
EDGE_LOW = 0.0050124378879109754

complex_lams = st.complex_numbers(max_magnitude=4, allow_nan=False, allow_infinity=False)


def test_physical_params():
    p0 = physical_params(0.0)
    assert (p0.kappa, p0.lam) == (0.25, -3)
    p1 = physical_params(1.0)
    assert p1.kappa == pytest.approx(math.exp(1.5) / 4)
    assert p1.lam == pytest.approx(-3 * math.exp(-2))
    ks = [physical_params(a).kappa for a in (0, 0.5, 1, 2)]
    ls = [physical_params(a).lam.real for a in (0, 0.5, 1, 2)]
    assert ks == sorted(ks) and ls == sorted(ls) and ls[-1] < 0


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(0.0, 1.0)
    with pytest.raises(ValueError):
        physical_params(-1)


@pytest.mark.parametrize("window,amp", [("0110", 1.0), ("1001", "-lam"), ("1000", None)])
def test_apply_qx_windows(window, amp):
    p = ModelParams(1.0, 0.3 - 0.2j)
    mu = Config.from_string("0" + window + "0")
    out = apply_qx(mu, 3, p, "obc")
    if amp is None:
        assert out == []
        return
    assert len(out) == 1
    cfg, c = out[0]
    assert str(cfg) == "000000"
    assert c == pytest.approx(-p.lam if amp == "-lam" else amp)


def test_apply_qx_rejects_windows_off_the_interval():
    with pytest.raises(ValueError):
        apply_qx(Config.from_string("0110"), 1, ModelParams(1, -1), "obc")


@given(complex_lams)
def test_hopping_kernel_vector(lam):
    # q annihilates |1001> + lam |0110> on a four-site window
    p = ModelParams(1.0, lam)
    amps = {0b1001: 1.0, 0b0110: lam}
    total = {}
    for v, a in amps.items():
        for cfg, c in apply_qx(Config(4, v), 2, p, "obc"):
            total[cfg.value] = total.get(cfg.value, 0) + a * c
    assert all(abs(c) < 1e-12 for c in total.values())


@pytest.mark.parametrize("L", range(4, 9))
@pytest.mark.parametrize("bc", ["per", "obc"])
def test_assembly_matches_tensor_oracle(L, bc):
    p = ModelParams(0.7, -0.4 + 0.9j)
    H = full_hamiltonian(L, bc, p).to_dense()
    ref = kron_hamiltonian(L, bc, p.kappa, p.lam)
    assert np.abs(H - ref).max() < 1e-12


@pytest.mark.parametrize("bc", ["per", "obc"])
def test_off_diagonal_element(bc):
    p = ModelParams(1.3, 0.5 + 0.25j)
    op = full_hamiltonian(6, bc, p)
    i, j = op.index_of([0b001100, 0b010010])
    assert op.to_dense()[i, j] == pytest.approx(-p.kappa * p.lam)


@pytest.mark.parametrize("bc", ["per", "obc"])
def test_kernel_dimension_matches_oracle(bc):
    p = ModelParams(0.25, -1.3 + 0.4j)
    for L, want in KRON_KERNEL[bc].items():
        w = np.linalg.eigvalsh(full_hamiltonian(L, bc, p).to_dense())
        assert int(np.sum(w <= 1e-10 * max(1, w[-1]))) == want
        if L <= 7:
            assert kernel_dim(kron_hamiltonian(L, bc, p.kappa, p.lam)) == want


def test_ring_of_six_has_ten_ground_states():
    H = kron_hamiltonian(6, "per", 1.0, -0.7)
    assert kernel_dim(H) == 10


@pytest.mark.parametrize("kappa", [0.3, 1.0, 2.5])
def test_lambda_zero_is_classical(kappa):
    L = 8
    op = full_hamiltonian(L, "per", ModelParams(kappa, 0.0))
    A = op.to_dense()
    assert np.count_nonzero(A - np.diag(np.diag(A))) == 0
    for v, d in zip(op.basis, np.diag(A).real):
        mu = Config(L, int(v))
        pairs = sum(mu.occ(x, "per") * mu.occ(x + 1, "per") for x in range(1, L + 1))
        assert d == pytest.approx(electrostatic_energy(mu, "per") + kappa * pairs)
    w = np.sort(np.diag(A).real)
    assert w[w > 1e-12][0] == pytest.approx(min(1.0, kappa))


@settings(max_examples=25, deadline=None)
@given(st.integers(5, 10), st.sampled_from(["per", "obc"]), complex_lams,
       st.floats(0.05, 5), st.integers(0, 2**32 - 1))
def test_matrix_free_matches_assembled(L, bc, lam, kappa, seed):
    p = ModelParams(kappa, lam)
    op = full_hamiltonian(L, bc, p)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(op.dim) + 1j * rng.standard_normal(op.dim)
    y = op.matvec(x)
    z = apply_hamiltonian(dict(zip(map(int, op.basis), x)), L, bc, p)
    y2 = np.array([z.get(int(v), 0) for v in op.basis])
    assert np.abs(y - y2).max() <= 1e-10 * max(1, np.abs(y).max())


@settings(max_examples=20, deadline=None)
@given(st.integers(4, 9), st.sampled_from(["per", "obc"]), complex_lams, st.floats(0.05, 5))
def test_operator_is_hermitian_psd_and_sector_diagonal(L, bc, lam, kappa):
    p = ModelParams(kappa, lam)
    blocks = build_hamiltonian(L, bc, p)
    assert sum(o.dim for o in blocks.values()) == 2**L
    for S, o in blocks.items():
        A = o.to_dense()
        assert np.abs(A - A.conj().T).max() < 1e-12
        assert np.all(np.diag(A).real >= 0)
        assert np.linalg.eigvalsh(A)[0] >= -1e-10 * max(1, o.norm_bound())
    full = full_hamiltonian(L, bc, p).to_sparse().tocoo()
    from haldane_chain.configspace import sector_of
    for i, j in zip(full.row, full.col):
        a, b = Config(L, int(i)), Config(L, int(j))
        assert sector_of(a, bc) == sector_of(b, bc)


def test_sector_blocks_are_slices_of_full_operator():
    p = ModelParams(1.0, -0.6)
    S = Sector(10, BC.PER, 4, 3)
    one = build_hamiltonian(10, "per", p, sector=S)
    many = build_hamiltonian(10, "per", p)
    assert np.array_equal(one.basis, many[S].basis)
    assert np.abs(one.to_dense() - many[S].to_dense()).max() == 0


def test_window_operator_on_whole_interval_is_open_chain():
    p = ModelParams(0.8, 0.3j)
    a = full_hamiltonian(9, "obc", p, window=(1, 9)).to_dense()
    b = full_hamiltonian(9, "obc", p).to_dense()
    assert np.abs(a - b).max() == 0


def test_window_operator_is_embedded_open_chain():
    # H on sites 3..8 of a ring of 10 equals the 6-site open chain tensored with identity
    p = ModelParams(1.1, -0.45)
    L = 10
    op = full_hamiltonian(L, "per", p, window=(3, 6)).to_dense()
    small = kron_hamiltonian(6, "obc", p.kappa, p.lam)
    ref = np.kron(np.kron(np.eye(4), small), np.eye(4))
    assert np.abs(op - ref).max() < 1e-12


def test_edge_block_values():
    block, w = edge_block(8, ModelParams(1.0, -0.1))
    assert w[0] == pytest.approx(EDGE_LOW, rel=1e-12)
    assert abs(w[0] / 0.01 - 0.5) < 0.05
    _, w0 = edge_block(9, ModelParams(2.0, 0.0))
    assert w0 == pytest.approx([0.0, 3.0])


def test_edge_block_small_lambda_limit():
    for kappa in (0.5, 1.0, 3.0):
        lam = -1e-3
        _, w = edge_block(10, ModelParams(kappa, lam))
        assert w[0] / lam**2 == pytest.approx(kappa / (kappa + 1), rel=1e-4)


def test_coo_roundtrip(tmp_path):
    op = build_hamiltonian(8, "per", ModelParams(1.0, 0.2 - 0.5j), sector=Sector(8, BC.PER, 3, 2))
    path = tmp_path / "h.coo"
    export_coo(op, path)
    header, M = read_coo(path)
    assert header["L"] == 8
    assert np.abs(M.toarray() - op.to_dense()).max() < 1e-15


def test_sign_mutation_equals_lambda_flip(monkeypatch):
    # documents why the mutation test needs more than kernel dimensions
    p = ModelParams(1.0, -0.7)
    good = full_hamiltonian(7, "per", ModelParams(1.0, 0.7)).to_dense()
    monkeypatch.setattr(hamiltonian, "hop_amplitude", lambda q: q.kappa * q.lam)
    bad = full_hamiltonian(7, "per", p).to_dense()
    assert np.abs(good - bad).max() < 1e-15
