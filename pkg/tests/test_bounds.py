import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from haldane_chain.bounds import (
    bound_report,
    coarse_knabe,
    e0_bound,
    e1_fsc_bound,
    edge_energy_bound,
    f,
    f_limit,
    f_n,
    knabe,
    main_bound,
    martingale,
    mm_gap_bound,
    n_threshold,
)
from haldane_chain.hamiltonian import physical_params
from haldane_chain.states import phi
from oracles import f_mp

# sup_n f_n(r) from the 40-digit oracle
F_ORACLE = {
    0.0625: 1.06796531248665043e-05,
    0.25: 0.00111111111111111111,
    1.0: 0.0277777777777777778,
    9.0: 0.221358515128627426,
    5.2 * 5.2: 0.323005078677034998,
    36.0: 0.344326470946772033,
}
MAIN_BOUND_ALPHA_1 = 0.11968703501271348


def test_knabe_examples():
    assert knabe(2, 1) == pytest.approx(1)
    assert knabe(10, 0.1) == pytest.approx(0, abs=1e-15)
    assert knabe(3, 0.5) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        knabe(1, 1)


def test_coarse_knabe_examples():
    C = 1.7
    assert coarse_knabe(C, C, 2, C).value == pytest.approx(C / 2)
    assert coarse_knabe(0.9, C, 5, C / 5).value == pytest.approx(0, abs=1e-15)
    assert not coarse_knabe(2.0, 1.0, 3, 1.0).valid


def test_martingale_examples():
    assert martingale(2.0, 3, 3, 0).value == pytest.approx(2 / 3)
    assert martingale(2.0, 3, 4, 1 / (2 * math.sqrt(4))).value == pytest.approx(2 / 12)
    assert not martingale(1.0, 3, 3, 0.6).valid


@pytest.mark.parametrize("r,want", list(F_ORACLE.items()))
def test_f_matches_oracle(r, want):
    assert f(r) == pytest.approx(want, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 40.0))
def test_f_matches_oracle_anywhere(r):
    assert f(r) == pytest.approx(float(f_mp(r)), rel=1e-10, abs=1e-15)


def test_f_at_zero():
    assert f(0.0) == 0.0
    assert f_n(4, 0.0) == 0.0


@given(st.floats(0.0, 100.0))
def test_f_dominates_members(r):
    fr = f(r)
    assert fr >= f_n(4, r) and fr >= f_n(9, r) and fr >= f_limit(r) - 1e-15


def test_f_n_uses_norm_ratios():
    # same value when beta comes from phi norms instead of the closed form
    r = 2.25
    lam = -1.5
    ratios = lambda k: phi(k - 1, 3, lam).norm2() / phi(k, 3, lam).norm2()  # noqa: E731
    for n in range(4, 11):
        assert f_n(n, r, betas=ratios) == pytest.approx(f_n(n, r), rel=1e-12)


def test_f_below_one_third_on_grid():
    assert max(f((0.05 * k) ** 2) for k in range(105)) < 1 / 3
    assert f(36.0) > 1 / 3


def test_e0_bound_examples():
    assert e0_bound(1.0, 0.0) == pytest.approx(1 / 9)
    assert e0_bound(1.0, -1.0) == pytest.approx(1 / 12)
    assert e0_bound(1e9, 0.0) == pytest.approx(1 / 3, rel=1e-6)


def test_edge_energy_bound_examples():
    assert edge_energy_bound(1.0, 0.0) == 0.0
    assert edge_energy_bound(1.0, 1.0) == pytest.approx(1 / 16)
    for kappa in (0.5, 2.0):
        lam = 1e-4
        assert edge_energy_bound(kappa, lam) / lam**2 == pytest.approx(kappa / (4 * (kappa + 1)))


def test_martingale_composition():
    for kappa, lam in ((1.0, -1.0), (0.25, -3.0)):
        fv = f(abs(lam) ** 2)
        want = kappa / 3 * (1 - math.sqrt(3 * fv)) ** 2
        assert mm_gap_bound(kappa, lam).value == pytest.approx(want)


def test_knabe_composition():
    # gamma = kappa, C = kappa(1+2r) and gap_min from the martingale bound
    for kappa, lam, n in ((1.0, -0.5, 20), (0.4, 2.0, 50)):
        r = abs(lam) ** 2
        gap_min = mm_gap_bound(kappa, lam).value
        direct = coarse_knabe(kappa, kappa * (1 + 2 * r), n, gap_min).value
        assert e1_fsc_bound(kappa, lam, n).value == pytest.approx(direct)


def test_main_bound_examples():
    assert main_bound(1.0, 0.0).value == pytest.approx(1 / 9)
    assert main_bound(1.0, -0.3).value == pytest.approx(1 / 9)
    p = physical_params(1.0)
    b = main_bound(p.kappa, p.lam)
    assert b.valid and b.value == pytest.approx(MAIN_BOUND_ALPHA_1, rel=1e-12)
    assert not main_bound(1.0, 6.0).valid
    assert "finite_n" in main_bound(1.0, -0.3, n=30).note


def test_n_threshold():
    r = 0.09
    fv = f(r)
    assert n_threshold(1.0, -0.3) == pytest.approx((3 + 6 * r) / (1 - math.sqrt(3 * fv)) ** 2)
    assert n_threshold(1.0, -6.0) == math.inf
    n = math.ceil(n_threshold(1.0, -0.3))
    assert e1_fsc_bound(1.0, -0.3, n).value > 0 >= e1_fsc_bound(1.0, -0.3, n - 1).value


def test_bound_report_serializes():
    rep = bound_report(1.0, -1.0 + 0.5j, 8)
    d = json.loads(rep.to_json())
    assert d["lambda_im"] == 0.5 and d["n"] == 8
    assert rep.csv_row().count(",") == len(d) - 1
    assert not bound_report(1.0, 6.0).f_valid


@given(st.floats(0.01, 10), st.floats(0, 5.2))
def test_bounds_are_nonnegative_and_ordered(kappa, a):
    lam = -a
    mb = main_bound(kappa, lam).value
    assert 0 <= mb <= e0_bound(kappa, lam) + 1e-15
    assert edge_energy_bound(kappa, lam) <= 0.75 * e0_bound(kappa, lam) + 1e-15


def test_f_increases_on_grid():
    vals = [f(0.05 * k) for k in range(801)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
