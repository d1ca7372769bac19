"""Closed-form gap bounds.

Every function here is pure.  Functions with a validity condition return a
``Bound`` carrying a flag instead of raising, so parameter sweeps never abort.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass

from .states import beta, beta_limit

F_TOL = 1e-14
F_STREAK = 32
F_CAP = 10_000


@dataclass(frozen=True)
class Bound:
    value: float
    valid: bool = True
    note: str = ""

    def __float__(self):
        return self.value


def knabe(n: int, gap_min: float) -> float:
    if n < 2:
        raise ValueError("n >= 2 required")
    return n / (n - 1) * (gap_min - 1 / n)


def coarse_knabe(gamma: float, C: float, n: int, gap_min: float) -> Bound:
    """Finite-size criterion for a Hamiltonian sandwiched as gamma/2 H_N <= H <= C H_N."""
    if n < 2:
        raise ValueError("n >= 2 required")
    value = gamma * n / (2 * C * (n - 1)) * (gap_min - C / n)
    if gamma > C * (1 + 1e-12):
        return Bound(value, False, "gamma exceeds C")
    return Bound(value)


def martingale(gamma: float, d: float, ell: float, eps: float) -> Bound:
    value = gamma / d * (1 - eps * math.sqrt(ell)) ** 2
    if eps * math.sqrt(ell) >= 1:
        return Bound(value, False, "eps * sqrt(ell) >= 1")
    return Bound(value)


def f_n(n: int, r: float, betas=None) -> float:
    """Overlap of a train excitation with the last nine-site ground space.

    ``betas`` may supply an alternative beta(k) (used to cross-check against
    norm ratios); by default the closed form is used.
    """
    if n < 4:
        raise ValueError("n >= 4 required")
    b = betas or (lambda k: beta(k, r))
    b1 = b(n - 1)
    return r * b(n) * b(n - 2) * (
        (1 - b1 * (1 + r)) ** 2 / (1 + 2 * r) + b(n - 3) * r * (1 - b1) ** 2 / (1 + r)
    )


def f_limit(r: float) -> float:
    bl = beta_limit(r)
    return r * bl * bl * ((1 - bl * (1 + r)) ** 2 / (1 + 2 * r) + bl * r * (1 - bl) ** 2 / (1 + r))


def f(r: float) -> float:
    """sup over n >= 4 of f_n(r): scan until the sequence settles, then add the limit."""
    if r == 0:
        return 0.0
    best = prev = f_n(4, r)
    streak = 0
    for n in range(5, F_CAP + 1):
        cur = f_n(n, r)
        best = max(best, cur)
        streak = streak + 1 if abs(cur - prev) < F_TOL else 0
        prev = cur
        if streak >= F_STREAK:
            break
    return max(best, f_limit(r))


def e0_bound(kappa: float, lam: complex) -> float:
    r = abs(lam) ** 2
    return min(1.0, kappa / (kappa + 2), kappa / (2 + 2 * kappa * r)) / 3


def edge_energy_bound(kappa: float, lam: complex) -> float:
    r = abs(lam) ** 2
    return min(1.0, kappa / (kappa + 2), kappa / (2 + 2 * kappa * r), kappa * r / (kappa + 1)) / 4


def mm_gap_bound(kappa: float, lam: complex) -> Bound:
    """Martingale lower bound on the restricted open-chain gap, kappa/3 (1 - sqrt(3f))^2."""
    fv = f(abs(lam) ** 2)
    return martingale(kappa, 3, 3, math.sqrt(fv))


def n_threshold(kappa: float, lam: complex) -> float:
    """Smallest coarse-graining size for which the finite-n bound is positive."""
    r = abs(lam) ** 2
    s = 1 - math.sqrt(3 * f(r))
    if s <= 0:
        return math.inf
    return (3 + 6 * r) / s**2


def e1_fsc_bound(kappa: float, lam: complex, n: int) -> Bound:
    """Finite-n bound on the ring restricted to the tiling subspace (needs L >= 3n + 9)."""
    r = abs(lam) ** 2
    fv = f(r)
    s = 1 - math.sqrt(3 * fv)
    value = kappa * n / (2 * (1 + 2 * r) * (n - 1)) * (s**2 / 3 - (1 + 2 * r) / n)
    if fv >= 1 / 3:
        return Bound(value, False, "f >= 1/3")
    return Bound(value)


def main_bound(kappa: float, lam: complex, n: int | None = None) -> Bound:
    r = abs(lam) ** 2
    fv = f(r)
    s = 1 - math.sqrt(3 * fv)
    value = min(kappa / (6 * (1 + 2 * r)) * s**2, e0_bound(kappa, lam))
    note = ""
    if n is not None:
        finite = e1_fsc_bound(kappa, lam, n).value
        value_n = min(finite, e0_bound(kappa, lam))
        note = f"finite_n={value_n!r}"
    if fv >= 1 / 3:
        return Bound(value, False, "f >= 1/3")
    return Bound(value, True, note)


@dataclass(frozen=True)
class BoundReport:
    kappa: float
    lambda_re: float
    lambda_im: float
    n: int | None
    f_value: float
    mm_gap_bound: float
    e1_fsc_bound: float | None
    e0_bound: float
    main_bound: float
    edge_bound: float
    n_threshold: float
    f_valid: bool
    eps_valid: bool

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def csv_row(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(self.to_dict()), lineterminator="\n")
        w.writerow(self.to_dict())
        return buf.getvalue()


def bound_report(kappa: float, lam: complex, n: int | None = None) -> BoundReport:
    lam = complex(lam)
    r = abs(lam) ** 2
    fv = f(r)
    mm = mm_gap_bound(kappa, lam)
    return BoundReport(
        kappa=kappa,
        lambda_re=lam.real,
        lambda_im=lam.imag,
        n=n,
        f_value=fv,
        mm_gap_bound=mm.value,
        e1_fsc_bound=None if n is None else e1_fsc_bound(kappa, lam, n).value,
        e0_bound=e0_bound(kappa, lam),
        main_bound=main_bound(kappa, lam).value,
        edge_bound=edge_energy_bound(kappa, lam),
        n_threshold=n_threshold(kappa, lam),
        f_valid=fv < 1 / 3,
        eps_valid=mm.valid,
    )
