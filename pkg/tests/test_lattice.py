import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torusqe.errors import BudgetError, DomainError
from torusqe.lattice import (
    FOUR_PI_SQ,
    enumerate_shell,
    norm_sq,
    shells_in_window,
    weyl_constant,
    weyl_count,
    window_from_lambda,
)

from conftest import brute_shell


def test_shell_25_in_plane():
    shell = enumerate_shell(2, 25)
    expected = {(5, 0), (-5, 0), (0, 5), (0, -5)}
    expected |= {(sx * a, sy * b) for a, b in [(3, 4), (4, 3)] for sx in (1, -1) for sy in (1, -1)}
    assert shell.multiplicity == 12
    assert set(shell.vectors) == expected
    assert list(shell.vectors) == sorted(shell.vectors)


def test_non_representable_shell_is_empty():
    assert enumerate_shell(2, 3).multiplicity == 0
    assert enumerate_shell(3, 7).multiplicity == 0


def test_zero_shell():
    assert enumerate_shell(2, 0).vectors == ((0, 0),)


@pytest.mark.parametrize("d,n", [(2, 50), (2, 65), (3, 27), (3, 9), (4, 12), (2, 1)])
def test_matches_brute_force(d, n):
    assert list(enumerate_shell(d, n).vectors) == brute_shell(d, n)


def test_large_norm_no_overflow():
    assert norm_sq((46341, 46341)) == 2 * 46341**2
    shell = enumerate_shell(2, 2**32)
    assert (0, 2**16) in shell.vectors
    assert all(norm_sq(k) == 2**32 for k in shell.vectors)


def test_budget_error():
    with pytest.raises(BudgetError):
        enumerate_shell(4, 10**6, budget=10**5)


def test_negative_n_rejected():
    with pytest.raises(DomainError):
        enumerate_shell(2, -1)


@settings(max_examples=40, deadline=None)
@given(d=st.integers(2, 4), n=st.integers(0, 200))
def test_shell_symmetries(d, n):
    shell = enumerate_shell(d, n)
    vecs = set(shell.vectors)
    assert len(vecs) == shell.multiplicity
    assert all(norm_sq(k) == n for k in vecs)
    assert {tuple(-c for c in k) for k in vecs} == vecs
    rng = np.random.default_rng(n * 7 + d)
    perm = rng.permutation(d)
    signs = rng.choice([-1, 1], size=d)
    assert {tuple(int(signs[i] * k[perm[i]]) for i in range(d)) for k in vecs} == vecs


def test_window_exactly_one_shell():
    hbar = 1.0 / (10.0 * math.pi)
    w = shells_in_window(2, hbar, 1.0)
    assert (w.n_min, w.n_max) == (25, 25)
    assert w.shell_count == 1 and w.n_states == 12


def test_empty_window():
    # 4π²n in [λ-√λ, λ+√λ] only for n = 251..255, none a sum of two squares
    w = window_from_lambda(2, 1e4)
    assert w.shell_count == 0 and w.n_states == 0


def test_window_3d_contains_unit_shell():
    hbar = 1.0 / (2.0 * math.pi)
    w = shells_in_window(3, hbar, 0.5)
    unit = [s for s in w.shells if s.n == 1]
    assert unit and unit[0].multiplicity == 6


def test_window_rejects_bad_edge():
    with pytest.raises(DomainError):
        shells_in_window(2, 0.5, 2.0)
    with pytest.raises(DomainError):
        shells_in_window(2, 1.5, 0.1)


@settings(max_examples=25, deadline=None)
@given(d=st.integers(2, 3), hbar=st.floats(0.02, 0.2), alpha=st.floats(0.05, 2.0))
def test_window_matches_box_count(d, hbar, alpha):
    if 1 - alpha * hbar <= 0:
        return
    w = shells_in_window(d, hbar, alpha)
    lo, hi = 1 - alpha * hbar, 1 + alpha * hbar
    bound = math.isqrt(int(hi / (FOUR_PI_SQ * hbar**2)) + 1)
    axis = np.arange(-bound, bound + 1)
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    nsq = sum(g * g for g in grids).ravel()
    count = 0
    for n in np.unique(nsq):
        e = FOUR_PI_SQ * hbar * hbar * int(n)
        if lo <= e <= hi:
            count += int(np.count_nonzero(nsq == n))
    assert w.n_states == count


@settings(max_examples=20, deadline=None)
@given(hbar=st.floats(0.02, 0.2), a1=st.floats(0.05, 1.0), extra=st.floats(0.0, 1.0))
def test_window_monotone_in_alpha(hbar, a1, extra):
    small = {s.n for s in shells_in_window(2, hbar, a1).shells}
    big = {s.n for s in shells_in_window(2, hbar, a1 + extra).shells}
    assert small <= big


def test_weyl_count_matches_window_sum():
    lam = FOUR_PI_SQ * 25 + 1e-9
    count, _, _ = weyl_count(2, lam)
    w = window_from_lambda(2, lam)
    assert count == w.n_states
    assert 25 in {s.n for s in w.shells}


@pytest.mark.parametrize("d,lam", [(2, 3e4), (2, 1e5), (3, 5e3), (3, 1e4)])
def test_weyl_count_vs_window(d, lam):
    assert weyl_count(d, lam)[0] == window_from_lambda(d, lam).n_states


def test_weyl_constant_values():
    assert weyl_constant(2) == pytest.approx(1 / (2 * math.pi), rel=1e-14)
    assert weyl_constant(3) == pytest.approx(1 / (2 * math.pi**2), rel=1e-14)


@pytest.mark.parametrize("d,lam0", [(2, 1e5), (3, 1e4)])
def test_weyl_ratio_averages_to_one(d, lam0):
    # single narrow windows fluctuate arithmetically; the local mean does not
    ratios = [weyl_count(d, lam)[2] for lam in np.linspace(0.9 * lam0, 1.1 * lam0, 200)]
    assert np.mean(ratios) == pytest.approx(1.0, abs=0.05)


def test_weyl_domain():
    with pytest.raises(DomainError):
        weyl_count(2, 3.0)


@pytest.mark.parametrize("d,lam", [(2, 4e3), (2, 1e5), (2, 3.3e5), (3, 1e3), (3, 1e4), (4, 2e3)])
def test_eigenvalue_window_is_semiclassical_with_alpha_one(d, lam):
    by_lam = window_from_lambda(d, lam)
    by_hbar = shells_in_window(d, lam**-0.5, 1.0)
    assert [s.n for s in by_lam.shells] == [s.n for s in by_hbar.shells]
    assert by_lam.alpha == 1.0 and by_lam.hbar == pytest.approx(lam**-0.5)
