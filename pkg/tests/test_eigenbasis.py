import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from torusqe.eigenbasis import (
    Eigenfunction,
    avg_operator_element,
    ball_mass,
    compression,
    cosine_paired_basis,
    density_coeffs,
    haar_random_basis,
    haar_unitary,
    l4_norm_4,
    l4_norms,
    make_basis,
    matrix_element,
    matrix_elements,
    standard_basis,
)
from torusqe.errors import DomainError
from torusqe.lattice import enumerate_shell, unit_ball_volume
from torusqe.symbols import TrigPoly

from conftest import grid_points, psi_values

SHELL25 = enumerate_shell(2, 25)


def random_psi(shell, rng):
    c = rng.normal(size=shell.multiplicity) + 1j * rng.normal(size=shell.multiplicity)
    return Eigenfunction(shell, c / np.linalg.norm(c))


def test_standard_basis_flat_density():
    basis = standard_basis(SHELL25)
    x = np.random.default_rng(0).random((5, 2))
    for psi in basis:
        np.testing.assert_allclose(np.abs(psi.evaluate(x)) ** 2, 1.0, atol=1e-14)


def test_standard_basis_matrix_element_is_mean(rng):
    a = TrigPoly.random_real(2, 20, 8, rng, mean_zero=False)
    el = matrix_elements(a, standard_basis(SHELL25))
    np.testing.assert_allclose(el, a.mean, atol=1e-15)


def test_haar_one_dimensional_shell():
    shell = enumerate_shell(2, 0)
    b = haar_random_basis(shell, 3)
    assert b.matrix.shape == (1, 1) and abs(abs(b.matrix[0, 0]) - 1) < 1e-15


def test_haar_unitarity_many_seeds():
    worst = max(haar_random_basis(SHELL25, s).unitarity_residual() for s in range(1000))
    assert worst < 1e-10


def test_haar_first_moment():
    r = 12
    vals = np.array([abs(haar_unitary(r, np.random.default_rng(s))[0, 0]) ** 2 for s in range(10_000)])
    stderr = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean() - 1 / r) < 5 * stderr


def test_haar_second_moment():
    # E|U_00|^4 = 2/(r(r+1)) for Haar unitaries
    r = 6
    vals = np.array([abs(haar_unitary(r, np.random.default_rng(s))[0, 0]) ** 4 for s in range(20_000)])
    stderr = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean() - 2 / (r * (r + 1))) < 5 * stderr


def test_haar_deterministic():
    np.testing.assert_array_equal(haar_random_basis(SHELL25, 9).matrix, haar_random_basis(SHELL25, 9).matrix)


def test_cosine_paired_unitary_and_real():
    b = cosine_paired_basis(SHELL25)
    assert b.unitarity_residual() < 1e-15
    x = np.random.default_rng(1).random((7, 2))
    for psi in b:
        assert np.abs(psi.evaluate(x).imag).max() < 1e-13


def test_cosine_paired_matrix_element():
    k = (3, 4)
    b = cosine_paired_basis(SHELL25)
    a = TrigPoly(2, {(6, 8): 1.0, (-6, -8): 1.0})
    row = 2 * sorted(v for v in SHELL25.vectors if v > tuple(-c for c in v)).index(k)
    assert matrix_element(a, b[row]) == pytest.approx(1.0, abs=1e-15)
    assert matrix_element(a, b[row + 1]) == pytest.approx(-1.0, abs=1e-15)
    rng = np.random.default_rng(2)
    c = TrigPoly.random_real(2, 30, 12, rng, mean_zero=False)
    expected = c.mean + (c[(6, 8)] + c[(-6, -8)]) / 2
    assert matrix_element(c, b[row]) == pytest.approx(expected, abs=1e-13)


def test_cosine_paired_needs_nonzero_shell():
    with pytest.raises(DomainError):
        cosine_paired_basis(enumerate_shell(2, 0))


@pytest.mark.parametrize("n", [25, 65, 50])
def test_matrix_element_vs_grid(rng, n):
    shell = enumerate_shell(2, n)
    a = TrigPoly.random_real(2, 24, 5, rng, mean_zero=False)
    psi = random_psi(shell, rng)
    m = 2 * int(math.ceil(math.sqrt(n) + a.support_radius)) + 2
    x = grid_points(2, m)
    oracle = np.mean(a.evaluate(x) * np.abs(psi_values(shell, psi.c, x)) ** 2)
    assert matrix_element(a, psi) == pytest.approx(oracle, abs=1e-10)


def test_avg_operator_diagonal_zero(rng):
    a = TrigPoly.random_real(2, 10, 6, rng, mean_zero=False)
    assert avg_operator_element(a, 0.01, 30.0, (3, 4), (3, 4)) == 0


def test_avg_operator_resonant_pair(rng):
    a = TrigPoly.random_real(2, 30, 10, rng) + TrigPoly(2, {(1, -7): 0.3, (-1, 7): 0.3})
    assert a[(1, -7)] != 0
    assert avg_operator_element(a, 0.01, 1e6, (3, 4), (4, -3)) == a[(1, -7)]


def test_avg_operator_time_quadrature():
    a = TrigPoly(2, {(1, 2): 0.7 - 0.2j, (-1, -2): 0.7 + 0.2j, (2, -1): 0.4})
    hbar, T = 0.01, 40.0
    for k, k2 in [((1, 1), (2, 3)), ((0, 3), (2, 2)), ((2, 1), (2, 3))]:
        p = tuple(x - y for x, y in zip(k2, k))
        omega = 2 * math.pi**2 * hbar * (sum(c * c for c in k2) - sum(c * c for c in k))
        re = quad(lambda t: math.cos(omega * t), 0, T, limit=400, epsabs=1e-14)[0] / T
        im = quad(lambda t: math.sin(omega * t), 0, T, limit=400, epsabs=1e-14)[0] / T
        got = avg_operator_element(a, hbar, T, k, k2)
        assert got == pytest.approx(a[p] * complex(re, im), abs=1e-10)
        assert abs(got) <= 2 * abs(a[p]) / (abs(omega) * T) + 1e-15


def test_avg_operator_matches_compression_on_shell(rng):
    a = TrigPoly.random_real(2, 40, 10, rng, mean_zero=False)
    abar = a.mean_zero()
    m = compression(abar, SHELL25)
    for T in (0.5, 10.0, 1e5):
        for i, k in enumerate(SHELL25.vectors):
            for i2, k2 in enumerate(SHELL25.vectors):
                assert avg_operator_element(a, 0.02, T, k, k2) == m[i2, i]


def test_l4_exponential_and_cosine():
    assert l4_norm_4(standard_basis(SHELL25)[0]) == pytest.approx(1.0, abs=1e-15)
    b = cosine_paired_basis(SHELL25)
    assert l4_norm_4(b[0]) == pytest.approx(1.5, abs=1e-14)


def test_l4_vs_grid(rng):
    psi = random_psi(SHELL25, rng)
    m = 4 * 5 + 2
    x = grid_points(2, m)
    oracle = np.mean(np.abs(psi_values(SHELL25, psi.c, x)) ** 4)
    assert l4_norm_4(psi) == pytest.approx(oracle, abs=1e-9)


def test_density_zero_mode(rng):
    for n in (1, 25, 65, 325):
        q, b = density_coeffs(random_psi(enumerate_shell(2, n), rng))
        zero = ~q.any(axis=1)
        assert abs(b[zero][0] - 1.0) < 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.sampled_from([5, 25, 65, 85, 125, 325]))
def test_power_mean(seed, n):
    psi = random_psi(enumerate_shell(2, n), np.random.default_rng(seed))
    assert l4_norm_4(psi) >= 1.0 - 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), theta=st.floats(0, 2 * math.pi))
def test_global_phase_invariance(seed, theta):
    rng = np.random.default_rng(seed)
    a = TrigPoly.random_real(2, 16, 8, rng, mean_zero=False)
    psi = random_psi(SHELL25, rng)
    rotated = Eigenfunction(SHELL25, psi.c * np.exp(1j * theta))
    assert matrix_element(a, rotated) == pytest.approx(matrix_element(a, psi), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.sampled_from([25, 65, 130, 325, 1105]),
       kind=st.sampled_from(["standard", "haar_random", "cosine_paired"]))
def test_trace_invariance(seed, n, kind):
    rng = np.random.default_rng(seed)
    shell = enumerate_shell(2, n)
    a = TrigPoly.random_real(2, 30, 2 * int(math.sqrt(n)) or 1, rng, mean_zero=False)
    total = matrix_elements(a, make_basis(shell, kind, seed)).sum()
    r = shell.multiplicity
    assert abs(total - r * a.mean) <= 1e-9 * r * a.l1_coeff_norm()


def test_ball_mass_exponential():
    psi = standard_basis(SHELL25)[3]
    r = 0.2
    assert ball_mass(psi, [0.3, 0.3], r) == pytest.approx(unit_ball_volume(2) * r * r, rel=1e-13)


def test_ball_mass_bounds(rng):
    for _ in range(10):
        psi = random_psi(SHELL25, rng)
        m = ball_mass(psi, rng.random(2), 0.45)
        assert -1e-12 <= m <= 1 + 1e-12


def test_ball_mass_monte_carlo(rng):
    psi = random_psi(SHELL25, rng)
    x0, r = np.array([0.6, 0.15]), 0.17
    n = 10**6
    rad = r * np.sqrt(rng.random(n))
    ang = 2 * math.pi * rng.random(n)
    pts = x0 + np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
    dens = np.abs(psi.evaluate(pts)) ** 2
    vol = math.pi * r * r
    assert abs(ball_mass(psi, x0, r) - vol * dens.mean()) < 4 * vol * dens.std(ddof=1) / math.sqrt(n)


def test_ball_mass_domain():
    with pytest.raises(DomainError):
        ball_mass(standard_basis(SHELL25)[0], [0, 0], 0.6)


def test_basis_dump_shape():
    doc = haar_random_basis(SHELL25, 4).to_dict()
    assert doc["n"] == 25 and doc["kind"] == "haar_random" and doc["seed"] == 4
    assert len(doc["unitary"]) == 12 and len(doc["unitary"][0][0]) == 2


@pytest.mark.parametrize("kind", ["standard", "haar_random", "cosine_paired"])
def test_l4_norms_match_rowwise(kind):
    basis = make_basis(SHELL25, kind, 9)
    assert np.allclose(l4_norms(basis), [l4_norm_4(p) for p in basis], rtol=0, atol=1e-13)
