"""Orthonormal eigenbases of single shells and their quadratic-form quantities.

An eigenfunction on shell ``S`` is ``ψ = Σ_i c_i e_{k_i}`` with ``Σ|c_i|² = 1``.
Everything here is computed exactly on the Fourier side: the density
``|ψ|²`` has the finite coefficient set ``b_q = Σ_k c_{k+q} conj(c_k)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import qr
from scipy.sparse import csr_matrix

from torusqe.errors import DomainError
from torusqe.lattice import Shell, unit_ball_volume
from torusqe.symbols import TrigPoly, ball_fourier_radial

BASIS_KINDS = ("standard", "haar_random", "cosine_paired")


@dataclass(frozen=True)
class Eigenfunction:
    shell: Shell
    c: np.ndarray = field(repr=False)

    def __post_init__(self):
        norm = float(np.vdot(self.c, self.c).real)
        if abs(norm - 1.0) > 1e-12:
            raise DomainError(f"eigenfunction coefficients have norm² {norm}, expected 1")

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, self.shell.d)
        return np.exp(2j * np.pi * (x @ self.shell.array.T.astype(float))) @ self.c


@dataclass(frozen=True)
class ShellBasis:
    """Unitary ``U`` over a shell; row ``j`` holds the coefficients of ``ψ_j``."""

    shell: Shell
    matrix: np.ndarray = field(repr=False)
    kind: str = "standard"
    seed: int | None = None

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def __getitem__(self, j: int) -> Eigenfunction:
        return Eigenfunction(self.shell, self.matrix[j])

    def __iter__(self):
        return (self[j] for j in range(len(self)))

    def unitarity_residual(self) -> float:
        r = self.matrix.shape[0]
        return float(np.abs(self.matrix.conj().T @ self.matrix - np.eye(r)).max())

    def to_dict(self) -> dict:
        return {
            "n": self.shell.n,
            "d": self.shell.d,
            "kind": self.kind,
            "seed": self.seed,
            "unitary": [[[z.real, z.imag] for z in row] for row in self.matrix],
        }


def standard_basis(shell: Shell) -> ShellBasis:
    return ShellBasis(shell, np.eye(shell.multiplicity, dtype=complex), "standard")


def shell_rng(seed: int, n: int) -> np.random.Generator:
    """Generator for one shell, derived from ``(seed, n)`` only."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(n)]))


def haar_unitary(r: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed ``r × r`` unitary: QR of a Ginibre matrix with phase fix."""
    z = (rng.standard_normal((r, r)) + 1j * rng.standard_normal((r, r))) / math.sqrt(2.0)
    q, upper = qr(z)
    diag = np.diag(upper)
    return q * (diag / np.abs(diag))


def haar_random_basis(shell: Shell, seed: int) -> ShellBasis:
    u = haar_unitary(shell.multiplicity, shell_rng(seed, shell.n))
    return ShellBasis(shell, u, "haar_random", int(seed))


def cosine_paired_basis(shell: Shell) -> ShellBasis:
    """Real ``√2 cos`` / ``√2 sin`` pairs for each ``{k, -k}``.

    Pairs are ordered by the lexicographically larger member ``k``; the rows
    are ``(e_k + e_{-k})/√2`` and ``(e_k - e_{-k})/(i√2)``.
    """
    if shell.n < 1:
        raise DomainError("cosine-paired basis needs n >= 1")
    idx = shell.index
    r = shell.multiplicity
    u = np.zeros((r, r), dtype=complex)
    tops = sorted(k for k in shell.vectors if k > tuple(-c for c in k))
    s = 1.0 / math.sqrt(2.0)
    for row, k in enumerate(tops):
        i, j = idx[k], idx[tuple(-c for c in k)]
        u[2 * row, i] = s
        u[2 * row, j] = s
        u[2 * row + 1, i] = -1j * s
        u[2 * row + 1, j] = 1j * s
    return ShellBasis(shell, u, "cosine_paired")


def make_basis(shell: Shell, kind: str, seed: int | None = None) -> ShellBasis:
    if kind == "standard":
        return standard_basis(shell)
    if kind == "haar_random":
        return haar_random_basis(shell, 0 if seed is None else seed)
    if kind == "cosine_paired":
        return cosine_paired_basis(shell)
    raise DomainError(f"unknown basis kind {kind!r}; choose from {BASIS_KINDS}")


def compression(a: TrigPoly, shell: Shell) -> np.ndarray:
    """Matrix ``M[i', i] = â_{k_{i'} - k_i}`` of multiplication by ``a`` on the shell."""
    vecs = shell.vectors
    r = len(vecs)
    m = np.zeros((r, r), dtype=complex)
    get = a.get
    for i2, k2 in enumerate(vecs):
        row = m[i2]
        for i, k in enumerate(vecs):
            v = get(tuple(x - y for x, y in zip(k2, k)))
            if v:
                row[i] = v
    return m


def matrix_elements(a: TrigPoly, basis: ShellBasis) -> np.ndarray:
    """``⟨ψ_j, a ψ_j⟩`` for every row of the basis."""
    m = compression(a, basis.shell)
    u = basis.matrix
    return np.einsum("ji,ik,jk->j", u.conj(), m, u)


def matrix_element(a: TrigPoly, psi: Eigenfunction) -> complex:
    """``⟨ψ, aψ⟩ = Σ_{k,k'} â_{k'-k} c_k conj(c_{k'})``."""
    m = compression(a, psi.shell)
    return complex(np.vdot(psi.c, m @ psi.c))


def avg_operator_element(a: TrigPoly, hbar: float, T: float, k, k2) -> complex:
    """``⟨e_{k2}, A(T,ħ) e_k⟩`` for the time-averaged conjugated multiplication by ``ā``.

    Equals ``â_{k2-k} D(ωT)`` with ``ω = 2π²ħ(‖k2‖² - ‖k‖²)`` and
    ``D(θ) = (e^{iθ} - 1)/(iθ)``; the zero mode of ``a`` is ignored.
    """
    if T <= 0:
        raise DomainError(f"T must be positive, got {T}")
    k = tuple(int(c) for c in k)
    k2 = tuple(int(c) for c in k2)
    p = tuple(x - y for x, y in zip(k2, k))
    if not any(p):
        return 0j
    amp = a[p]
    dn = sum(c * c for c in k2) - sum(c * c for c in k)
    theta = 2.0 * math.pi**2 * hbar * dn * T
    return amp * _dirichlet_average(theta)


def _dirichlet_average(theta: float) -> complex:
    # (e^{iθ} - 1)/(iθ) = e^{iθ/2} sin(θ/2)/(θ/2)
    return complex(np.exp(0.5j * theta) * np.sinc(theta / (2.0 * math.pi)))


def density_coeffs(psi: Eigenfunction) -> tuple[np.ndarray, np.ndarray]:
    """Fourier coefficients of ``|ψ|²``: frequencies ``q`` and values ``b_q``."""
    vecs = psi.shell.array
    c = psi.c
    diffs = (vecs[:, None, :] - vecs[None, :, :]).reshape(-1, vecs.shape[1])
    vals = (c[:, None] * c.conj()[None, :]).ravel()
    q, inv = np.unique(diffs, axis=0, return_inverse=True)
    inv = inv.ravel()
    b = np.bincount(inv, weights=vals.real, minlength=len(q)) + 1j * np.bincount(
        inv, weights=vals.imag, minlength=len(q)
    )
    return q, b


def l4_norm_4(psi: Eigenfunction) -> float:
    """``∫|ψ|⁴ dx = Σ_q |b_q|²``."""
    q, b = density_coeffs(psi)
    zero = np.flatnonzero(~q.any(axis=1))
    b0 = b[zero[0]]
    if abs(b0 - 1.0) > 1e-12:
        raise DomainError(f"density zero mode {b0} differs from 1")
    return float(np.sum(np.abs(b) ** 2))


def l4_norms(basis: ShellBasis) -> np.ndarray:
    """``∫|ψ_j|⁴`` for every row at once.

    The products ``c_i conj(c_{i'})`` of each row are summed into density
    coefficients through one sparse aggregation matrix shared by all rows.
    """
    vecs = basis.shell.array
    r = len(vecs)
    diffs = (vecs[:, None, :] - vecs[None, :, :]).reshape(-1, vecs.shape[1])
    q, inv = np.unique(diffs, axis=0, return_inverse=True)
    agg = csr_matrix((np.ones(r * r), (np.arange(r * r), inv.ravel())), shape=(r * r, len(q)))
    u = basis.matrix
    prods = (u[:, :, None] * u.conj()[:, None, :]).reshape(len(u), r * r)
    b = np.asarray(agg.T @ prods.T).T
    b0 = b[:, np.flatnonzero(~q.any(axis=1))[0]]
    if np.abs(b0 - 1.0).max() > 1e-12:
        raise DomainError(f"density zero mode deviates from 1 by {np.abs(b0 - 1.0).max()}")
    return np.sum(np.abs(b) ** 2, axis=1)


def ball_mass(psi: Eigenfunction, x0, r: float, cutoff: float | None = None) -> float:
    """``∫_{B(x0, r)} |ψ|² dx`` using the indicator's radial Fourier transform.

    Only frequencies in the finite support of ``|ψ|²`` contribute, so the
    sum is exact up to the radial quadrature.  ``cutoff`` (if given) drops
    density frequencies above it.
    """
    if not 0.0 < r < 0.5:
        raise DomainError(f"ball radius must lie in (0, 1/2), got {r}")
    d = psi.shell.d
    x0 = np.asarray(x0, dtype=float).reshape(d)
    q, b = density_coeffs(psi)
    norms = np.sqrt((q.astype(float) ** 2).sum(axis=1))
    if cutoff is not None:
        keep = norms <= cutoff + 1e-9
        q, b, norms = q[keep], b[keep], norms[keep]
    uniq, inv = np.unique(norms, return_inverse=True)
    radial = ball_fourier_radial(d, r, uniq)[inv.ravel()]
    val = np.sum(b * radial * np.exp(2j * np.pi * (q @ x0)))
    return float(val.real)


class BallMassKernel:
    """Ball masses of all rows of a basis at many centers.

    With ``K(x0)[k', k] = ρ(‖k'-k‖) e^{2πi(k'-k)·x0}`` the mass of ``ψ_j`` is
    ``Σ_{k,k'} c_{k'} conj(c_k) K[k', k]``.
    """

    def __init__(self, shell: Shell, r: float):
        if not 0.0 < r < 0.5:
            raise DomainError(f"ball radius must lie in (0, 1/2), got {r}")
        self.shell = shell
        self.r = r
        vecs = shell.array
        self.diffs = (vecs[:, None, :] - vecs[None, :, :]).astype(float)
        norms = np.sqrt((self.diffs**2).sum(axis=2))
        uniq, inv = np.unique(norms, return_inverse=True)
        self.radial = ball_fourier_radial(shell.d, r, uniq)[inv].reshape(norms.shape)

    @cached_property
    def volume(self) -> float:
        return unit_ball_volume(self.shell.d) * self.r**self.shell.d

    def masses(self, u: np.ndarray, centers: np.ndarray) -> np.ndarray:
        """Array ``(n_rows, n_centers)`` of ball masses."""
        out = np.empty((u.shape[0], len(centers)))
        for t, x0 in enumerate(centers):
            kern = self.radial * np.exp(2j * np.pi * (self.diffs @ x0))
            out[:, t] = np.einsum("ja,ab,jb->j", u, kern, u.conj()).real
        return out
