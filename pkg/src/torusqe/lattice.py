"""Integer lattice shells, spectral windows and Weyl counts on the torus.

The eigenvalues of ``-Δ`` on ``R^d / Z^d`` are ``4π²n`` with ``n = ‖k‖²``;
the eigenspace for ``n`` is spanned by the exponentials ``e_k`` with ``k``
on the shell ``{k ∈ Z^d : ‖k‖² = n}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np
from scipy.special import gamma

from torusqe.errors import BudgetError, DomainError

FOUR_PI_SQ = 4.0 * math.pi**2

#: Maximum number of leaf candidates scanned when enumerating one shell.
DEFAULT_ENUM_BUDGET = 10**8


def norm_sq(k: Sequence[int]) -> int:
    """Squared Euclidean norm with Python integers (no overflow)."""
    return sum(int(c) * int(c) for c in k)


@dataclass(frozen=True)
class Shell:
    """All integer vectors of squared norm ``n`` in dimension ``d``.

    ``vectors`` is kept in lexicographic order; it is the canonical index
    order for every basis matrix built over the shell.
    """

    d: int
    n: int
    vectors: tuple[tuple[int, ...], ...]

    @property
    def multiplicity(self) -> int:
        return len(self.vectors)

    def __len__(self) -> int:
        return len(self.vectors)

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        return iter(self.vectors)

    @cached_property
    def array(self) -> np.ndarray:
        """Vectors as an ``(r, d)`` int64 array."""
        return np.array(self.vectors, dtype=np.int64).reshape(len(self.vectors), self.d)

    @cached_property
    def index(self) -> dict[tuple[int, ...], int]:
        return {k: i for i, k in enumerate(self.vectors)}

    @property
    def eigenvalue(self) -> float:
        """Eigenvalue ``4π²n`` of ``-Δ`` on this shell."""
        return FOUR_PI_SQ * self.n


def _descend(d: int, residual: int, prefix: list[int], out: list[tuple[int, ...]]) -> None:
    if d == 1:
        root = math.isqrt(residual)
        if root * root == residual:
            if root == 0:
                out.append((*prefix, 0))
            else:
                out.append((*prefix, -root))
                out.append((*prefix, root))
        return
    bound = math.isqrt(residual)
    for c in range(-bound, bound + 1):
        prefix.append(c)
        _descend(d - 1, residual - c * c, prefix, out)
        prefix.pop()


def enumerate_shell(d: int, n: int, budget: int = DEFAULT_ENUM_BUDGET) -> Shell:
    """Enumerate ``{k ∈ Z^d : ‖k‖² = n}`` in lexicographic order.

    Coordinates are chosen by recursive descent with residual-norm pruning;
    the last coordinate is solved with an integer square root.

    Raises
    ------
    DomainError
        If ``d < 1`` or ``n < 0``.
    BudgetError
        If the pruned search box ``(2⌊√n⌋+1)^(d-1)`` exceeds ``budget``.
    """
    d = int(d)
    n = int(n)
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    if n < 0:
        raise DomainError(f"squared norm must be >= 0, got {n}")
    box = (2 * math.isqrt(n) + 1) ** (d - 1)
    if box > budget:
        raise BudgetError(
            f"shell d={d}, n={n} needs a search box of {box} > budget {budget}"
        )
    out: list[tuple[int, ...]] = []
    _descend(d, n, [], out)
    # descent already yields lexicographic order; sort is a cheap guarantee
    out.sort()
    return Shell(d=d, n=n, vectors=tuple(out))


@dataclass(frozen=True)
class SpectralWindow:
    """A band of Laplacian eigenvalues together with its shells.

    Two parameterizations are supported.  ``kind="semiclassical"``
    selects shells with ``4π²ħ²n ∈ [1-αħ, 1+αħ]``; ``kind="eigenvalue"``
    selects ``4π²n ∈ [λ-√λ, λ+√λ]`` and records ``ħ = λ^{-1/2}``, ``α = 1``,
    which describes the same band.
    """

    d: int
    hbar: float
    alpha: float
    kind: str
    n_min: int
    n_max: int
    shells: tuple[Shell, ...] = field(repr=False)
    lam: float | None = None

    @property
    def n_states(self) -> int:
        return sum(s.multiplicity for s in self.shells)

    @property
    def shell_count(self) -> int:
        return len(self.shells)

    @property
    def lam_value(self) -> float:
        return self.lam if self.lam is not None else self.hbar**-2

    def contains(self, n: int) -> bool:
        return _member(self.kind, self.hbar, self.alpha, self.lam, n)


def _member(kind: str, hbar: float, alpha: float, lam: float | None, n: int) -> bool:
    if kind == "eigenvalue":
        e = FOUR_PI_SQ * n
        root = math.sqrt(lam)
        return lam - root <= e <= lam + root
    e = FOUR_PI_SQ * hbar * hbar * n
    return 1.0 - alpha * hbar <= e <= 1.0 + alpha * hbar


def _integer_range(kind, hbar, alpha, lam, lo: float, hi: float) -> tuple[int, int]:
    # outward-rounded candidate range, then exact predicate at both ends
    n_lo = max(0, math.floor(lo) - 1)
    n_hi = math.ceil(hi) + 1
    while n_lo <= n_hi and not _member(kind, hbar, alpha, lam, n_lo):
        n_lo += 1
    while n_hi >= n_lo and not _member(kind, hbar, alpha, lam, n_hi):
        n_hi -= 1
    return n_lo, n_hi


def _collect(d, kind, hbar, alpha, lam, lo, hi, budget) -> SpectralWindow:
    n_min, n_max = _integer_range(kind, hbar, alpha, lam, lo, hi)
    shells = []
    for n in range(n_min, n_max + 1):
        shell = enumerate_shell(d, n, budget=budget)
        if shell.multiplicity:
            shells.append(shell)
    return SpectralWindow(
        d=d, hbar=hbar, alpha=alpha, kind=kind, n_min=n_min, n_max=n_max,
        shells=tuple(shells), lam=lam,
    )


def shells_in_window(
    d: int, hbar: float, alpha: float, budget: int = DEFAULT_ENUM_BUDGET
) -> SpectralWindow:
    """Shells whose eigenvalue satisfies ``4π²ħ²n ∈ [1-αħ, 1+αħ]``."""
    if not 0.0 < hbar <= 1.0:
        raise DomainError(f"hbar must lie in (0, 1], got {hbar}")
    if alpha <= 0.0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    if 1.0 - alpha * hbar <= 0.0:
        raise DomainError(f"window lower edge 1 - alpha*hbar = {1 - alpha * hbar} <= 0")
    scale = FOUR_PI_SQ * hbar * hbar
    lo = (1.0 - alpha * hbar) / scale
    hi = (1.0 + alpha * hbar) / scale
    return _collect(int(d), "semiclassical", float(hbar), float(alpha), None, lo, hi, budget)


def window_from_lambda(
    d: int, lam: float, budget: int = DEFAULT_ENUM_BUDGET
) -> SpectralWindow:
    """Shells with ``4π²n ∈ [λ-√λ, λ+√λ]``."""
    lam = float(lam)
    if lam < 4.0:
        raise DomainError(f"lambda must be >= 4, got {lam}")
    root = math.sqrt(lam)
    lo = (lam - root) / FOUR_PI_SQ
    hi = (lam + root) / FOUR_PI_SQ
    return _collect(int(d), "eigenvalue", lam**-0.5, 1.0, lam, lo, hi, budget)


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / gamma(d / 2 + 1)


def weyl_constant(d: int) -> float:
    """Leading constant ``C_d`` in ``N_1(λ) ~ C_d λ^{(d-1)/2}``.

    The band ``[λ-√λ, λ+√λ]`` corresponds to the annulus of radii
    ``R± = √(λ±√λ)/(2π)`` in frequency space.  Its width is
    ``1/(2π) + O(λ^{-1})`` and its mean radius ``√λ/(2π)``, so its volume is
    ``d V_d (√λ/2π)^{d-1} / (2π) = d V_d (2π)^{-d} λ^{(d-1)/2}``.
    """
    return d * unit_ball_volume(d) * (2.0 * math.pi) ** (-d)


def weyl_count(d: int, lam: float, max_box: int = 10**8) -> tuple[int, float, float]:
    """Count lattice points with ``λ-√λ ≤ 4π²‖k‖² ≤ λ+√λ`` by a box scan.

    Independent of the shell enumerator: scans the bounding box with numpy,
    one slab per leading coordinate.

    Returns
    -------
    count, predicted, ratio
    """
    d = int(d)
    lam = float(lam)
    if lam < 4.0:
        raise DomainError(f"lambda must be >= 4, got {lam}")
    root = math.sqrt(lam)
    lo, hi = lam - root, lam + root
    bound = math.isqrt(int(math.floor(hi / FOUR_PI_SQ)) + 1)
    side = 2 * bound + 1
    if side**d > max_box:
        raise BudgetError(f"Weyl box {side}^{d} exceeds budget {max_box}")
    axis = np.arange(-bound, bound + 1, dtype=np.int64)
    if d == 1:
        slab = np.zeros(1, dtype=np.int64)
    else:
        grids = np.meshgrid(*([axis] * (d - 1)), indexing="ij")
        slab = sum(g * g for g in grids).ravel()
    count = 0
    for c in axis:
        e = FOUR_PI_SQ * (slab + c * c)
        count += int(np.count_nonzero((e >= lo) & (e <= hi)))
    predicted = weyl_constant(d) * lam ** ((d - 1) / 2)
    return count, predicted, count / predicted


def shell_rows(shells: Sequence[Shell]) -> list[dict]:
    return [{"d": s.d, "n": s.n, "multiplicity": s.multiplicity} for s in shells]


def window_row(window: SpectralWindow) -> dict:
    return {
        "d": window.d,
        "hbar": window.hbar,
        "alpha": window.alpha,
        "n_min": window.n_min,
        "n_max": window.n_max,
        "shell_count": window.shell_count,
        "n_states": window.n_states,
    }
