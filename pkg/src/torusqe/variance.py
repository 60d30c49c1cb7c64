"""Variance functionals: quantum variance over windows and Birkhoff variance.

Birkhoff variance of ``a`` at time ``T`` (normalized measures on ``T^d`` and
``S^{d-1}``) decomposes over Fourier modes as
``V(a, T) = Σ_{k≠0} |â_k|² M_d(‖k‖, T)`` where
``M_d(m, T) = E_ξ sinc²(πTm ξ₁)`` is computed by :func:`mode_integral`.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import gamma, roots_legendre

from torusqe.eigenbasis import BallMassKernel, make_basis, matrix_elements
from torusqe.errors import BudgetError, DegenerateFitError, DomainError, EmptyWindowError
from torusqe.lattice import SpectralWindow, window_from_lambda
from torusqe.symbols import SymbolFamily, TrigPoly

#: Calibrated ``C`` in ``M_d(m, T) ≤ C/(mT)`` for ``mT ≥ 2``, ``d ∈ {2, 3}``.
#: For ``d = 3`` the exact bound is ``1/2`` (``∫_0^X sinc² ≤ π/2``); the
#: measured supremum for ``d = 2`` is smaller (see tests/test_variance.py).
MODE_BOUND_C = 0.5

#: Frozen constant ``C'`` with ``T·V(a,T) ≤ C'·‖ā‖²`` for ``T ≥ 2``.  Since every
#: nonzero frequency has ``‖k‖ ≥ 1`` it follows from ``MODE_BOUND_C``.
BIRKHOFF_BOUND_C = MODE_BOUND_C

DEFAULT_QUAD_BUDGET = 10**7
_GL_ORDER = 16


def sphere_weight_total(d: int) -> float:
    """``∫_0^π sin^{d-2}φ dφ``."""
    return math.sqrt(math.pi) * gamma((d - 1) / 2) / gamma(d / 2)


@dataclass(frozen=True)
class ModeIntegral:
    d: int
    m: float
    T: float
    value: float
    nodes: int


@lru_cache(maxsize=4096)
def _mode_integral_cached(d: int, m: float, T: float, panel_density: float,
                          quad_budget: int) -> ModeIntegral:
    mt = m * T
    panels = int(math.ceil(panel_density * (1.0 + mt)))
    nodes = panels * _GL_ORDER
    if nodes > quad_budget:
        raise BudgetError(
            f"mode integral with mT={mt:.4g} needs {nodes} nodes > budget {quad_budget}"
        )
    u, w = roots_legendre(_GL_ORDER)
    h = 0.5 * math.pi / panels
    left = np.arange(panels) * h
    phi = (left[:, None] + 0.5 * h * (u[None, :] + 1.0)).ravel()
    wts = np.tile(0.5 * h * w, panels)
    f = np.sinc(mt * np.cos(phi)) ** 2
    if d != 2:
        f = f * np.sin(phi) ** (d - 2)
    value = float(np.dot(wts, f)) / (0.5 * sphere_weight_total(d))
    return ModeIntegral(d, m, T, min(1.0, value), nodes)


def mode_integral(d: int, m: float, T: float, quad_budget: int = DEFAULT_QUAD_BUDGET,
                  panel_density: float = 1.0) -> ModeIntegral:
    """Sphere average of ``|(1/T)∫_0^T e^{2πi m t ξ₁} dt|²``.

    With ``ξ₁ = cos φ`` this is
    ``∫_0^π sinc²(πTm cos φ) sin^{d-2}φ dφ / ∫_0^π sin^{d-2}φ dφ``, folded onto
    ``[0, π/2]`` and integrated with composite 16-point Gauss–Legendre panels,
    ``⌈panel_density·(1 + mT)⌉`` of them.
    """
    if d < 2:
        raise DomainError(f"dimension must be >= 2, got {d}")
    if m <= 0 or T <= 0:
        raise DomainError(f"need m > 0 and T > 0, got m={m}, T={T}")
    return _mode_integral_cached(int(d), float(m), float(T), float(panel_density),
                                 int(quad_budget))


def split_bound(d: int, m: float, T: float) -> float:
    """Explicit bound on ``M_d(m, T)`` from splitting at ``δ = (mT)^{-1/2}``.

    Near ``ξ₁ = 0`` use ``∫_0^∞ sinc² = π/2``; away from it use ``sin² ≤ 1``.
    In ``d = 2`` the weight ``(1-s²)^{-1/2}`` on ``[δ, 1]`` integrates to at
    most ``π/2``.  Valid for ``mT > 1``.
    """
    mt = m * T
    if mt <= 1.0:
        return 1.0
    delta_sq = 1.0 / mt
    far = (0.5 * math.pi if d == 2 else 1.0) / (math.pi**2 * m**2 * delta_sq)
    near = T / (2.0 * m * math.sqrt(1.0 - delta_sq))
    return min(1.0, 2.0 * (near + far) / (T**2 * sphere_weight_total(d)))


@dataclass
class BirkhoffVarianceResult:
    symbol_id: str
    T: float
    V_modes: float
    V_mc: float | None = None
    mc_stderr: float | None = None
    mode_count: int = 0
    bound_ratio: float = 0.0


def birkhoff_variance_modes(a: TrigPoly, T: float, quad_budget: int = DEFAULT_QUAD_BUDGET,
                            symbol_id: str = "a") -> BirkhoffVarianceResult:
    """``V(a, T) = Σ_{k≠0} |â_k|² M_d(‖k‖, T)`` plus ``T·V/‖ā‖²``."""
    abar = a.mean_zero()
    by_norm: dict[int, float] = {}
    for p, v in abar.items():
        n = sum(c * c for c in p)
        by_norm[n] = by_norm.get(n, 0.0) + abs(v) ** 2
    terms = [w * mode_integral(a.d, math.sqrt(n), T, quad_budget).value
             for n, w in sorted(by_norm.items())]
    v = math.fsum(terms)
    l2 = abar.l2_norm_sq()
    return BirkhoffVarianceResult(symbol_id, float(T), v, mode_count=len(abar),
                                  bound_ratio=T * v / l2 if l2 > 0 else 0.0)


def _time_average_factor(theta: np.ndarray) -> np.ndarray:
    """``(e^{iθ} - 1)/(iθ)``, stable at ``θ = 0``."""
    return np.exp(0.5j * theta) * np.sinc(theta / (2.0 * np.pi))


def birkhoff_variance_mc(a: TrigPoly, T: float, n_samples: int, seed: int,
                         chunk: int = 50_000) -> tuple[float, float]:
    """Monte Carlo estimate of ``V(a, T)`` and its standard error.

    Samples ``x`` uniformly on the torus and ``ξ`` uniformly on the sphere;
    the time average of each mode is evaluated in closed form.
    """
    if n_samples < 100:
        raise DomainError(f"n_samples must be >= 100, got {n_samples}")
    abar = a.mean_zero()
    if not len(abar):
        return 0.0, 0.0
    rng = np.random.default_rng(seed)
    freqs = abar.freqs.astype(float)
    amps = abar.amps
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_samples:
        size = min(chunk, n_samples - done)
        x = rng.random((size, a.d))
        xi = rng.standard_normal((size, a.d))
        xi /= np.linalg.norm(xi, axis=1, keepdims=True)
        theta = 2.0 * np.pi * T * (xi @ freqs.T)
        avg = (np.exp(2j * np.pi * (x @ freqs.T)) * _time_average_factor(theta)) @ amps
        dev = np.abs(avg) ** 2
        total += float(dev.sum())
        total_sq += float((dev**2).sum())
        done += size
    mean = total / n_samples
    var = max(0.0, total_sq / n_samples - mean**2) * n_samples / (n_samples - 1)
    return mean, math.sqrt(var / n_samples)


def birkhoff_variance(a: TrigPoly, T: float, n_samples: int = 100_000, seed: int = 0,
                      quad_budget: int = DEFAULT_QUAD_BUDGET,
                      symbol_id: str = "a") -> BirkhoffVarianceResult:
    res = birkhoff_variance_modes(a, T, quad_budget, symbol_id=symbol_id)
    res.V_mc, res.mc_stderr = birkhoff_variance_mc(a, T, n_samples, seed)
    return res


# ---------------------------------------------------------------------------
# quantum variance

@dataclass
class ShellContribution:
    n: int
    multiplicity: int
    elements: np.ndarray = field(repr=False)

    @property
    def sum_sq(self) -> float:
        return math.fsum(np.abs(self.elements) ** 2)


@dataclass
class QuantumVarianceResult:
    window: dict
    symbol_id: str
    basis_kind: str
    seed: int | None
    V: float
    n_states: int
    breakdown: list[ShellContribution] = field(repr=False)

    def recompute(self) -> float:
        return math.fsum(c.sum_sq for c in self.breakdown) / self.n_states


def _window_descriptor(window: SpectralWindow) -> dict:
    return {"d": window.d, "lambda": window.lam_value, "hbar": window.hbar,
            "alpha": window.alpha, "kind": window.kind, "n_min": window.n_min,
            "n_max": window.n_max, "shell_count": window.shell_count,
            "n_states": window.n_states}


def quantum_variance(a: TrigPoly, window: SpectralWindow, basis_kind: str = "haar_random",
                     seed: int | None = 0, symbol_id: str = "a",
                     n_jobs: int = 1) -> QuantumVarianceResult:
    """``(1/N) Σ_j |⟨ψ_j, ā ψ_j⟩|²`` over a basis of every shell in the window."""
    if window.n_states == 0:
        raise EmptyWindowError(f"window {_window_descriptor(window)} contains no states")
    abar = a.mean_zero()
    tol = 1e-10 * max(1.0, abar.l1_coeff_norm())

    def one(shell):
        basis = make_basis(shell, basis_kind, seed)
        el = matrix_elements(abar, basis)
        if abar.real_valued:
            worst = float(np.abs(el.imag).max(initial=0.0))
            if worst > tol:
                raise AssertionError(f"real symbol gave imaginary matrix element {worst:.3e}")
            el = el.real
        return ShellContribution(shell.n, shell.multiplicity, el)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(one, window.shells))
    else:
        parts = [one(s) for s in window.shells]
    n = window.n_states
    v = math.fsum(c.sum_sq for c in parts) / n
    return QuantumVarianceResult(_window_descriptor(window), symbol_id, basis_kind,
                                 seed, v, n, parts)


# ---------------------------------------------------------------------------
# small balls and density-one extraction

def default_centers(d: int, per_axis: int = 10, corners: bool = True) -> np.ndarray:
    """Uniform ``per_axis^d`` grid on ``[0,1)^d``, plus the domain corners."""
    axis = np.arange(per_axis) / per_axis
    grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    if corners:
        corner = np.stack(np.meshgrid(*([np.array([0.0, 1.0])] * d), indexing="ij"),
                          axis=-1).reshape(-1, d)
        grid = np.vstack([grid, corner])
    return grid


@dataclass
class SmallBallReport:
    d: int
    lam: float
    hbar: float
    nu1: float
    radius: float
    basis_kind: str
    seed: int | None
    band: tuple[float, float]
    rows: list[dict] = field(repr=False)

    @property
    def n_states(self) -> int:
        return len(self.rows)

    @property
    def in_band(self) -> np.ndarray:
        lo, hi = self.band
        return np.array([lo <= r["ratio_min"] and r["ratio_max"] <= hi for r in self.rows])

    @property
    def fraction_in_band(self) -> float:
        return float(self.in_band.mean()) if self.rows else 0.0

    @property
    def deviations(self) -> np.ndarray:
        """``max_x |ratio - 1|`` per eigenfunction."""
        return np.array([max(abs(r["ratio_min"] - 1.0), abs(r["ratio_max"] - 1.0))
                         for r in self.rows])


def small_ball_report(window: SpectralWindow, basis_kind: str = "haar_random",
                      seed: int | None = 0, nu1: float = 0.1, centers=None,
                      cutoff: float | None = None, band: tuple[float, float] = (0.5, 1.5),
                      radius_scale: float = 1.0) -> SmallBallReport:
    """Ball-mass to ball-volume ratios at radius ``radius_scale·ħ^{ν₁}``.

    For each eigenfunction, records the minimum and maximum ratio over the
    centers.  ``cutoff`` truncates the density frequencies (``None`` keeps
    all, which is exact).
    """
    if nu1 < 0:
        raise DomainError(f"nu1 must be >= 0, got {nu1}")
    r = radius_scale * window.hbar**nu1
    if not 0.0 < r < 0.5:
        raise DomainError(f"ball radius {r} violates 0 < r < 1/2")
    if window.n_states == 0:
        raise EmptyWindowError("small-ball report needs a non-empty window")
    centers = default_centers(window.d) if centers is None else np.asarray(centers, float)
    rows = []
    for shell in window.shells:
        basis = make_basis(shell, basis_kind, seed)
        kernel = BallMassKernel(shell, r)
        if cutoff is not None:
            far = np.sqrt((kernel.diffs**2).sum(axis=2)) > cutoff + 1e-9
            kernel.radial = np.where(far, 0.0, kernel.radial)
        ratios = kernel.masses(basis.matrix, centers) / kernel.volume
        for j in range(len(basis)):
            rows.append({"n": shell.n, "j": j, "ratio_min": float(ratios[j].min()),
                         "ratio_max": float(ratios[j].max())})
    return SmallBallReport(window.d, window.lam_value, window.hbar, nu1, r, basis_kind,
                           seed, tuple(band), rows)


def density_subsequence(deviations: Iterable[float], epsilon: float) -> tuple[np.ndarray, float]:
    """Indices with deviation ``≤ ε`` and the fraction they represent."""
    if epsilon <= 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    dev = np.asarray(list(deviations), dtype=float)
    idx = np.flatnonzero(np.abs(dev) <= epsilon)
    density = len(idx) / len(dev) if len(dev) else 0.0
    return idx, density


# ---------------------------------------------------------------------------
# rate fits and the three-term bound

@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    max_residual: float
    n_points: int

    def predict(self, scale) -> np.ndarray:
        return np.exp(self.intercept) * np.asarray(scale, dtype=float) ** self.slope


def fit_decay(points: Sequence[tuple[float, float]], drop_zeros: bool = True) -> DecayFit:
    """Least-squares line through ``(log scale, log value)``."""
    pts = [(float(s), float(v)) for s, v in points]
    if drop_zeros:
        pts = [(s, v) for s, v in pts if v > 0]
    elif any(v <= 0 for _, v in pts):
        raise DegenerateFitError("non-positive value with drop_zeros=False")
    if len(pts) < 3:
        raise DegenerateFitError(f"need >= 3 positive points, got {len(pts)}")
    x = np.log([s for s, _ in pts])
    y = np.log([v for _, v in pts])
    design = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - (slope * x + intercept)
    return DecayFit(float(slope), float(intercept), float(np.abs(resid).max()), len(pts))


@dataclass
class Theorem2Report:
    rows: list[dict]
    bounded: bool
    slack: float


def theorem2_bound_report(family: SymbolFamily, windows: Sequence[SpectralWindow | float],
                          nu0: float, s: float, basis_kind: str = "haar_random",
                          seed: int | None = 0, slack: float = 10.0,
                          d: int | None = None) -> Theorem2Report:
    """Quantum variance against ``‖a‖²ħ^{ν₀}``, ``‖a‖²_{H^s}ħ^{2-2ν₀}``, ``ħ^{2-2(ν₀+ν₁)}``.

    ``windows`` may hold :class:`SpectralWindow` objects or eigenvalues λ
    (then ``d`` is required).  ``bounded`` is true when every ratio
    LHS/max-term is at most ``slack`` times the ratio at the largest ħ.
    """
    if nu0 < 0 or family.nu1 < 0:
        raise DomainError("nu0 and nu1 must be >= 0")
    wins = [w if isinstance(w, SpectralWindow) else window_from_lambda(d, w) for w in windows]
    dim = wins[0].d if wins else d
    if not s > (dim + 4) / 2:
        raise DomainError(f"Sobolev index s={s} must exceed (d+4)/2 = {(dim + 4) / 2}")
    rows = []
    for win in sorted(wins, key=lambda w: -w.hbar):
        hb = win.hbar
        a = family(hb)
        lhs = quantum_variance(a, win, basis_kind, seed).V if win.n_states else float("nan")
        t1 = a.l2_norm_sq() * hb**nu0
        t2 = a.sobolev_norm_sq(s) * hb ** (2 - 2 * nu0)
        t3 = hb ** (2 - 2 * (nu0 + family.nu1))
        top = max(t1, t2, t3)
        rows.append({"lambda": win.lam_value, "hbar": hb, "n_states": win.n_states,
                     "V": lhs, "term_l2": t1, "term_sobolev": t2, "term_remainder": t3,
                     "ratio": lhs / top if top > 0 else 0.0,
                     "tail": a.meta.get("tail", 0.0)})
    ratios = [r["ratio"] for r in rows if not math.isnan(r["ratio"])]
    if not ratios:
        bounded = False
    elif ratios[0] == 0.0:
        bounded = all(x == 0.0 for x in ratios)
    else:
        bounded = all(x <= slack * ratios[0] for x in ratios)
    return Theorem2Report(rows, bounded, slack)
