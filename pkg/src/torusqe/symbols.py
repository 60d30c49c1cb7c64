"""Sparse trigonometric polynomials on the torus and symbol constructors."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.special import roots_legendre

from torusqe.errors import DomainError, ToleranceError
from torusqe.lattice import unit_ball_volume

Freq = tuple[int, ...]


class TrigPoly:
    """Finite Fourier series ``a(x) = Σ_p â_p e^{2πi p·x}`` on ``T^d``.

    Coefficients live in a dict keyed by integer tuples.  Exact zeros are
    dropped at construction; the object is treated as immutable.

    Parameters
    ----------
    d : int
        Dimension.
    coeffs : mapping of tuple[int, ...] to complex
        Fourier amplitudes.
    meta : dict, optional
        Free-form provenance (profile name, ħ, tail estimate, ...).
    """

    def __init__(self, d: int, coeffs: Mapping[Sequence[int], complex] | None = None,
                 meta: dict | None = None):
        self.d = int(d)
        clean: dict[Freq, complex] = {}
        for p, v in (coeffs or {}).items():
            key = tuple(int(c) for c in p)
            if len(key) != self.d:
                raise DomainError(f"frequency {key} does not have dimension {self.d}")
            v = complex(v)
            if v != 0:
                clean[key] = clean.get(key, 0) + v
        self._coeffs = {p: v for p, v in sorted(clean.items()) if v != 0}
        self.meta = dict(meta or {})

    @classmethod
    def constant(cls, d: int, value: complex = 1.0) -> "TrigPoly":
        return cls(d, {(0,) * d: value})

    @classmethod
    def exponential(cls, k: Sequence[int]) -> "TrigPoly":
        return cls(len(k), {tuple(k): 1.0})

    @classmethod
    def random_real(cls, d: int, n_modes: int, radius: int, rng: np.random.Generator,
                    mean_zero: bool = True) -> "TrigPoly":
        """Random real polynomial with at most ``n_modes`` stored amplitudes.

        Frequencies are drawn from the box ``[-radius, radius]^d`` and
        paired with their negatives so the result is real valued.
        """
        coeffs: dict[Freq, complex] = {}
        pairs = max(1, n_modes // 2)
        tries = 0
        while len(coeffs) < 2 * pairs and tries < 100 * n_modes:
            tries += 1
            p = tuple(int(c) for c in rng.integers(-radius, radius + 1, size=d))
            if all(c == 0 for c in p) or p in coeffs:
                continue
            v = complex(rng.normal(), rng.normal())
            coeffs[p] = v
            coeffs[tuple(-c for c in p)] = v.conjugate()
        if not mean_zero:
            coeffs[(0,) * d] = float(rng.normal())
        return cls(d, coeffs)

    # -- mapping protocol ---------------------------------------------------
    @property
    def coeffs(self) -> dict[Freq, complex]:
        return dict(self._coeffs)

    def __getitem__(self, p: Sequence[int]) -> complex:
        return self._coeffs.get(tuple(p), 0j)

    def get(self, p: Freq, default: complex = 0j) -> complex:
        return self._coeffs.get(p, default)

    def __len__(self) -> int:
        return len(self._coeffs)

    def items(self):
        return self._coeffs.items()

    def __eq__(self, other) -> bool:
        return isinstance(other, TrigPoly) and self.d == other.d and self._coeffs == other._coeffs

    __hash__ = None

    def __repr__(self) -> str:
        return f"TrigPoly(d={self.d}, modes={len(self)}, radius={self.support_radius:.3g})"

    # -- arithmetic ---------------------------------------------------------
    def __add__(self, other: "TrigPoly") -> "TrigPoly":
        out = dict(self._coeffs)
        for p, v in other.items():
            out[p] = out.get(p, 0) + v
        return TrigPoly(self.d, out)

    def __sub__(self, other: "TrigPoly") -> "TrigPoly":
        return self + other * -1

    def __mul__(self, c: complex) -> "TrigPoly":
        return TrigPoly(self.d, {p: v * c for p, v in self.items()}, meta=self.meta)

    __rmul__ = __mul__

    # -- structure ------------------------------------------------------------
    @cached_property
    def freqs(self) -> np.ndarray:
        """Frequencies as a ``(m, d)`` int64 array in canonical order."""
        return np.array(list(self._coeffs), dtype=np.int64).reshape(len(self), self.d)

    @cached_property
    def amps(self) -> np.ndarray:
        return np.array(list(self._coeffs.values()), dtype=complex)

    @property
    def mean(self) -> complex:
        return self._coeffs.get((0,) * self.d, 0j)

    @cached_property
    def support_radius(self) -> float:
        if not self._coeffs:
            return 0.0
        return float(np.sqrt((self.freqs.astype(float) ** 2).sum(axis=1).max()))

    def l1_coeff_norm(self) -> float:
        return float(np.abs(self.amps).sum()) if len(self) else 0.0

    @cached_property
    def real_valued(self) -> bool:
        for p, v in self.items():
            w = self._coeffs.get(tuple(-c for c in p))
            if w is None or abs(w - v.conjugate()) > 1e-14 * max(1.0, abs(v)):
                return False
        return True

    # -- evaluation -----------------------------------------------------------
    def evaluate(self, x) -> np.ndarray | complex:
        """Evaluate at one point ``(d,)`` or at many points ``(m, d)``."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = x.reshape(-1, self.d)
        if not len(self):
            out = np.zeros(len(pts), dtype=complex)
        else:
            phase = np.exp(2j * np.pi * (pts @ self.freqs.T.astype(float)))
            out = phase @ self.amps
        return complex(out[0]) if single else out

    __call__ = evaluate

    def grid_values(self, m: int) -> np.ndarray:
        """Values on the uniform grid ``(j/m)`` per axis, via inverse FFT.

        ``m`` must exceed ``2·max|p_i|``; otherwise frequencies alias.
        """
        if len(self) and 2 * int(np.abs(self.freqs).max()) >= m:
            raise DomainError(f"grid size {m} too small for support radius {self.support_radius}")
        spec = np.zeros((m,) * self.d, dtype=complex)
        if len(self):
            idx = tuple((self.freqs % m).T)
            spec[idx] = self.amps
        return np.fft.ifftn(spec) * m**self.d

    # -- norms ------------------------------------------------------------
    def l2_norm_sq(self) -> float:
        return float(np.sum(np.abs(self.amps) ** 2)) if len(self) else 0.0

    def sobolev_norm_sq(self, s: float) -> float:
        """``Σ (1 + 4π²‖p‖²)^s |â_p|²``."""
        if not len(self):
            return 0.0
        weight = (1.0 + 4.0 * np.pi**2 * (self.freqs.astype(float) ** 2).sum(axis=1)) ** s
        return float(np.sum(weight * np.abs(self.amps) ** 2))

    def mean_zero(self) -> "TrigPoly":
        """Drop the zero mode (``a - ∫a``); returns ``self`` if already absent."""
        zero = (0,) * self.d
        if zero not in self._coeffs:
            return self
        return TrigPoly(self.d, {p: v for p, v in self.items() if p != zero}, meta=self.meta)

    # -- serialization ----------------------------------------------------
    def to_json(self) -> str:
        doc = {
            "d": self.d,
            "entries": [[list(p), v.real, v.imag] for p, v in self.items()],
        }
        if self.meta:
            doc["meta"] = self.meta
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "TrigPoly":
        doc = json.loads(text)
        coeffs = {tuple(p): complex(re, im) for p, re, im in doc["entries"]}
        return cls(doc["d"], coeffs, meta=doc.get("meta"))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "TrigPoly":
        with open(path) as fh:
            return cls.from_json(fh.read())


# ---------------------------------------------------------------------------
# smooth compactly supported 1D templates on [-1, 1]

def _cos_power(m: int) -> Callable[[np.ndarray], np.ndarray]:
    def g(u):
        return np.where(np.abs(u) < 1.0, np.cos(0.5 * np.pi * u) ** (2 * m), 0.0)
    return g


def _smooth_bump(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
    return out


PROFILES: dict[str, Callable[[np.ndarray], np.ndarray] | None] = {
    "constant": None,
    "cos2": _cos_power(1),
    "cos4": _cos_power(2),
    "cos8": _cos_power(4),
    "bump": _smooth_bump,
}


def _profile_fourier(g, freqs: np.ndarray, nodes: int) -> np.ndarray:
    """``∫_{-1}^{1} g(u) e^{-2πi f u} du`` for each real ``f`` in ``freqs``."""
    u, w = roots_legendre(nodes)
    vals = g(u) * w
    return np.exp(-2j * np.pi * np.outer(freqs, u)) @ vals


def rescaled_bump(x0, nu1: float, hbar: float, profile: str = "cos8", cutoff: int = 32,
                  base_radius: float = 1.0, tail_tol: float = 1e-8) -> TrigPoly:
    """Tensor bump ``x ↦ Π_i g((x_i - x0_i)/w)`` with ``w = base_radius·ħ^{ν₁}``.

    Per-axis Fourier coefficients are ``w e^{-2πi p x0} ∫ g(u) e^{-2πi p w u} du``
    (Gauss–Legendre); the tensor product is truncated to ``‖p‖ ≤ cutoff``.
    ``meta["tail"]`` holds the relative L² mass discarded by the truncation.

    Raises
    ------
    DomainError
        If the support half-width ``w`` is not below 1/4.
    ToleranceError
        If the relative tail exceeds ``tail_tol``.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    d = len(x0)
    if profile not in PROFILES:
        raise DomainError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
    meta = {"profile": profile, "nu1": nu1, "hbar": hbar, "base_radius": base_radius,
            "cutoff": cutoff}
    g = PROFILES[profile]
    if g is None:
        return TrigPoly(d, {(0,) * d: 1.0}, meta={**meta, "tail": 0.0})
    w = base_radius * hbar**nu1
    if not w < 0.25:
        raise DomainError(f"bump half-width {w} must be < 1/4")
    cutoff = int(cutoff)
    ps = np.arange(-cutoff, cutoff + 1)
    nodes = 64 + 4 * int(math.ceil(2 * math.pi * cutoff * w))
    base = w * _profile_fourier(g, ps * w, nodes)
    # ‖g_w‖² per axis from the same rule (g² is as smooth as g)
    u, wts = roots_legendre(nodes)
    axis_l2 = w * float(np.sum(g(u) ** 2 * wts))
    axis = [base * np.exp(-2j * np.pi * ps * x0[i]) for i in range(d)]

    grids = np.meshgrid(*([ps] * d), indexing="ij")
    keep = sum(gr.astype(float) ** 2 for gr in grids) <= cutoff**2 + 1e-9
    vals = np.ones(keep.shape, dtype=complex)
    for i in range(d):
        shape = [1] * d
        shape[i] = -1
        vals = vals * axis[i].reshape(shape)
    total = axis_l2**d
    kept = float(np.sum(np.abs(vals[keep]) ** 2))
    tail = max(0.0, total - kept) / total
    if tail > tail_tol:
        raise ToleranceError(
            f"truncation tail {tail:.3e} exceeds {tail_tol:.1e} at cutoff {cutoff}; raise cutoff"
        )
    freqs = np.stack([gr[keep] for gr in grids], axis=1)
    coeffs = {tuple(int(c) for c in p): v for p, v in zip(freqs, vals[keep])}
    meta["tail"] = tail
    return TrigPoly(d, coeffs, meta=meta)


def ball_fourier_radial(d: int, r: float, m) -> np.ndarray:
    """``∫_{|y|<r} e^{-2πi m y₁} dy`` for ``m ≥ 0`` (vectorized).

    Slices the ball perpendicular to the first axis and substitutes
    ``y₁ = r sin θ``, which leaves the smooth integrand
    ``2 V_{d-1} r^d cos(2πmr sin θ) cos^d θ`` on ``[0, π/2]``.
    """
    m = np.atleast_1d(np.asarray(m, dtype=float))
    nodes = 48 + 2 * int(math.ceil(2 * math.pi * r * (m.max() if m.size else 0.0)))
    u, w = roots_legendre(nodes)
    theta = 0.25 * np.pi * (u + 1.0)
    w = 0.25 * np.pi * w
    base = np.cos(theta) ** d * w
    integral = np.cos(2 * np.pi * r * np.outer(m, np.sin(theta))) @ base
    return 2.0 * unit_ball_volume(d - 1) * r**d * integral


def ball_indicator_coeffs(d: int, r: float, x0, cutoff: int) -> TrigPoly:
    """Fourier coefficients of the indicator of ``B(x0, r)`` up to ``‖q‖ ≤ cutoff``.

    The coefficient at ``q`` is ``e^{-2πi q·x0} ρ_d(r, ‖q‖)``.
    """
    if not 0.0 < r < 0.5:
        raise DomainError(f"ball radius must lie in (0, 1/2), got {r}")
    x0 = np.asarray(x0, dtype=float).reshape(d)
    ps = np.arange(-int(cutoff), int(cutoff) + 1)
    grids = np.meshgrid(*([ps] * d), indexing="ij")
    nsq = sum(gr.astype(float) ** 2 for gr in grids)
    keep = nsq <= cutoff**2 + 1e-9
    freqs = np.stack([gr[keep] for gr in grids], axis=1)
    norms = np.sqrt(nsq[keep])
    uniq, inv = np.unique(norms, return_inverse=True)
    radial = ball_fourier_radial(d, r, uniq)[inv]
    vals = radial * np.exp(-2j * np.pi * freqs @ x0)
    return TrigPoly(d, {tuple(int(c) for c in p): v for p, v in zip(freqs, vals)},
                    meta={"kind": "ball", "r": r, "x0": x0.tolist(), "cutoff": cutoff})


@dataclass
class SymbolFamily:
    """An ħ-indexed family of symbols with derivative growth ``ħ^{-ν₁|β|}``.

    ``generator`` maps ħ to a :class:`TrigPoly`.  ``seminorm_constants`` is
    filled by :meth:`measure_seminorms` with finite-difference proxies for
    ``C_β``, keyed by derivative order.
    """

    generator: Callable[[float], TrigPoly]
    nu1: float
    name: str = "family"
    seminorm_constants: dict[int, list[float]] = field(default_factory=dict)

    def __call__(self, hbar: float) -> TrigPoly:
        return self.generator(hbar)

    def measure_seminorms(self, hbars: Iterable[float], max_order: int = 2,
                          grid: int = 512) -> dict[int, list[float]]:
        """``max_{|β|=j} sup_x |∂^β a_ħ| · ħ^{ν₁ j}`` per order ``j`` and ħ.

        Derivatives are periodic central finite differences of the grid values,
        taken along a single axis per order (pure ``∂_1^j`` directions).
        """
        out: dict[int, list[float]] = {j: [] for j in range(max_order + 1)}
        h = 1.0 / grid
        for hb in hbars:
            vals = self(hb).grid_values(grid).real
            for j in range(max_order + 1):
                best = 0.0
                for ax in range(vals.ndim):
                    der = vals
                    for _ in range(j):
                        der = (np.roll(der, -1, axis=ax) - np.roll(der, 1, axis=ax)) / (2 * h)
                    best = max(best, float(np.abs(der).max()))
                out[j].append(best * hb ** (self.nu1 * j))
        self.seminorm_constants = out
        return out


def parse_modes(text: str, d: int) -> TrigPoly:
    """Parse an inline mode list ``"p1,p2:re[:im]; ..."`` into a polynomial."""
    coeffs: dict[Freq, complex] = {}
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(":")
        if len(parts) not in (2, 3):
            raise DomainError(f"mode entry {chunk!r} must look like 'p1,p2:re[:im]'")
        p = tuple(int(c) for c in parts[0].split(","))
        if len(p) != d:
            raise DomainError(f"mode {p} does not have dimension {d}")
        v = complex(float(parts[1]), float(parts[2]) if len(parts) == 3 else 0.0)
        coeffs[p] = coeffs.get(p, 0) + v
    return TrigPoly(d, coeffs)
