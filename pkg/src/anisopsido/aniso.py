"""Anisotropic weights, multi-index lengths, sectors and torus grids.

For an anisotropy vector ``ell = (l_1, ..., l_n)`` with ``L = l_1 * ... * l_n``
and ``pi_j = L / l_j``::

    |xi|_ell   = (sum_j xi_j^(2 pi_j)) ** (1 / (2 L))
    <xi>_ell   = (1 + sum_j xi_j^(2 pi_j)) ** (1 / (2 L))
    |beta|_ell = sum_j l_j beta_j

All functions broadcast over leading axes; the last axis holds the
coordinates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

# thresholds for switching the power sum to log-space
_LOG_SPACE_MAG = 1e3
_LOG_SPACE_PI = 8


@dataclass(frozen=True)
class AnisotropyVector:
    """Positive integer weights ``(l_1, ..., l_n)``."""

    entries: tuple[int, ...]
    L: int = field(init=False)
    pi: tuple[int, ...] = field(init=False)

    def __init__(self, entries: Iterable[int]):
        ent = tuple(int(e) for e in entries)
        if not ent:
            raise ValueError("anisotropy vector must have at least one entry")
        if any(e < 1 for e in ent):
            raise ValueError(f"anisotropy entries must be >= 1, got {ent}")
        L = math.prod(ent)
        object.__setattr__(self, "entries", ent)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "pi", tuple(L // e for e in ent))

    @classmethod
    def coerce(cls, ell) -> "AnisotropyVector":
        return ell if isinstance(ell, cls) else cls(ell)

    @classmethod
    def isotropic(cls, n: int) -> "AnisotropyVector":
        return cls((1,) * n)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, item):
        return self.entries[item]

    def concat(self, other) -> "AnisotropyVector":
        return AnisotropyVector(self.entries + tuple(AnisotropyVector.coerce(other).entries))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.entries, dtype=float)

    def dilate(self, xi, rho):
        """Anisotropic dilation ``(rho^l_1 xi_1, ..., rho^l_n xi_n)``."""
        xi = np.asarray(xi, dtype=float)
        rho = np.asarray(rho, dtype=float)[..., None]
        return xi * rho ** self.array


def _check_dim(xi: np.ndarray, ell: AnisotropyVector) -> None:
    if xi.shape[-1] != len(ell):
        raise ValueError(
            f"dimension mismatch: vector has {xi.shape[-1]} coordinates, anisotropy has {len(ell)}"
        )


def _log_power_sum(xi: np.ndarray, ell: AnisotropyVector, one: bool) -> np.ndarray:
    """log(one + sum_j |xi_j|^(2 pi_j)), computed without overflow."""
    pi = np.asarray(ell.pi, dtype=float)
    with np.errstate(divide="ignore"):
        terms = 2.0 * pi * np.log(np.abs(xi))
    if one:
        terms = np.concatenate([np.zeros(terms.shape[:-1] + (1,)), terms], axis=-1)
    top = np.max(terms, axis=-1, keepdims=True)
    top_safe = np.where(np.isfinite(top), top, 0.0)
    out = top_safe[..., 0] + np.log(np.sum(np.exp(terms - top_safe), axis=-1))
    return out


def _weight(xi, ell, one: bool) -> np.ndarray:
    ell = AnisotropyVector.coerce(ell)
    xi = np.asarray(xi, dtype=float)
    _check_dim(xi, ell)
    pi = np.asarray(ell.pi, dtype=float)
    absxi = np.abs(xi)
    big = max(ell.pi) > _LOG_SPACE_PI or (absxi.size and np.max(absxi) > _LOG_SPACE_MAG)
    if big:
        return np.exp(_log_power_sum(xi, ell, one) / (2.0 * ell.L))
    s = np.sum(absxi ** (2.0 * pi), axis=-1)
    if one:
        s = 1.0 + s
    if ell.L == 1:
        return np.sqrt(s)
    return s ** (1.0 / (2.0 * ell.L))


def aniso_abs(xi, ell) -> np.ndarray | float:
    """Anisotropic distance ``|xi|_ell``; 1-homogeneous under ``ell``-dilation."""
    out = _weight(xi, ell, one=False)
    return float(out) if np.ndim(out) == 0 else out


def aniso_bracket(xi, ell) -> np.ndarray | float:
    """Regularized anisotropic weight ``<xi>_ell >= 1``."""
    out = _weight(xi, ell, one=True)
    return float(out) if np.ndim(out) == 0 else out


def aniso_length(beta: Sequence[int], ell) -> int:
    ell = AnisotropyVector.coerce(ell)
    beta = tuple(int(b) for b in beta)
    if len(beta) != len(ell):
        raise ValueError(f"multi-index {beta} does not match anisotropy of length {len(ell)}")
    if any(b < 0 for b in beta):
        raise ValueError(f"multi-index entries must be non-negative, got {beta}")
    return sum(b * l for b, l in zip(beta, ell))


def multi_indices(n: int, max_total: int) -> list[tuple[int, ...]]:
    """All ``beta`` in N_0^n with ``|beta| <= max_total`` in graded order."""
    out: list[tuple[int, ...]] = []

    def rec(prefix, remaining, k):
        if k == n:
            out.append(tuple(prefix))
            return
        for b in range(remaining + 1):
            rec(prefix + [b], remaining - b, k + 1)

    rec([], max_total, 0)
    out.sort(key=lambda b: (sum(b), tuple(-x for x in b)))
    return out


def factorial_multi(alpha: Sequence[int]) -> int:
    return math.prod(math.factorial(a) for a in alpha)


@dataclass
class PeetreReport:
    s: float
    max_ratio: float
    bound: float
    passed: bool
    violations: int


def peetre_check(s, samples, ell) -> PeetreReport:
    """Evaluate ``<xi+xi'>^s / (<xi>^s <xi'>^|s|)`` over sample pairs.

    ``samples`` is a pair of arrays ``(xi, xi_prime)`` of shape ``(k, n)``.
    ``s`` may be a scalar or an array of length ``k``; the bound is then
    applied per sample and the reported ``max_ratio`` is normalized by it.
    """
    xi, xip = (np.atleast_2d(np.asarray(a, dtype=float)) for a in samples)
    if xi.shape[0] == 0:
        raise ValueError("peetre_check needs at least one sample")
    if xi.shape != xip.shape:
        raise ValueError("xi and xi' sample arrays must have the same shape")
    s_arr = np.broadcast_to(np.asarray(s, dtype=float), xi.shape[:1])
    lhs = aniso_bracket(xi + xip, ell) ** s_arr
    rhs = aniso_bracket(xi, ell) ** s_arr * aniso_bracket(xip, ell) ** np.abs(s_arr)
    ratio = np.asarray(lhs / rhs)
    bound = 2.0 ** np.abs(s_arr)
    # relative slack for roundoff in the powers
    violations = int(np.sum(ratio > bound * (1.0 + 1e-12)))
    if np.ndim(s) == 0:
        return PeetreReport(float(s), float(np.max(ratio)), float(2.0 ** abs(float(s))),
                            violations == 0, violations)
    return PeetreReport(float("nan"), float(np.max(ratio / bound)), 1.0, violations == 0, violations)


@dataclass
class WeightEquivalenceReport:
    lower_exponent: float
    upper_exponent: float
    c: float
    C: float


def weight_equivalence_check(ell, samples) -> WeightEquivalenceReport:
    """Empirical constants in ``c<xi>^(1/sum l) <= <xi>_ell <= C<xi>^(sum 1/l)``."""
    ell = AnisotropyVector.coerce(ell)
    xi = np.atleast_2d(np.asarray(samples, dtype=float))
    if xi.shape[0] == 0:
        raise ValueError("weight_equivalence_check needs at least one sample")
    lo = 1.0 / sum(ell.entries)
    hi = sum(1.0 / e for e in ell.entries)
    std = np.sqrt(1.0 + np.sum(xi**2, axis=-1))
    w = aniso_bracket(xi, ell)
    return WeightEquivalenceReport(lo, hi, float(np.min(w / std**lo)), float(np.max(w / std**hi)))


@dataclass
class SectorSpec:
    """Closed sector ``{|arg lam| <= half_angle, |lam| >= min_radius}`` with sample radii/angles."""

    half_angle: float
    min_radius: float
    sample_radii: tuple[float, ...] = ()
    sample_angles: tuple[float, ...] = ()

    def __post_init__(self):
        if not (0.0 < self.half_angle <= math.pi):
            raise ValueError(f"half-opening angle must lie in (0, pi], got {self.half_angle}")
        if self.min_radius <= 0:
            raise ValueError("min_radius must be positive")
        self.sample_radii = tuple(float(r) for r in self.sample_radii)
        self.sample_angles = tuple(float(a) for a in self.sample_angles)
        if any(b <= a for a, b in zip(self.sample_radii, self.sample_radii[1:])):
            raise ValueError("sample radii must be strictly increasing")
        for r in self.sample_radii:
            if r < self.min_radius * (1 - 1e-12):
                raise ValueError(f"sample radius {r} below min_radius {self.min_radius}")
        for a in self.sample_angles:
            if abs(a) > self.half_angle * (1 + 1e-12):
                raise ValueError(f"sample angle {a} outside the sector")

    @classmethod
    def right_half_plane(cls, min_radius=1.0, **kw) -> "SectorSpec":
        return cls.logspaced(math.pi / 2, min_radius, **kw)

    @classmethod
    def logspaced(cls, half_angle, min_radius, r_max=None, n_radii=8, n_angles=5) -> "SectorSpec":
        r_max = r_max if r_max is not None else min_radius * 1e3
        radii = np.geomspace(min_radius, r_max, n_radii) if n_radii > 1 else np.array([min_radius])
        angles = np.linspace(-half_angle, half_angle, n_angles) if n_angles > 1 else np.array([0.0])
        return cls(half_angle, min_radius, tuple(radii), tuple(angles))

    def samples(self) -> np.ndarray:
        """All sampled ``lam = r e^{i phi}``, radius-major order."""
        r = np.asarray(self.sample_radii)[:, None]
        a = np.asarray(self.sample_angles)[None, :]
        return (r * np.exp(1j * a)).ravel()

    def contains(self, lam, tol=1e-12) -> np.ndarray | bool:
        lam = np.asarray(lam, dtype=complex)
        ok = (np.abs(np.angle(lam)) <= self.half_angle + tol) & (
            np.abs(lam) >= self.min_radius * (1 - tol)
        )
        return bool(ok) if ok.ndim == 0 else ok

    def cone_distance(self, z) -> np.ndarray:
        """Distance from ``z`` to the closed cone ``{|arg| <= half_angle}`` (radius ignored)."""
        z = np.asarray(z, dtype=complex)
        r = np.abs(z)
        excess = np.abs(np.angle(z)) - self.half_angle
        out = np.where(excess <= 0, 0.0, np.where(excess >= math.pi / 2, r, r * np.sin(excess)))
        return np.where(r == 0, 0.0, out)


@dataclass(frozen=True)
class GridSpec:
    """Periodic grid on ``[-B, B)^d`` with ``M`` points per axis.

    Frequencies are ``k * pi / B`` for ``k = -M/2 .. M/2 - 1`` in FFT order;
    the Nyquist mode ``k = -M/2`` stands for both ``+-M/2`` and symbols are
    averaged over the two signs there, which keeps the lattice symmetric.
    """

    d: int
    B: float = 16.0
    M: int = 64

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("grid dimension must be >= 1")
        if self.M < 4 or self.M % 2:
            raise ValueError(f"points per axis must be even and >= 4, got {self.M}")
        if self.B <= 0:
            raise ValueError("box half-width must be positive")

    @property
    def h(self) -> float:
        return 2.0 * self.B / self.M

    @property
    def n_nodes(self) -> int:
        return self.M**self.d

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    def axis(self) -> np.ndarray:
        return -self.B + self.h * np.arange(self.M)

    def freq_axis(self) -> np.ndarray:
        return np.fft.fftfreq(self.M, d=1.0 / self.M) * (math.pi / self.B)

    def nodes(self) -> np.ndarray:
        """Node coordinates, shape ``(M^d, d)``, C order over axes."""
        grids = np.meshgrid(*([self.axis()] * self.d), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def frequencies(self) -> np.ndarray:
        """Lattice frequencies in FFT order, shape ``(M^d, d)``."""
        grids = np.meshgrid(*([self.freq_axis()] * self.d), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def nyquist_mask(self) -> np.ndarray:
        """Boolean ``(M^d, d)``: which coordinates sit on the Nyquist frequency."""
        k = np.fft.fftfreq(self.M, d=1.0 / self.M)
        grids = np.meshgrid(*([k == -self.M // 2] * self.d), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def lattice_variants(self):
        """Yield ``(frequencies, weights)`` whose weighted sum symmetrizes Nyquist modes."""
        base = self.frequencies()
        nyq = self.nyquist_mask()
        for signs in range(2**self.d):
            flip = np.array([(signs >> j) & 1 for j in range(self.d)], dtype=bool)
            xi = base.copy()
            xi[:, flip] = np.where(nyq[:, flip], -xi[:, flip], xi[:, flip])
            w = np.ones(base.shape[0])
            for j in range(self.d):
                w *= np.where(nyq[:, j], 0.5, 1.0 if not flip[j] else 0.0)
            if np.any(w):
                yield xi, w

    def refine(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.d, self.B, self.M * factor)
