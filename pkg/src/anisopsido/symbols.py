"""Matrix-valued symbols ``a(x, xi, lam)`` and their calculus.

A symbol is a node in a small expression tree. Leaves are polynomial
symbols in ``(xi, lam)`` with ``x``-profiles (exact derivatives), excision
cut-offs and wrapped callables (finite-difference derivatives). Sums,
pointwise products and masked inverses differentiate by the Leibniz and
``d(A^-1) = -A^-1 dA A^-1`` rules, so derivative trees stay exact
wherever the leaves are.

Conventions
-----------
* ``x`` and ``xi`` have shape ``(..., d)``; ``lam`` is complex with shape
  ``(...)``. Values have shape ``(..., m_out, m_in)``.
* The parameter space is ``C ~ R^2`` (``q = 2``), or absent (``q = 0``).
  The anisotropy ``ell`` covers ``(xi, Re lam, Im lam)``.
* Derivative multi-indices are triples ``(ax, bxi, blam)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from itertools import product as iproduct
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import hermite as _herm
from scipy.stats import norm as _norm
from scipy.stats import qmc

from .aniso import AnisotropyVector, SectorSpec, aniso_abs, aniso_bracket, aniso_length, factorial_multi, multi_indices
from .rbound import BanachSpaceSpec, Budget, rbound_estimate

log = logging.getLogger(__name__)

MAX_DERIVATIVE_PER_AXIS = 4
COND_LIMIT = 1e12


class SymbolError(ValueError):
    pass


class IllConditionedError(SymbolError):
    """Principal symbol singular or too ill-conditioned to invert."""


# --------------------------------------------------------------------------
# argument handling


def _prep(x, xi, lam, d):
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 0:
        xi = xi[None]
    x = np.zeros(d) if x is None else np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x[None]
    lam = np.asarray(0.0 if lam is None else lam, dtype=complex)
    if xi.shape[-1] != d or x.shape[-1] != d:
        raise SymbolError(f"expected {d} coordinates in x and xi")
    lead = np.broadcast_shapes(x.shape[:-1], xi.shape[:-1], lam.shape)
    return (
        np.broadcast_to(x, lead + (d,)),
        np.broadcast_to(xi, lead + (d,)),
        np.broadcast_to(lam, lead),
        lead,
    )


def _zcoords(xi, lam, q):
    """(xi, Re lam, Im lam) stacked as the anisotropic argument."""
    if q == 0:
        return xi
    return np.concatenate([xi, lam.real[..., None], lam.imag[..., None]], axis=-1)


def _norm_index(idx, n):
    if idx is None:
        return (0,) * n
    idx = tuple(int(i) for i in idx)
    if len(idx) != n:
        raise SymbolError(f"multi-index {idx} should have length {n}")
    if any(i < 0 for i in idx):
        raise SymbolError("negative derivative order")
    return idx


# --------------------------------------------------------------------------
# x-profiles (classical of order zero in x)


@dataclass(frozen=True)
class XProfile:
    """Scalar coefficient profile ``base + amp * exp(-|x - center|^2 / (2 width^2))``.

    ``amp = 0`` gives a constant. The profile settles to ``base`` as
    ``|x| -> oo``, which is its principal component of degree 0.
    """

    base: float = 1.0
    amp: float = 0.0
    width: float = 1.0
    center: tuple[float, ...] | None = None

    @classmethod
    def constant(cls, c=1.0):
        return cls(float(c), 0.0)

    @property
    def is_constant(self) -> bool:
        return self.amp == 0.0

    def limit(self) -> float:
        return self.base

    def __call__(self, x, ax=None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        d = x.shape[-1]
        ax = (0,) * d if ax is None else tuple(ax)
        if self.is_constant:
            return np.full(x.shape[:-1], self.base if not any(ax) else 0.0)
        c = np.zeros(d) if self.center is None else np.asarray(self.center, dtype=float)
        s = math.sqrt(2.0) * self.width
        u = (x - c) / s
        val = np.full(x.shape[:-1], self.amp)
        for j in range(d):
            if ax[j] == 0:
                val = val * np.exp(-u[..., j] ** 2)
            else:
                coeffs = np.zeros(ax[j] + 1)
                coeffs[-1] = 1.0
                val = val * (-1.0 / s) ** ax[j] * _herm.hermval(u[..., j], coeffs) * np.exp(-u[..., j] ** 2)
        if not any(ax):
            val = val + self.base
        return val

    def to_dict(self):
        out = {"kind": "constant", "value": self.base} if self.is_constant else {
            "kind": "bump", "base": self.base, "amp": self.amp, "width": self.width}
        if self.center is not None and not self.is_constant:
            out["center"] = list(self.center)
        return out

    @classmethod
    def from_dict(cls, spec) -> "XProfile":
        if spec is None:
            return cls.constant(1.0)
        kind = spec.get("kind", "constant")
        if kind == "constant":
            return cls.constant(float(spec.get("value", 1.0)))
        if kind == "bump":
            center = spec.get("center")
            return cls(float(spec.get("base", 1.0)), float(spec.get("amp", 1.0)),
                       float(spec.get("width", 1.0)), tuple(center) if center is not None else None)
        raise SymbolError(f"unknown x-profile kind {kind!r}")


# --------------------------------------------------------------------------
# excision


@dataclass(frozen=True)
class Excision:
    """Smoothstep cut in ``r = |z|_ell``: 0 for ``r <= 1/c``, 1 for ``r >= c``.

    ``smoothness`` selects the smoothstep degree (2 -> C^2 quintic).
    """

    c: float = 2.0
    smoothness: int = 2

    def __post_init__(self):
        if self.c <= 1.0:
            raise SymbolError("excision constant must exceed 1")

    def profile(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        lo, hi = 1.0 / self.c, self.c
        t = np.clip((r - lo) / (hi - lo), 0.0, 1.0)
        n = self.smoothness
        # generalized smoothstep S_n(t) = t^(n+1) sum_k C(n+k, k) C(2n+1, n-k) (-t)^k
        acc = np.zeros_like(t)
        for k in range(n + 1):
            acc += math.comb(n + k, k) * math.comb(2 * n + 1, n - k) * (-t) ** k
        return t ** (n + 1) * acc

    def __call__(self, z, ell) -> np.ndarray:
        return self.profile(aniso_abs(z, ell))


def chi_theta(chi: Excision, theta: float, ell) -> Callable:
    """Rescaled cut ``z -> chi(z_1 / theta^l_1, ..., z_n / theta^l_n)``."""
    if theta < 1.0:
        raise SymbolError("theta must be >= 1")
    ell = AnisotropyVector.coerce(ell)
    scale = float(theta) ** ell.array

    def f(z):
        return chi(np.asarray(z, dtype=float) / scale, ell)

    f.theta = theta
    return f


# --------------------------------------------------------------------------
# symbol nodes


class MatrixSymbol:
    """Base node. Subclasses implement ``_eval`` and ``_derive``."""

    def __init__(self, d: int, q: int, shape: tuple[int, int], order: float, ell):
        if q not in (0, 2):
            raise SymbolError("parameter dimension must be 0 or 2")
        self.d = int(d)
        self.q = int(q)
        self.shape = (int(shape[0]), int(shape[1]))
        self.order = float(order)
        self.ell = AnisotropyVector.coerce(ell)
        if len(self.ell) != self.d + self.q:
            raise SymbolError(f"anisotropy length {len(self.ell)} != d + q = {self.d + self.q}")
        self._dcache: dict = {}

    # public API -------------------------------------------------------------
    def __call__(self, x=None, xi=None, lam=None, _cache=None) -> np.ndarray:
        x, xi, lam, lead = _prep(x, xi, lam, self.d)
        return self.evaluate(x, xi, lam, {} if _cache is None else _cache)

    def evaluate(self, x, xi, lam, cache) -> np.ndarray:
        key = id(self)
        hit = cache.get(key)
        if hit is not None and hit[0] is self:
            return hit[1]
        val = self._eval(x, xi, lam, cache)
        cache[key] = (self, val)
        return val

    def derivative(self, ax=None, bxi=None, blam=None) -> "MatrixSymbol":
        ax = _norm_index(ax, self.d)
        bxi = _norm_index(bxi, self.d)
        blam = _norm_index(blam, self.q)
        if not any(ax + bxi + blam):
            return self
        key = (ax, bxi, blam)
        if key not in self._dcache:
            self._dcache[key] = self._derive(ax, bxi, blam)
        return self._dcache[key]

    @property
    def is_zero(self) -> bool:
        return False

    @property
    def x_independent(self) -> bool:
        return True

    @property
    def m(self) -> int:
        return self.shape[0]

    def weight(self, xi, lam) -> np.ndarray:
        return aniso_bracket(_zcoords(np.asarray(xi, float), np.asarray(lam, complex), self.q), self.ell)

    def deriv_order(self, ax, bxi, blam) -> float:
        return self.order - aniso_length(tuple(bxi) + tuple(blam), self.ell)

    # algebra ----------------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, scale(-1.0, other))

    def __matmul__(self, other):
        return multiply(self, other)

    def __neg__(self):
        return scale(-1.0, self)

    def _eval(self, x, xi, lam, cache):  # pragma: no cover - abstract
        raise NotImplementedError

    def _derive(self, ax, bxi, blam):
        return FDDerivative(self, ax, bxi, blam)

    def _like(self, order=None, shape=None):
        return dict(d=self.d, q=self.q, shape=shape or self.shape,
                    order=self.order if order is None else order, ell=self.ell)


def _split(delta, d, q):
    return tuple(delta[:d]), tuple(delta[d:2 * d]), tuple(delta[2 * d:2 * d + q])


class ZeroSymbol(MatrixSymbol):
    def __init__(self, d, q, shape, ell, order=-math.inf):
        super().__init__(d, q, shape, order, ell)

    @property
    def is_zero(self):
        return True

    def _eval(self, x, xi, lam, cache):
        return np.zeros(lam.shape + self.shape, dtype=complex)

    def _derive(self, ax, bxi, blam):
        return self


class IdentitySymbol(MatrixSymbol):
    def __init__(self, d, q, m, ell):
        super().__init__(d, q, (m, m), 0.0, ell)

    def _eval(self, x, xi, lam, cache):
        return np.broadcast_to(np.eye(self.m, dtype=complex), lam.shape + self.shape).copy()

    def _derive(self, ax, bxi, blam):
        return ZeroSymbol(self.d, self.q, self.shape, self.ell)


@dataclass(frozen=True)
class PolyTerm:
    coef: np.ndarray
    alpha: tuple[int, ...]
    lam_power: int = 0
    profile: XProfile = XProfile()


class PolySymbol(MatrixSymbol):
    """``sum_t profile_t(x) C_t xi^alpha_t lam^k_t`` with exact derivatives.

    Derivatives in ``(Re lam, Im lam)`` use holomorphy:
    ``d/dRe = d/dlam`` and ``d/dIm = i d/dlam``.
    """

    def __init__(self, terms: Sequence[PolyTerm], d: int, q: int, ell, shape=None, order=None):
        terms = [
            PolyTerm(np.atleast_2d(np.asarray(t.coef, dtype=complex)), tuple(int(a) for a in t.alpha),
                     int(t.lam_power), t.profile)
            for t in terms
        ]
        if shape is None:
            if not terms:
                raise SymbolError("empty polynomial needs an explicit shape")
            shape = terms[0].coef.shape
        ell = AnisotropyVector.coerce(ell)
        if q == 0 and any(t.lam_power for t in terms):
            raise SymbolError("lam powers need q = 2")
        lw = ell[d] if q else 0
        if order is None:
            order = max((aniso_length(t.alpha, ell.entries[:d]) + t.lam_power * lw for t in terms),
                        default=-math.inf)
        super().__init__(d, q, shape, order, ell)
        for t in terms:
            if t.coef.shape != self.shape or len(t.alpha) != d:
                raise SymbolError("polynomial term has inconsistent shape or multi-index")
        self.terms = terms

    @property
    def x_independent(self):
        return all(t.profile.is_constant for t in self.terms)

    @property
    def is_zero(self):
        return not self.terms

    def homogeneous_part(self, degree: float) -> "PolySymbol":
        lw = self.ell[self.d] if self.q else 0
        keep = [t for t in self.terms
                if aniso_length(t.alpha, self.ell.entries[: self.d]) + t.lam_power * lw == degree]
        return PolySymbol(keep, self.d, self.q, self.ell, self.shape, order=degree)

    def degrees(self) -> list[float]:
        lw = self.ell[self.d] if self.q else 0
        return sorted({aniso_length(t.alpha, self.ell.entries[: self.d]) + t.lam_power * lw
                       for t in self.terms}, reverse=True)

    def limit_symbol(self) -> "PolySymbol":
        """Same polynomial with every profile replaced by its limit at infinity."""
        return PolySymbol([PolyTerm(t.coef, t.alpha, t.lam_power, XProfile.constant(t.profile.limit()))
                           for t in self.terms], self.d, self.q, self.ell, self.shape, self.order)

    def _eval(self, x, xi, lam, cache):
        out = np.zeros(lam.shape + self.shape, dtype=complex)
        for t in self.terms:
            s = t.profile(x) * np.prod(xi ** np.asarray(t.alpha, dtype=float), axis=-1)
            if t.lam_power:
                s = s * lam**t.lam_power
            out += s[..., None, None] * t.coef
        return out

    def _derive(self, ax, bxi, blam):
        new = []
        for t in self.terms:
            if any(b > a for b, a in zip(bxi, t.alpha)):
                continue
            kl = sum(blam)
            if kl > t.lam_power:
                continue
            if any(ax) and t.profile.is_constant:
                continue
            c = 1.0 + 0j
            for a, b in zip(t.alpha, bxi):
                c *= math.perm(a, b)
            c *= math.perm(t.lam_power, kl) * (1j ** blam[1] if self.q else 1)
            alpha = tuple(a - b for a, b in zip(t.alpha, bxi))
            prof = t.profile
            if any(ax):
                prof = _DerivedProfile(t.profile, ax)
            new.append(PolyTerm(c * t.coef, alpha, t.lam_power - kl, prof))
        if not new:
            return ZeroSymbol(self.d, self.q, self.shape, self.ell)
        return PolySymbol(new, self.d, self.q, self.ell, self.shape,
                          order=self.deriv_order(ax, bxi, blam))


class _DerivedProfile:
    """x-derivative of a profile; differentiating again accumulates the index."""

    is_constant = False

    def __init__(self, base, ax):
        if isinstance(base, _DerivedProfile):
            ax = tuple(a + b for a, b in zip(base.ax, ax))
            base = base.base_profile
        self.base_profile = base
        self.ax = tuple(ax)

    def limit(self):
        return 0.0

    def __call__(self, x, ax=None):
        tot = self.ax if ax is None else tuple(a + b for a, b in zip(self.ax, ax))
        return self.base_profile(x, tot)


class SumSymbol(MatrixSymbol):
    def __init__(self, parts: Sequence[MatrixSymbol]):
        parts = [p for p in parts if not p.is_zero]
        if not parts:
            raise SymbolError("empty sum; use ZeroSymbol")
        p0 = parts[0]
        super().__init__(p0.d, p0.q, p0.shape, max(p.order for p in parts), p0.ell)
        self.parts = parts

    @property
    def x_independent(self):
        return all(p.x_independent for p in self.parts)

    def _eval(self, x, xi, lam, cache):
        out = self.parts[0].evaluate(x, xi, lam, cache).copy()
        for p in self.parts[1:]:
            out += p.evaluate(x, xi, lam, cache)
        return out

    def _derive(self, ax, bxi, blam):
        return add(*[p.derivative(ax, bxi, blam) for p in self.parts])


class ScaledSymbol(MatrixSymbol):
    def __init__(self, c: complex, a: MatrixSymbol):
        super().__init__(a.d, a.q, a.shape, a.order, a.ell)
        self.c = complex(c)
        self.a = a

    @property
    def x_independent(self):
        return self.a.x_independent

    def _eval(self, x, xi, lam, cache):
        return self.c * self.a.evaluate(x, xi, lam, cache)

    def _derive(self, ax, bxi, blam):
        return scale(self.c, self.a.derivative(ax, bxi, blam))


class ProductSymbol(MatrixSymbol):
    """Pointwise matrix product ``a(x, xi, lam) b(x, xi, lam)``."""

    def __init__(self, a: MatrixSymbol, b: MatrixSymbol):
        if a.shape[1] != b.shape[0]:
            raise SymbolError(f"cannot multiply shapes {a.shape} and {b.shape}")
        super().__init__(a.d, a.q, (a.shape[0], b.shape[1]), a.order + b.order, a.ell)
        self.a, self.b = a, b

    @property
    def x_independent(self):
        return self.a.x_independent and self.b.x_independent

    def _eval(self, x, xi, lam, cache):
        return self.a.evaluate(x, xi, lam, cache) @ self.b.evaluate(x, xi, lam, cache)

    def _derive(self, ax, bxi, blam):
        delta = ax + bxi + blam
        terms = []
        for g in iproduct(*[range(k + 1) for k in delta]):
            rest = tuple(k - j for k, j in zip(delta, g))
            c = math.prod(math.comb(k, j) for k, j in zip(delta, g))
            da = self.a.derivative(*_split(g, self.d, self.q))
            db = self.b.derivative(*_split(rest, self.d, self.q))
            if da.is_zero or db.is_zero:
                continue
            terms.append(scale(c, multiply(da, db)))
        if not terms:
            return ZeroSymbol(self.d, self.q, self.shape, self.ell)
        return add(*terms)


class ExcisionSymbol(MatrixSymbol):
    """Scalar excision ``chi(xi, lam)`` (times the identity of size ``m``).

    Derivatives are exact: ``|z|_ell^(2L)`` is a polynomial, so
    ``chi(|z|_ell)`` is expanded with truncated Taylor jets.
    """

    def __init__(self, chi: Excision, d, q, ell, m=1, theta: float = 1.0, delta=None):
        super().__init__(d, q, (m, m), 0.0, ell)
        self.chi = chi
        self.theta = float(theta)
        self._scale = self.theta ** self.ell.array
        self.delta = tuple(delta) if delta is not None else (0,) * (d + q)
        if any(self.delta):
            self.order = -aniso_length(self.delta, self.ell)

    def scalar(self, xi, lam):
        z = _zcoords(xi, lam, self.q) / self._scale
        if not any(self.delta):
            return self.chi(z, self.ell)
        out = _excision_jet_derivative(self.chi, z, self.ell, self.delta)
        return out * float(np.prod(self._scale ** -np.asarray(self.delta, dtype=float)))

    def _eval(self, x, xi, lam, cache):
        return self.scalar(xi, lam)[..., None, None] * np.eye(self.m)

    def _derive(self, ax, bxi, blam):
        if any(ax):
            return ZeroSymbol(self.d, self.q, self.shape, self.ell)
        delta = tuple(a + b for a, b in zip(self.delta, tuple(bxi) + tuple(blam)))
        return ExcisionSymbol(self.chi, self.d, self.q, self.ell, self.m, self.theta, delta)


class _Jets:
    """Truncated multivariate Taylor series, vectorized over points.

    Coefficient arrays have shape ``(P, n_1 + 1, ..., n_k + 1)``.
    """

    def __init__(self, orders):
        self.orders = tuple(orders)
        self.shape = tuple(n + 1 for n in self.orders)
        self.total = sum(self.orders)

    def const(self, c):
        c = np.asarray(c, dtype=float)
        out = np.zeros(c.shape + self.shape)
        out[(Ellipsis,) + (0,) * len(self.shape)] = c
        return out

    def mul(self, a, b):
        out = np.zeros_like(a)
        for g in np.ndindex(*self.shape):
            ag = a[(Ellipsis,) + g]
            if not np.any(ag):
                continue
            tgt = (Ellipsis,) + tuple(slice(k, None) for k in g)
            src = (Ellipsis,) + tuple(slice(0, n - k) for n, k in zip(self.shape, g))
            out[tgt] += ag[(Ellipsis,) + (None,) * len(g)] * b[src]
        return out

    def compose(self, coeffs, a):
        """``sum_k coeffs[k] (a - a_0)^k`` where ``coeffs`` has shape ``(K + 1, P)``."""
        a = a.copy()
        a[(Ellipsis,) + (0,) * len(self.shape)] = 0.0
        out = self.const(coeffs[0])
        power = self.const(np.ones_like(coeffs[0]))
        for k in range(1, len(coeffs)):
            power = self.mul(power, a)
            out += coeffs[k][(Ellipsis,) + (None,) * len(self.shape)] * power
        return out


def _excision_jet_derivative(chi: Excision, z, ell: AnisotropyVector, delta) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    lead = z.shape[:-1]
    flat = z.reshape(-1, z.shape[-1])
    out = np.zeros(flat.shape[0])
    lo, hi = 1.0 / chi.c, chi.c
    r = np.asarray(aniso_abs(flat, ell))
    seam = (r > lo) & (r < hi)
    if not np.any(seam):
        return out.reshape(lead)
    zs = flat[seam]
    axes = [j for j, k in enumerate(delta) if k]
    jets = _Jets([delta[j] for j in axes])
    K = jets.total
    expo = 2 * np.asarray(ell.pi, dtype=float)
    S0 = np.sum(zs ** expo, axis=-1)
    S = jets.const(S0)
    for pos, j in enumerate(axes):
        e = int(expo[j])
        for k in range(1, min(e, delta[j]) + 1):
            idx = [0] * len(axes)
            idx[pos] = k
            S[(Ellipsis,) + tuple(idx)] += math.comb(e, k) * zs[:, j] ** (e - k)
    a = 1.0 / (2 * ell.L)
    # (S0 + D)^a = sum_k binom(a, k) S0^(a - k) D^k
    binom = [1.0]
    for k in range(1, K + 1):
        binom.append(binom[-1] * (a - k + 1) / k)
    rad = jets.compose(np.array([binom[k] * S0 ** (a - k) for k in range(K + 1)]), S)
    rad[(Ellipsis,) + (0,) * len(axes)] -= lo
    t = rad / (hi - lo)
    t0 = t[(Ellipsis,) + (0,) * len(axes)]
    n = chi.smoothness
    poly = np.polynomial.Polynomial([0.0] * (n + 1) + [
        math.comb(n + k, k) * math.comb(2 * n + 1, n - k) * (-1) ** k for k in range(n + 1)])
    coeffs = []
    dp = poly
    for k in range(K + 1):
        coeffs.append(dp(t0) / math.factorial(k))
        dp = dp.deriv()
    series = jets.compose(np.array(coeffs), t)
    top = series[(Ellipsis,) + tuple(delta[j] for j in axes)]
    out[seam] = top * math.prod(math.factorial(delta[j]) for j in axes)
    return out.reshape(lead)


class InverseSymbol(MatrixSymbol):
    """Pointwise inverse, set to zero where ``|(xi, lam)|_ell < mask_radius``.

    The mask keeps the inverse away from the origin where a parameter
    dependent principal symbol degenerates; it is always multiplied by an
    excision vanishing there.
    """

    def __init__(self, a: MatrixSymbol, mask_radius: float = 0.0, cond_limit: float = COND_LIMIT):
        if a.shape[0] != a.shape[1]:
            raise SymbolError("inverse of a non-square symbol")
        super().__init__(a.d, a.q, a.shape, -a.order, a.ell)
        self.a = a
        self.mask_radius = float(mask_radius)
        self.cond_limit = cond_limit

    @property
    def x_independent(self):
        return self.a.x_independent

    def _eval(self, x, xi, lam, cache):
        A = self.a.evaluate(x, xi, lam, cache)
        out = np.zeros_like(A)
        active = np.ones(lam.shape, dtype=bool)
        if self.mask_radius > 0:
            active = aniso_abs(_zcoords(xi, lam, self.q), self.ell) >= self.mask_radius
        if np.any(active):
            Aa = A[active]
            sv = np.linalg.svd(Aa, compute_uv=False)
            with np.errstate(divide="ignore", invalid="ignore"):
                cond = sv[..., 0] / sv[..., -1]
            cond = np.where(np.isnan(cond), np.inf, cond)
            worst = float(np.max(cond)) if cond.size else 1.0
            log.debug("inverse of %d matrices, max condition %.3e", cond.size, worst)
            if not np.isfinite(worst) or worst > self.cond_limit:
                raise IllConditionedError(f"principal symbol ill-conditioned (cond = {worst:.3e})")
            out[active] = np.linalg.inv(Aa)
        return out

    def _derive(self, ax, bxi, blam):
        delta = ax + bxi + blam
        # peel one first-order derivative, recurse through the product rule
        k = next(i for i, v in enumerate(delta) if v)
        e = tuple(1 if i == k else 0 for i in range(len(delta)))
        rest = tuple(v - (1 if i == k else 0) for i, v in enumerate(delta))
        first = scale(-1.0, multiply(multiply(self, self.a.derivative(*_split(e, self.d, self.q))), self))
        return first.derivative(*_split(rest, self.d, self.q))


class FunctionSymbol(MatrixSymbol):
    """Wraps a vectorized callable ``f(x, xi, lam) -> (..., m, n)``."""

    def __init__(self, fn, d, q, shape, order, ell, x_independent=False):
        super().__init__(d, q, shape, order, ell)
        self.fn = fn
        self._xind = x_independent

    @property
    def x_independent(self):
        return self._xind

    def _eval(self, x, xi, lam, cache):
        out = np.asarray(self.fn(x, xi, lam), dtype=complex)
        return np.broadcast_to(out, lam.shape + self.shape)


class FDDerivative(MatrixSymbol):
    """Richardson-extrapolated centered differences, steps scaled by the weight.

    Step along coordinate ``j`` of ``(xi, Re lam, Im lam)`` is
    ``h * <z>_ell^l_j``; along ``x`` it is ``h``.
    """

    def __init__(self, base: MatrixSymbol, ax, bxi, blam, h: float = 1e-2):
        delta = tuple(ax) + tuple(bxi) + tuple(blam)
        if max(delta) > MAX_DERIVATIVE_PER_AXIS:
            raise SymbolError(f"derivative order {delta} above the per-axis cap {MAX_DERIVATIVE_PER_AXIS}")
        if isinstance(base, FDDerivative):
            delta = tuple(a + b for a, b in zip(base.delta, delta))
            h = base.h
            base = base.base
            if max(delta) > MAX_DERIVATIVE_PER_AXIS:
                raise SymbolError("accumulated derivative order above the per-axis cap")
        super().__init__(base.d, base.q, base.shape, base.order - aniso_length(delta[base.d:], base.ell), base.ell)
        if h <= 1e-8:
            raise SymbolError("finite-difference step underflow")
        self.base, self.delta, self.h = base, delta, h

    @property
    def x_independent(self):
        return self.base.x_independent

    def _stencil(self, x, xi, lam, h):
        d, q = self.d, self.q
        w = aniso_bracket(_zcoords(xi, lam, q), self.ell)
        steps = [np.full(lam.shape, h) for _ in range(d)]
        steps += [h * w ** self.ell[j] for j in range(d + q)]
        axes = [j for j, k in enumerate(self.delta) if k]
        offsets = [[(k / 2.0 - i, (-1) ** i * math.comb(k, i)) for i in range(k + 1)]
                   for k in (self.delta[j] for j in axes)]
        total = 0.0
        for combo in iproduct(*offsets):
            xs, xis = x.copy(), xi.copy()
            lr, li = lam.real.copy(), lam.imag.copy()
            coef = 1.0
            for j, (off, c) in zip(axes, combo):
                coef *= c
                shift = off * steps[j]
                if j < d:
                    xs[..., j] += shift
                elif j < 2 * d:
                    xis[..., j - d] += shift
                elif j == 2 * d:
                    lr = lr + shift
                else:
                    li = li + shift
            total = total + coef * self.base(xs, xis, lr + 1j * li)
        denom = np.ones(lam.shape)
        for j in axes:
            denom = denom * steps[j] ** self.delta[j]
        return total / denom[..., None, None]

    def _eval(self, x, xi, lam, cache):
        coarse = self._stencil(x, xi, lam, self.h)
        fine = self._stencil(x, xi, lam, self.h / 2)
        return (4.0 * fine - coarse) / 3.0

    def _derive(self, ax, bxi, blam):
        return FDDerivative(self, ax, bxi, blam)


# --------------------------------------------------------------------------
# constructors with zero pruning


def add(*parts: MatrixSymbol) -> MatrixSymbol:
    flat = []
    for p in parts:
        if isinstance(p, SumSymbol):
            flat.extend(p.parts)
        elif not p.is_zero:
            flat.append(p)
    if not flat:
        p0 = parts[0]
        return ZeroSymbol(p0.d, p0.q, p0.shape, p0.ell)
    if len(flat) == 1:
        return flat[0]
    return SumSymbol(flat)


def scale(c: complex, a: MatrixSymbol) -> MatrixSymbol:
    if a.is_zero or c == 0:
        return ZeroSymbol(a.d, a.q, a.shape, a.ell)
    if c == 1:
        return a
    if isinstance(a, ScaledSymbol):
        return scale(c * a.c, a.a)
    return ScaledSymbol(c, a)


def multiply(a: MatrixSymbol, b: MatrixSymbol) -> MatrixSymbol:
    if a.is_zero or b.is_zero:
        return ZeroSymbol(a.d, a.q, (a.shape[0], b.shape[1]), a.ell)
    if isinstance(a, IdentitySymbol):
        return b
    if isinstance(b, IdentitySymbol):
        return a
    return ProductSymbol(a, b)


def identity(d, q, m, ell) -> IdentitySymbol:
    return IdentitySymbol(d, q, m, ell)


def with_order(a: MatrixSymbol, order: float) -> MatrixSymbol:
    """Same value, declared order ``order``."""
    if a.is_zero or a.order == order:
        return a
    return OrderTagged(a, order)


class OrderTagged(MatrixSymbol):
    """Delegating node that only changes the declared order."""

    def __init__(self, a: MatrixSymbol, order: float):
        if isinstance(a, OrderTagged):
            a = a.a
        super().__init__(a.d, a.q, a.shape, order, a.ell)
        self.a = a

    @property
    def x_independent(self):
        return self.a.x_independent

    def _eval(self, x, xi, lam, cache):
        return self.a.evaluate(x, xi, lam, cache)

    def _derive(self, ax, bxi, blam):
        return with_order(self.a.derivative(ax, bxi, blam), self.deriv_order(ax, bxi, blam))


# --------------------------------------------------------------------------
# declarative polynomial format


def _parse_coef(c, shape=None):
    if isinstance(c, (int, float, complex)):
        val = complex(c)
        if shape is None:
            return np.array([[val]])
        return val * np.eye(shape[0], dtype=complex)
    if isinstance(c, str):
        return _parse_coef(complex(c.replace(" ", "")), shape)
    rows = [[complex(str(v).replace(" ", "")) if isinstance(v, str) else complex(v) for v in row] for row in c]
    return np.asarray(rows, dtype=complex)


def symbol_from_spec(spec: dict) -> PolySymbol:
    """Build a polynomial symbol from the declarative format.

    Keys: ``d``, ``ell_xi`` (list), ``ell_lambda`` (int, omitted for ``q = 0``),
    ``m`` (fiber size) and ``terms``; each term has ``coef`` (scalar or
    matrix), ``alpha``, ``lam_power`` and ``profile``.
    """
    d = int(spec["d"])
    ell_xi = [int(v) for v in spec.get("ell_xi", [1] * d)]
    q = 2 if spec.get("ell_lambda") is not None else 0
    ell = ell_xi + ([int(spec["ell_lambda"])] * 2 if q else [])
    m = int(spec.get("m", 1))
    terms = []
    for t in spec["terms"]:
        terms.append(PolyTerm(_parse_coef(t.get("coef", 1.0), (m, m)), tuple(t.get("alpha", [0] * d)),
                              int(t.get("lam_power", 0)), XProfile.from_dict(t.get("profile"))))
    return PolySymbol(terms, d, q, ell, (m, m))


# --------------------------------------------------------------------------
# classical symbols


def homogeneous_extend(component: Callable, degree: float, ell) -> Callable:
    """Extend ``component`` from ``{|z|_ell = 1}`` by anisotropic homogeneity.

    ``component(x, eta)`` receives sphere points ``eta``; the returned
    ``f(x, z)`` equals ``|z|^degree component(x, z / |z|^ell)``.
    """
    ell = AnisotropyVector.coerce(ell)

    def f(x, z):
        z = np.asarray(z, dtype=float)
        rho = np.asarray(aniso_abs(z, ell))
        if np.any(rho == 0):
            raise SymbolError("homogeneous extension undefined at the origin")
        eta = z / rho[..., None] ** ell.array
        val = np.asarray(component(x, eta))
        return rho.reshape(rho.shape + (1,) * (val.ndim - rho.ndim)) ** degree * val

    return f


class HomogeneousSymbol(MatrixSymbol):
    """Symbol defined by a sphere component and degree; FD derivatives."""

    def __init__(self, component, degree, d, q, shape, ell):
        super().__init__(d, q, shape, degree, ell)
        self.ext = homogeneous_extend(component, degree, self.ell)

    @property
    def x_independent(self):
        return False

    def _eval(self, x, xi, lam, cache):
        z = _zcoords(xi, lam, self.q)
        out = np.zeros(lam.shape + self.shape, dtype=complex)
        nz = aniso_abs(z, self.ell) > 0
        if np.any(nz):
            out[nz] = np.asarray(self.ext(x[nz], z[nz])).reshape((-1,) + self.shape)
        return out


class ClassicalSymbol:
    """Finite expansion ``sum_j chi * a_(mu - j)`` with homogeneous components."""

    def __init__(self, components: Sequence[MatrixSymbol], order: float, chi: Excision | None = None,
                 exact_at_origin: bool = False):
        if not components:
            raise SymbolError("classical symbol needs at least one component")
        self.components = list(components)
        self.order = float(order)
        self.chi = chi or Excision()
        # polynomial components are smooth at 0, no excision needed
        self.exact_at_origin = exact_at_origin
        c0 = self.components[0]
        self.d, self.q, self.shape, self.ell = c0.d, c0.q, c0.shape, c0.ell

    @property
    def principal(self) -> MatrixSymbol:
        return self.components[0]

    def excision_symbol(self, m=None) -> ExcisionSymbol:
        return ExcisionSymbol(self.chi, self.d, self.q, self.ell, m or self.shape[0])

    def truncated(self, J: int | None = None) -> MatrixSymbol:
        comps = self.components if J is None else self.components[: J + 1]
        total = add(*comps)
        if self.exact_at_origin:
            return with_order(total, self.order) if not total.is_zero else total
        return with_order(multiply(self.excision_symbol(total.shape[0]), total), self.order)

    def assembled(self) -> MatrixSymbol:
        return self.truncated(None)

    def homogeneity_defect(self, probes: np.ndarray, x=None, rhos=(0.75, 2.0, 7.0)) -> float:
        """Max relative error of ``a_j(rho^ell z) = rho^(mu - j) a_j(z)`` on probes."""
        worst = 0.0
        for j, comp in enumerate(self.components):
            deg = self.order - j
            xi, lam = split_z(probes, self.d, self.q)
            base = comp(x, xi, lam)
            scale_ = np.max(np.abs(base)) or 1.0
            for rho in rhos:
                zr = AnisotropyVector(self.ell).dilate(probes, rho)
                xr, lr = split_z(zr, self.d, self.q)
                err = np.max(np.abs(comp(x, xr, lr) - rho**deg * base)) / (scale_ * max(1.0, rho**deg))
                worst = max(worst, float(err))
        return worst


def split_z(z, d, q):
    z = np.asarray(z, dtype=float)
    xi = z[..., :d]
    lam = z[..., d] + 1j * z[..., d + 1] if q else np.zeros(z.shape[:-1], dtype=complex)
    return xi, lam


def classical_from_poly(a: PolySymbol, chi: Excision | None = None) -> ClassicalSymbol:
    degs = a.degrees()
    top = degs[0]
    comps = []
    j = 0
    while top - j >= min(degs):
        comps.append(a.homogeneous_part(top - j))
        j += 1
    return ClassicalSymbol(comps, top, chi, exact_at_origin=True)


# --------------------------------------------------------------------------
# probes, seminorms and measured orders


def sphere_directions(n: int, d: int, q: int, ell, sector: SectorSpec | None = None, seed: int = 0,
                      skip: int = 0) -> np.ndarray:
    """Nested quasi-random points on ``{|z|_ell = 1}`` with ``lam`` in the sector cone."""
    ell = AnisotropyVector.coerce(ell)
    dim = d + q
    gen = qmc.Halton(d=dim, scramble=True, seed=seed)
    if skip:
        gen.fast_forward(skip)
    u = np.clip(gen.random(n), 1e-12, 1 - 1e-12)
    w = _norm.ppf(u)
    if q:
        half = sector.half_angle if sector is not None else math.pi
        ang = np.arctan2(w[:, d + 1], w[:, d]) * (half / math.pi)
        rad = np.hypot(w[:, d], w[:, d + 1])
        w[:, d], w[:, d + 1] = rad * np.cos(ang), rad * np.sin(ang)
    rho = np.asarray(aniso_abs(w, ell))
    return w / rho[:, None] ** ell.array


@dataclass
class ProbeSet:
    z: np.ndarray        # (n, d + q) anisotropic coordinates
    x: np.ndarray        # (n, d)
    description: str
    sector: SectorSpec | None = None
    x_box: float = 0.0

    @property
    def xi(self):
        return self.z[:, : self.x.shape[1]]

    def lam(self, q):
        return split_z(self.z, self.x.shape[1], q)[1]

    def __len__(self):
        return self.z.shape[0]


def probe_set(n: int, d: int, q: int, ell, r_max: float = 256.0, sector: SectorSpec | None = None,
              x_box: float = 0.0, seed: int = 0) -> ProbeSet:
    """Nested probes: prefixes of one scrambled Halton stream.

    Radii cover ``[0, r_max]`` log-uniformly in ``1 + r``; doubling ``n``
    keeps the first ``n`` probes.
    """
    ell = AnisotropyVector.coerce(ell)
    gen = qmc.Halton(d=1 + d, scramble=True, seed=seed + 1)
    u = gen.random(n)
    r = np.expm1(u[:, 0] * math.log1p(r_max))
    dirs = sphere_directions(n, d, q, ell, sector, seed)
    z = ell.dilate(dirs, r)
    x = (2 * u[:, 1:] - 1) * x_box if x_box > 0 else np.zeros((n, d))
    return ProbeSet(z, x, f"{n} Halton probes, |z|_ell <= {r_max}, |x_j| <= {x_box}, seed {seed}", sector, x_box)


@dataclass
class SeminormReport:
    beta: tuple[int, ...]
    kind: str
    value: float
    probes: str
    method: str = ""

    def to_dict(self):
        return {"beta": list(self.beta), "kind": self.kind, "value": self.value,
                "probes": self.probes, "method": self.method}


def normalized_family(a: MatrixSymbol, beta, probes: ProbeSet, mu: float | None = None) -> np.ndarray:
    """``<z>_ell^(-mu + |beta|_ell) d^beta a`` evaluated on the probes."""
    mu = a.order if mu is None else mu
    beta = tuple(beta)
    if len(beta) != a.d + a.q:
        raise SymbolError("seminorm multi-index must cover (xi, lam)")
    if max(beta, default=0) > MAX_DERIVATIVE_PER_AXIS:
        raise SymbolError("derivative order above the configured maximum")
    da = a.derivative(None, beta[: a.d], beta[a.d:])
    xi, lam = split_z(probes.z, a.d, a.q)
    vals = da(probes.x, xi, lam)
    w = aniso_bracket(probes.z, a.ell) ** (-mu + aniso_length(beta, a.ell))
    return w[:, None, None] * vals


def _admissible(z, x, probes: ProbeSet, d: int, q: int) -> np.ndarray:
    ok = np.all(np.abs(x) <= probes.x_box + 1e-12, axis=-1)
    if q and probes.sector is not None:
        ok &= np.abs(np.arctan2(z[:, d + 1], z[:, d])) <= probes.sector.half_angle + 1e-12
    return ok


def polish_probes(a: MatrixSymbol, beta, probes: ProbeSet, mu=None, starts: int = 8, iters: int = 40,
                  step: float = 0.25) -> ProbeSet:
    """Local maximizers of the normalized derivative norm near the best probes.

    Batched compass search over ``(z, x)`` with relative steps, started from
    the ``starts`` largest probes and kept inside the sector and ``x`` box.
    Sharp features (such as an excision annulus) are found reliably this
    way, while plain quasi-random sampling keeps creeping upwards.
    """
    d, q = a.d, a.q

    def norms(z, x):
        fam = normalized_family(a, beta, ProbeSet(z, x, ""), mu)
        val = np.linalg.svd(fam, compute_uv=False)[:, 0]
        return np.where(_admissible(z, x, probes, d, q), val, -np.inf)

    vals = norms(probes.z, probes.x)
    idx = np.argsort(-vals, kind="stable")[:starts]
    z, x, best = probes.z[idx].copy(), probes.x[idx].copy(), vals[idx].copy()
    k = len(idx)
    free_x = probes.x_box > 0
    nz = d + q
    nvar = nz + (d if free_x else 0)
    h = np.full(k, step)
    for _ in range(iters):
        dirs = np.concatenate([np.eye(nvar), -np.eye(nvar)])
        cz = np.repeat(z, len(dirs), axis=0)
        cx = np.repeat(x, len(dirs), axis=0)
        hh = np.repeat(h, len(dirs))[:, None]
        dd = np.tile(dirs, (k, 1))
        cz = cz + hh * dd[:, :nz] * (1.0 + np.abs(cz))
        if free_x:
            cx = cx + hh * dd[:, nz:] * (1.0 + np.abs(cx))
        cv = norms(cz, cx).reshape(k, len(dirs))
        j = np.argmax(cv, axis=1)
        gain = cv[np.arange(k), j] > best
        take = np.arange(k) * len(dirs) + j
        z[gain], x[gain], best[gain] = cz[take][gain], cx[take][gain], cv[np.arange(k), j][gain]
        h = np.where(gain, h, h / 2)
    return ProbeSet(z, x, f"{k} polished probes", probes.sector, probes.x_box)


def _merge(a: ProbeSet, b: ProbeSet) -> ProbeSet:
    return ProbeSet(np.concatenate([a.z, b.z]), np.concatenate([a.x, b.x]),
                    f"{a.description} + {b.description}", a.sector, a.x_box)


def seminorm(a: MatrixSymbol, beta, kind: str = "sup", probes: ProbeSet | None = None, mu=None,
             space: BanachSpaceSpec | None = None, p: float = 2.0, budget: Budget | None = None,
             polish: int = 0) -> SeminormReport:
    """Sup-norm or R-bound of the normalized derivative family on probes.

    With ``polish > 0`` the probes are augmented by that many local
    maximizers from :func:`polish_probes`.
    """
    probes = probes or probe_set(128, a.d, a.q, a.ell)
    if polish:
        probes = _merge(probes, polish_probes(a, beta, probes, mu, polish))
    fam = normalized_family(a, beta, probes, mu)
    if kind == "sup":
        val = float(np.max(np.linalg.svd(fam, compute_uv=False)[:, 0]))
        return SeminormReport(tuple(beta), kind, val, probes.description, "operator-norm")
    if kind in ("R", "rbound", "R-bound"):
        est = rbound_estimate(list(fam), space, space, p, budget)
        return SeminormReport(tuple(beta), "R-bound", est.value, probes.description, est.method)
    raise SymbolError(f"unknown seminorm kind {kind!r}")


def ray_sup_norms(a: MatrixSymbol, ks=range(2, 9), n_dirs: int = 24, sector=None, x=None, seed=0):
    """Sup over directions of ``||a||`` on the dyadic shells ``|z|_ell = 2^k``."""
    dirs = sphere_directions(n_dirs, a.d, a.q, a.ell, sector, seed)
    radii = np.array([2.0**k for k in ks])
    out = []
    for r in radii:
        z = a.ell.dilate(dirs, r)
        xi, lam = split_z(z, a.d, a.q)
        xs = np.zeros((len(z), a.d)) if x is None else np.asarray(x, dtype=float)
        if xs.ndim == 2 and xs.shape[0] != len(z):
            vals = np.stack([a(xx[None, :], xi, lam) for xx in xs])
            vals = vals.reshape((-1,) + a.shape)
        else:
            vals = a(xs, xi, lam)
        out.append(float(np.max(np.linalg.svd(vals, compute_uv=False)[:, 0])))
    return radii, np.array(out)


def fit_order(radii, values, floor: float = 0.0) -> float:
    """Least-squares slope of ``log value`` against ``log radius``.

    Values at or below ``floor`` count as exact zeros and are dropped; if
    fewer than two remain the order is ``-inf``.
    """
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = values > floor
    if np.count_nonzero(keep) < 2:
        return -math.inf
    slope, _ = np.polyfit(np.log(radii[keep]), np.log(values[keep]), 1)
    return float(slope)


def measured_order(a: MatrixSymbol, ks=range(2, 9), n_dirs=24, sector=None, x=None, seed=0, floor=1e-13):
    radii, vals = ray_sup_norms(a, ks, n_dirs, sector, x, seed)
    return fit_order(radii, vals, floor)


# --------------------------------------------------------------------------
# asymptotic summation


@dataclass
class AsymptoticSum:
    symbol: MatrixSymbol
    thetas: list[float]
    terms: list[MatrixSymbol]


def _battery(a: MatrixSymbol, order: float, probes: ProbeSet, max_beta: int = 1) -> float:
    worst = 0.0
    for beta in multi_indices(a.d + a.q, max_beta):
        fam = normalized_family(a, beta, probes, order)
        worst = max(worst, float(np.max(np.abs(fam))) if fam.size else 0.0)
    return worst


def asymptotic_sum(terms: Sequence[MatrixSymbol], K: int | None = None, chi: Excision | None = None,
                   probes: ProbeSet | None = None, theta_max: float = 2.0**12, iters: int = 40) -> AsymptoticSum:
    """Borel-type sum ``sum_k chi_theta_k a_k`` with ``theta_k`` found by bisection.

    ``theta_k`` is the (approximately) smallest value with the probe battery
    of ``chi_theta a_k`` at order ``mu_k + 1`` below ``2^-k``.
    """
    terms = sorted(terms, key=lambda t: -t.order)
    orders = [t.order for t in terms]
    if any(b >= a for a, b in zip(orders, orders[1:])):
        raise SymbolError("orders must be strictly decreasing")
    K = len(terms) if K is None else K
    if K > len(terms):
        raise SymbolError("truncation exceeds the number of terms")
    chi = chi or Excision()
    if not terms:
        raise SymbolError("asymptotic sum of nothing")
    t0 = terms[0]
    probes = probes or probe_set(192, t0.d, t0.q, t0.ell, r_max=4 * theta_max)
    parts, thetas = [], []
    for k, a_k in enumerate(terms[:K], start=1):
        if a_k.is_zero:
            thetas.append(1.0)
            parts.append(a_k)
            continue

        def cut(theta):
            return multiply(ExcisionSymbol(chi, a_k.d, a_k.q, a_k.ell, a_k.shape[0], theta), a_k)

        target = 2.0**-k
        ok = lambda th: _battery(cut(th), a_k.order + 1, probes) < target  # noqa: E731
        if ok(1.0):
            theta = 1.0
        else:
            lo, hi = 0.0, math.log2(theta_max)
            if not ok(theta_max):
                raise SymbolError(f"theta search for term {k} did not terminate below {theta_max}")
            for _ in range(iters):
                mid = 0.5 * (lo + hi)
                if ok(2.0**mid):
                    hi = mid
                else:
                    lo = mid
            theta = 2.0**hi
        thetas.append(theta)
        parts.append(with_order(cut(theta), a_k.order))
    total = with_order(add(*parts), orders[0]) if parts else parts
    return AsymptoticSum(total, thetas, parts)


# --------------------------------------------------------------------------
# composition, inversion, parametrix


def compose(a: MatrixSymbol, b: MatrixSymbol, N: int) -> MatrixSymbol:
    """Truncated Leibniz product ``sum_{|alpha| <= N} 1/alpha! d_xi^alpha a D_x^alpha b``."""
    if a.d != b.d or a.q != b.q:
        raise SymbolError("symbols live on different spaces")
    if a.shape[1] != b.shape[0]:
        raise SymbolError(f"cannot compose shapes {a.shape} and {b.shape}")
    if N < 0:
        raise SymbolError("expansion order must be >= 0")
    terms = []
    for alpha in multi_indices(a.d, N):
        da = a.derivative(None, alpha, None)
        db = b.derivative(alpha, None, None)
        if da.is_zero or db.is_zero:
            continue
        c = (-1j) ** sum(alpha) / factorial_multi(alpha)
        terms.append(scale(c, multiply(da, db)))
    if not terms:
        return ZeroSymbol(a.d, a.q, (a.shape[0], b.shape[1]), a.ell)
    return with_order(add(*terms), a.order + b.order)


def principal_inverse(a: ClassicalSymbol, sector: SectorSpec | None = None) -> ClassicalSymbol:
    """``chi * a_(mu)^-1`` as a classical symbol of order ``-mu``."""
    inv = with_order(InverseSymbol(a.principal, mask_radius=1.0 / a.chi.c), -a.order)
    return ClassicalSymbol([inv], -a.order, a.chi)


@dataclass
class Parametrix:
    p: MatrixSymbol
    r1: MatrixSymbol
    r2: MatrixSymbol
    r: MatrixSymbol
    N: int


def neumann_parametrix(a: MatrixSymbol, b: MatrixSymbol, N: int, order_mu: float | None = None,
                       remainder_order: int | None = None) -> Parametrix:
    """Right parametrix ``p = b # sum_{k<=N} r^#k`` with ``r = 1 - a # b``.

    The series is built with compositions truncated at expansion order
    ``N``. The remainders ``r1 = a # p - 1`` and ``r2 = p # a - 1`` use
    ``remainder_order`` (default: ``N``, raised to the ``xi``-degree of a
    polynomial ``a`` so that ``a # p`` is the exact product).
    """
    mu = a.order if order_mu is None else order_mu
    if remainder_order is None:
        remainder_order = N
        if isinstance(a, PolySymbol):
            remainder_order = max(N, max(sum(t.alpha) for t in a.terms))
    one = identity(a.d, a.q, a.shape[0], a.ell)
    r = with_order(one - compose(a, b, N), -1.0)
    series = one
    power = one
    for _ in range(N):
        power = with_order(compose(r, power, N), power.order - 1.0)
        series = add(series, power)
    p = with_order(compose(b, series, N), -mu)
    r1 = with_order(compose(a, p, remainder_order) - one, -N - 1.0)
    r2 = with_order(compose(p, a, remainder_order) - one, -N - 1.0)
    return Parametrix(p, r1, r2, r, N)
