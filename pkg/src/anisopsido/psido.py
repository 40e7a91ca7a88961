"""Torus-grid realization of ``op(a)(lam)``, Sobolev norms and multiplier checks.

Operators act on grid functions ``u`` with values of shape ``(M^d, m)``
(node-major, fiber minor). The dense matrix of an operator uses the same
flattening, so ``(T @ u.values.ravel())`` is the action on ``u``.
"""
from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog

from .aniso import AnisotropyVector, GridSpec, aniso_abs, aniso_bracket, aniso_length, multi_indices
from .rbound import BanachSpaceSpec, Budget, RBoundEstimate, rbound_estimate
from .symbols import Excision, FunctionSymbol, MatrixSymbol, SymbolError, compose, fit_order, probe_set, seminorm

HEADER = struct.Struct("<iidi")


class CoverageError(ValueError):
    """Grid frequency lattice or box does not resolve the data."""


# --------------------------------------------------------------------------
# grid functions


@dataclass(frozen=True)
class GridFunction:
    grid: GridSpec
    values: np.ndarray
    fiber: BanachSpaceSpec | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.grid.n_nodes:
            raise ValueError(f"expected {self.grid.n_nodes} nodes, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function has non-finite entries")
        object.__setattr__(self, "values", v)
        if self.fiber is not None and self.fiber.dim != v.shape[1]:
            raise ValueError("fiber dimension does not match the value width")

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @property
    def space(self) -> BanachSpaceSpec:
        return self.fiber or BanachSpaceSpec.euclidean(self.m)

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.grid, values, self.fiber)

    def norm(self, p: float = 2.0) -> float:
        return lp_norm(self.values, self.grid, p, self.space)

    def spectrum(self) -> np.ndarray:
        """DFT coefficients in lattice order, shape ``(M^d, m)``."""
        return _fft(self.values, self.grid)

    # serialization ----------------------------------------------------------
    def to_bytes(self) -> bytes:
        head = HEADER.pack(self.grid.d, self.grid.M, float(self.grid.B), self.m)
        return head + np.ascontiguousarray(self.values, dtype="<c16").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes, fiber=None) -> "GridFunction":
        d, M, B, m = HEADER.unpack_from(blob)
        grid = GridSpec(d, B, M)
        payload = np.frombuffer(blob, dtype="<c16", offset=HEADER.size)
        if payload.size != grid.n_nodes * m:
            raise ValueError("payload size does not match the header")
        return cls(grid, payload.reshape(grid.n_nodes, m).copy(), fiber)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        d = self.grid.d
        w.writerow([f"x_{j + 1}" for j in range(d)] + [c for i in range(self.m) for c in (f"re_{i + 1}", f"im_{i + 1}")])
        for x, row in zip(self.grid.nodes(), self.values):
            w.writerow([repr(float(t)) for t in x] + [repr(float(t)) for z in row for t in (z.real, z.imag)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, B: float, fiber=None) -> "GridFunction":
        rows = list(csv.reader(io.StringIO(text)))
        head, body = rows[0], rows[1:]
        d = sum(h.startswith("x_") for h in head)
        M = round(len(body) ** (1.0 / d))
        data = np.array([[float(t) for t in r] for r in body])
        vals = data[:, d::2] + 1j * data[:, d + 1::2]
        return cls(GridSpec(d, B, M), vals, fiber)


def lp_norm(values, grid: GridSpec, p: float, space: BanachSpaceSpec | None = None) -> float:
    """Discrete ``L_p(grid; X)`` norm with Riemann cell weights."""
    v = np.asarray(values, dtype=complex)
    if v.ndim == 1:
        v = v[:, None]
    space = space or BanachSpaceSpec.euclidean(v.shape[1])
    pw = space.norm(v) if v.shape[1] > 1 or space.kind != "euclidean" else np.abs(v[:, 0])
    return float((grid.cell_volume * np.sum(pw**p)) ** (1.0 / p))


def fourier_mode(grid: GridSpec, k, v=None) -> GridFunction:
    """``e^{i xi_k . x} v`` for the integer lattice index ``k``."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    xi = k * math.pi / grid.B
    v = np.ones(1) if v is None else np.asarray(v, dtype=complex)
    phase = np.exp(1j * grid.nodes() @ xi)
    return GridFunction(grid, phase[:, None] * v[None, :])


def wave_packets(grid: GridSpec, m: int, count: int, seed: int = 0, sigma: float = 2.0,
                 omega_max: float = 1.0, packets: int = 3, fiber=None) -> list[GridFunction]:
    """Seeded random sums of Gaussian wave packets.

    The functions are defined analytically (independent of ``M``), so the
    same seed gives the same functions on refined grids. With the defaults
    they are band-limited to ``|xi| < 5`` and settled inside ``[-B, B)^d``
    for ``B >= 16``.
    """
    rng = np.random.default_rng(seed)
    x = grid.nodes()
    out = []
    for _ in range(count):
        u = np.zeros((grid.n_nodes, m), dtype=complex)
        for _ in range(packets):
            c = rng.uniform(-grid.B / 4, grid.B / 4, grid.d) if grid.B >= 8 else np.zeros(grid.d)
            w = rng.uniform(-omega_max, omega_max, grid.d)
            amp = rng.normal(size=m) + 1j * rng.normal(size=m)
            env = np.exp(-np.sum((x - c) ** 2, axis=-1) / (2 * sigma**2)) * np.exp(1j * x @ w)
            u += env[:, None] * amp[None, :]
        out.append(GridFunction(grid, u, fiber))
    return out


# --------------------------------------------------------------------------
# FFT helpers (node axes only)


def _fft(values, grid: GridSpec):
    shp = (grid.M,) * grid.d + values.shape[1:]
    axes = tuple(range(grid.d))
    return np.fft.fftn(values.reshape(shp), axes=axes).reshape(values.shape)


def _ifft(values, grid: GridSpec):
    shp = (grid.M,) * grid.d + values.shape[1:]
    axes = tuple(range(grid.d))
    return np.fft.ifftn(values.reshape(shp), axes=axes).reshape(values.shape)


# --------------------------------------------------------------------------
# operators


def lattice_values(sym: MatrixSymbol, grid: GridSpec, lam=0.0, x=None) -> np.ndarray:
    """Symbol on the frequency lattice, Nyquist-averaged; shape ``(M^d, m, n)``.

    ``x`` (one point) defaults to the origin; use for x-independent symbols.
    """
    if sym.d != grid.d:
        raise ValueError("symbol and grid dimensions differ")
    x0 = np.zeros(grid.d) if x is None else np.asarray(x, dtype=float)
    out = 0.0
    for xi, w in grid.lattice_variants():
        vals = sym(x0[None, :], xi, np.full(xi.shape[0], complex(lam)))
        out = out + w[:, None, None] * vals
    return out


def lattice_kernel(sym: MatrixSymbol, grid: GridSpec, lam=0.0) -> np.ndarray:
    """Dense matrix of ``op(a)(lam)`` for x-dependent ``a`` (direct double sum)."""
    N, (mo, mi) = grid.n_nodes, sym.shape
    x = grid.nodes()
    K = np.zeros((N, mo, N, mi), dtype=complex)
    lam_arr = np.full((N, 1), complex(lam))
    for xi, w in grid.lattice_variants():
        keep = w != 0
        xk, wk = xi[keep], w[keep]
        A = sym(x[:, None, :], xk[None, :, :], lam_arr)          # (N, k, mo, mi)
        E = np.exp(1j * x @ xk.T)                                  # (N, k)
        G = (E * wk[None, :])[:, :, None, None] * A
        # sum_k G[n, k, i, j] conj(E[n', k])
        K += np.einsum("nkij,pk->nipj", G, np.conj(E), optimize=True) / N
    return K.reshape(N * mo, N * mi)


@dataclass
class GridOperator:
    """``multiplier`` (lattice matrices), ``full`` (dense) or ``chain`` (right to left)."""

    grid: GridSpec
    kind: str
    data: np.ndarray | None = None
    parts: list = field(default_factory=list)
    shape: tuple[int, int] = (1, 1)

    def __post_init__(self):
        if self.kind not in ("multiplier", "full", "chain"):
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.kind == "chain":
            if not self.parts:
                raise ValueError("empty chain")
            self.shape = (self.parts[0].shape[0], self.parts[-1].shape[1])
        elif self.data is not None:
            if not np.all(np.isfinite(self.data)):
                raise ValueError("operator has non-finite entries")
            if self.kind == "multiplier":
                self.shape = self.data.shape[1:]

    @property
    def dim(self) -> tuple[int, int]:
        N = self.grid.n_nodes
        return N * self.shape[0], N * self.shape[1]

    def apply_array(self, V: np.ndarray) -> np.ndarray:
        """Apply to values of shape ``(M^d, n)`` or a batch ``(M^d, n, K)``."""
        if self.kind == "chain":
            for part in reversed(self.parts):
                V = part.apply_array(V)
            return V
        if self.kind == "multiplier":
            Vh = _fft(V, self.grid)
            if V.ndim == 2:
                Wh = np.einsum("kij,kj->ki", self.data, Vh)
            else:
                Wh = np.einsum("kij,kjb->kib", self.data, Vh)
            return _ifft(Wh, self.grid)
        N = self.grid.n_nodes
        flat = V.reshape(N * V.shape[1], -1)
        out = self.data @ flat
        return out.reshape((N, self.shape[0]) + V.shape[2:])

    def apply(self, u: GridFunction) -> GridFunction:
        return GridFunction(self.grid, self.apply_array(u.values), None)

    def matrix(self) -> np.ndarray:
        if self.kind == "full":
            return self.data
        N, n = self.grid.n_nodes, self.shape[1]
        eye = np.eye(N * n, dtype=complex).reshape(N, n, N * n)
        return self.apply_array(eye).reshape(N * self.shape[0], N * n)

    def __matmul__(self, other: "GridOperator") -> "GridOperator":
        if self.kind == "multiplier" and other.kind == "multiplier":
            return GridOperator(self.grid, "multiplier", np.einsum("kij,kjl->kil", self.data, other.data))
        left = self.parts if self.kind == "chain" else [self]
        right = other.parts if other.kind == "chain" else [other]
        return GridOperator(self.grid, "chain", parts=left + right)

    def is_translation_invariant(self, tol=1e-10) -> bool:
        """Commutes with the shift by one grid cell along each axis."""
        if self.kind == "multiplier":
            return True
        T = self.matrix()
        N, n = self.grid.n_nodes, self.shape[1]
        idx = np.arange(N).reshape((self.grid.M,) * self.grid.d)
        scale_ = np.max(np.abs(T)) or 1.0
        for ax in range(self.grid.d):
            perm = np.roll(idx, 1, axis=ax).ravel()
            P = np.kron(np.eye(N)[perm], np.eye(n))
            if np.max(np.abs(P @ T - T @ P)) > tol * scale_:
                return False
        return True


def multiplier(grid: GridSpec, fn: Callable[[np.ndarray], np.ndarray], m: int = 1) -> GridOperator:
    """Fourier multiplier from ``fn(xi) -> (K, m, m)`` (or ``(K,)`` scalars)."""
    out = 0.0
    for xi, w in grid.lattice_variants():
        vals = np.asarray(fn(xi), dtype=complex)
        if vals.ndim == 1:
            vals = vals[:, None, None] * np.eye(m)
        out = out + w[:, None, None] * vals
    return GridOperator(grid, "multiplier", out)


def bracket_multiplier(grid: GridSpec, s: float, ell, m: int = 1) -> GridOperator:
    """``op(<xi>_ell^s I)``."""
    ell = AnisotropyVector.coerce(ell)
    return multiplier(grid, lambda xi: aniso_bracket(xi, ell) ** s, m)


def symbol_settling(sym: MatrixSymbol, grid: GridSpec, lam=0.0, n_dirs: int = 16, n_freq: int = 16,
                    floor: float = 1e-12) -> float:
    """Change of ``a`` between ``|x| = B/2`` and ``|x| = B``, relative to its size.

    Changes below the absolute ``floor`` count as settled (roundoff-sized
    remainders have no meaningful relative change).
    """
    if sym.x_independent:
        return 0.0
    rng = np.random.default_rng(7)
    dirs = rng.normal(size=(n_dirs, grid.d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    xi = grid.frequencies()[rng.choice(grid.n_nodes, size=min(n_freq, grid.n_nodes), replace=False)]
    lam_arr = np.full((n_dirs, len(xi)), complex(lam))
    near = sym((grid.B / 2) * dirs[:, None, :], xi[None, :, :], lam_arr)
    far = sym(grid.B * dirs[:, None, :], xi[None, :, :], lam_arr)
    center = sym(np.zeros((1, 1, grid.d)), xi[None, :, :], lam_arr[:1])
    change = float(np.max(np.abs(near - far)))
    if change <= floor:
        return 0.0
    scale_ = max(np.max(np.abs(far)), np.max(np.abs(near)), np.max(np.abs(center)))
    return change / scale_


def op_operator(sym: MatrixSymbol, grid: GridSpec, lam=0.0, check: bool = True,
                settle_tol: float = 1e-6) -> GridOperator:
    """Grid realization of ``op(a)(lam)``: multiplier if ``a`` ignores ``x``."""
    if check:
        err = symbol_settling(sym, grid, lam)
        if err > settle_tol:
            raise CoverageError(f"symbol not settled in x inside the box (relative change {err:.2e})")
    if sym.x_independent:
        return GridOperator(grid, "multiplier", lattice_values(sym, grid, lam))
    return GridOperator(grid, "full", lattice_kernel(sym, grid, lam), shape=sym.shape)


def operator_matrix(sym: MatrixSymbol, grid: GridSpec, lam=0.0, check: bool = True) -> np.ndarray:
    return op_operator(sym, grid, lam, check).matrix()


def _edge_band(grid: GridSpec) -> np.ndarray:
    k = np.rint(grid.frequencies() * grid.B / math.pi)
    return np.any(np.abs(k) > 3 * grid.M / 8, axis=-1)


def spectral_tail(values, grid: GridSpec) -> float:
    """Largest outer-band Fourier coefficient relative to the largest overall."""
    vh = np.abs(_fft(np.asarray(values, dtype=complex), grid))
    vh = vh.reshape(grid.n_nodes, -1).max(axis=1)
    top = vh.max()
    return 0.0 if top == 0 else float(vh[_edge_band(grid)].max() / top)


def op_apply(sym: MatrixSymbol, lam, u: GridFunction, check: bool = True, tail_tol: float = 1e-8,
             settle_tol: float = 1e-6) -> GridFunction:
    """Apply ``op(a)(lam)`` to ``u`` (DFT, lattice symbol, inverse DFT).

    With ``check`` the applied spectrum ``a(., xi_k) u_hat(xi_k)`` must be below
    ``tail_tol`` times its maximum on the outer quarter of the lattice, and
    ``a`` must be settled in ``x`` inside the box.
    """
    if u.m != sym.shape[1]:
        raise ValueError("fiber size does not match the symbol")
    T = op_operator(sym, u.grid, lam, check, settle_tol)
    if check:
        if sym.x_independent:
            vh = np.einsum("kij,kj->ki", T.data, u.spectrum())
            tail = spectral_tail(_ifft(vh, u.grid), u.grid)
        else:
            tail = spectral_tail(u.values, u.grid)
        if tail > tail_tol:
            raise CoverageError(f"lattice does not cover the data (edge/max = {tail:.2e} > {tail_tol:g})")
    return T.apply(u)


# --------------------------------------------------------------------------
# Sobolev norms


def sobolev_norm(u: GridFunction, s: float, p: float = 2.0, ell=None) -> float:
    """``|| op(<xi>_ell^s) u ||_{L_p(X)}`` on the grid."""
    ell = AnisotropyVector.coerce(ell if ell is not None else [1] * u.grid.d)
    if len(ell) != u.grid.d:
        raise ValueError("anisotropy length differs from the grid dimension")
    if s == 0:
        return u.norm(p)
    return u.with_values(bracket_multiplier(u.grid, s, ell).apply_array(u.values)).norm(p)


@dataclass
class EquivalentNormReport:
    s: int
    ell: tuple[int, ...]
    c: float
    seminorms: dict
    saturated: bool
    multiplier: Callable = field(repr=False, default=None)

    def to_dict(self):
        return {"s": self.s, "ell": list(self.ell), "c": self.c, "seminorms": self.seminorms,
                "saturated": self.saturated}


def equivalent_norm_multiplier(s: int, ell, grid: GridSpec | None = None, chi: Excision | None = None,
                               probes: int = 1024) -> EquivalentNormReport:
    """``m(xi) = 1 + sum_j phi_j(xi) xi_j^(s/l_j)`` with ``phi_j = chi |xi|^-s xi_j^(s/l_j)``.

    Sweeps the lattice for ``c = min m / <xi>^s`` and checks sup seminorms of
    ``m`` up to order 2 for saturation under probe doubling.
    """
    ell = AnisotropyVector.coerce(ell)
    if int(s) != s or s < 0:
        raise ValueError("s must be a non-negative integer")
    bad = [l for l in ell if s % l]
    if bad:
        raise ValueError(f"divisibility fails: s = {s} is not a multiple of {bad}")
    chi = chi or Excision()
    d = len(ell)
    grid = grid or GridSpec(d, 16.0, 64 if d == 1 else 32)
    powers = np.array([s // l for l in ell])

    def m_of(xi):
        xi = np.asarray(xi, dtype=float)
        r = np.asarray(aniso_abs(xi, ell))
        cut = chi.profile(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            core = np.where(r > 0, np.sum(xi ** (2 * powers), axis=-1) / np.where(r > 0, r, 1.0) ** s, 0.0)
        return 1.0 + cut * core

    xi = grid.frequencies()
    ratio = m_of(xi) / aniso_bracket(xi, ell) ** s
    c = float(np.min(ratio))
    sym = FunctionSymbol(lambda x, xi, lam: m_of(xi)[..., None, None], d, 0, (1, 1), float(s), ell,
                         x_independent=True)
    semis, sat = {}, True
    for beta in multi_indices(d, 2):
        vals = []
        for n in (probes, 2 * probes):
            pr = probe_set(n, d, 0, ell, r_max=64.0)
            vals.append(seminorm(sym, beta, "sup", pr).value)
        semis[str(tuple(beta))] = vals
        if vals[1] > 1.02 * vals[0] + 1e-12 or not np.isfinite(vals[1]):
            sat = False
    return EquivalentNormReport(int(s), tuple(ell), c, semis, sat, m_of)


def w_h_equivalence(grid: GridSpec, s: int, ell, p: float = 2.0, samples: int = 16, seed: int = 0):
    """Empirical ``(c, C)`` with ``c ||u||_H <= sum_{|a|_ell <= s} ||d^a u||_p <= C ||u||_H``."""
    ell = AnisotropyVector.coerce(ell)
    if any(s % l for l in ell):
        raise ValueError("s must be divisible by every l_j")
    alphas = [a for a in multi_indices(grid.d, s) if aniso_length(a, ell) <= s]
    ratios = []
    for u in wave_packets(grid, 1, samples, seed):
        total = 0.0
        for a in alphas:
            D = multiplier(grid, lambda xi, a=a: np.prod((1j * xi) ** np.asarray(a), axis=-1))
            total += lp_norm(D.apply_array(u.values), grid, p)
        ratios.append(total / sobolev_norm(u, s, p, ell))
    return float(min(ratios)), float(max(ratios))


# --------------------------------------------------------------------------
# Hilbert transform and multiplier harness


@dataclass
class HilbertReport:
    norm: float
    ratios: list[float]
    p: float
    M: int

    def to_dict(self):
        return {"norm": self.norm, "p": self.p, "M": self.M, "trials": len(self.ratios)}


def half_line_projection(grid: GridSpec, m: int = 1) -> GridOperator:
    if grid.d != 1:
        raise ValueError("the Hilbert-transform check needs a one-dimensional grid")
    return multiplier(grid, lambda xi: (xi[:, 0] >= 0).astype(float), m)


def hilbert_transform_check(X: BanachSpaceSpec, p: float, grid: GridSpec, trials: int = 200,
                            seed: int = 0) -> HilbertReport:
    """Max of ``||H u||_p / ||u||_p`` over seeded wave packets, ``H = op(1_[0, inf))``."""
    H = half_line_projection(grid, X.dim)
    ratios = []
    for u in wave_packets(grid, X.dim, trials, seed, fiber=X):
        ratios.append(lp_norm(H.apply_array(u.values), grid, p, X) / lp_norm(u.values, grid, p, X))
    return HilbertReport(float(max(ratios)), ratios, p, grid.M)


def _fd_log_derivative(fn, xi, beta, h=1e-4):
    """``xi^beta d^beta fn(xi)`` by centered differences in ``log|xi_j|`` steps."""
    out = 0.0
    axes = [j for j, b in enumerate(beta) if b]
    for signs in np.ndindex(*([2] * len(axes))):
        pt = xi.copy()
        c = 1.0
        for j, sgn in zip(axes, signs):
            step = h * np.maximum(np.abs(xi[:, j]), 1e-3)
            pt[:, j] = xi[:, j] + (step if sgn == 0 else -step)
            c *= 1.0 if sgn == 0 else -1.0
        out = out + c * np.asarray(fn(pt), dtype=complex)
    denom = 1.0
    for j in axes:
        step = h * np.maximum(np.abs(xi[:, j]), 1e-3)
        denom = denom * (2 * step) / xi[:, j]
    return out / np.reshape(denom, (-1,) + (1,) * (np.ndim(out) - 1))


def hull_membership(T: Sequence[np.ndarray], M: np.ndarray, tol: float = 1e-8) -> float:
    """Smallest ``sum |c_j|`` with ``sum c_j T_j = M`` (real ``c``); ``inf`` if none."""
    A = np.stack([np.asarray(t, dtype=complex).ravel() for t in T], axis=1)
    target = np.asarray(M, dtype=complex).ravel()
    Ar = np.vstack([A.real, A.imag])
    br = np.concatenate([target.real, target.imag])
    k = A.shape[1]
    res = linprog(np.ones(2 * k), A_eq=np.hstack([Ar, -Ar]), b_eq=br, bounds=(0, None), method="highs")
    if not res.success:
        return math.inf
    c = res.x[:k] - res.x[k:]
    if np.max(np.abs(Ar @ c - br), initial=0.0) > tol * max(1.0, np.max(np.abs(br), initial=0.0)):
        return math.inf
    return float(res.fun)


@dataclass
class MultiplierHarnessReport:
    rbound_T: RBoundEstimate
    rbound_ops: RBoundEstimate
    ratio: float
    membership: float
    M: int

    def to_dict(self):
        return {"R_T": self.rbound_T.to_dict(), "R_multipliers": self.rbound_ops.to_dict(), "ratio": self.ratio,
                "membership": self.membership, "M": self.M}


def multiplier_rbound_harness(T: Sequence[np.ndarray], multipliers: Sequence[Callable], grid: GridSpec,
                              p: float = 2.0, X: BanachSpaceSpec | None = None, budget: Budget | None = None,
                              n_probe: int = 64, tol: float = 1e-6) -> MultiplierHarnessReport:
    """R-bound of grid multipliers ``op(m)`` relative to ``R(T)``.

    Each ``m`` maps ``xi (K, d)`` to ``(K, n, n)`` matrices (or ``(K,)``
    scalars). Membership: ``xi^beta d^beta m(xi)`` for ``beta <= (1,..,1)``
    must lie in the absolutely convex hull of ``T`` on probe frequencies.
    """
    T = [np.atleast_2d(np.asarray(t, dtype=complex)) for t in T]
    n = T[0].shape[0]
    X = X or BanachSpaceSpec.euclidean(n)
    rng = np.random.default_rng(0 if budget is None else budget.seed)
    xi_probe = rng.standard_cauchy((n_probe, grid.d)) * 4.0

    def as_mat(fn, pts):
        v = np.asarray(fn(pts), dtype=complex)
        return v[:, None, None] * np.eye(n) if v.ndim == 1 else v

    worst = 0.0
    for fn in multipliers:
        for beta in np.ndindex(*([2] * grid.d)):
            if any(beta):
                vals = _fd_log_derivative(lambda pts: as_mat(fn, pts), xi_probe, beta)
            else:
                vals = as_mat(fn, xi_probe)
            for Mv in vals:
                worst = max(worst, hull_membership(T, Mv))
    if worst > 1.0 + tol:
        raise ValueError(f"multiplier derivatives leave the hull of T (needed scale {worst:.4g})")
    RT = rbound_estimate(T, X, X, p, budget)
    space = X.bochner(grid.n_nodes, p, grid.cell_volume)
    ops = [multiplier(grid, lambda xi, fn=fn: as_mat(fn, xi), n).matrix() for fn in multipliers]
    Rm = rbound_estimate(ops, space, space, p, budget)
    return MultiplierHarnessReport(RT, Rm, Rm.value / RT.value if RT.value else math.inf, worst, grid.M)


# --------------------------------------------------------------------------
# iterated operator families in lam


@dataclass
class IterationReport:
    value: float
    estimate: RBoundEstimate
    mu_prime: float
    betas: list
    samples: int

    def to_dict(self):
        return {"value": self.value, "estimate": self.estimate.to_dict(), "mu_prime": self.mu_prime,
                "betas": [list(b) for b in self.betas], "samples": self.samples}


def op_iteration_rbound(a: MatrixSymbol, s: float, nu: float, lams, grid: GridSpec, p: float = 2.0,
                        X: BanachSpaceSpec | None = None, budget: Budget | None = None,
                        max_beta: int = 1, check: bool = True) -> IterationReport:
    """R-bound of ``<lam>^(-mu' + |beta|) d_lam^beta op(a)(lam)`` from ``H^s`` to ``H^(s - nu)``.

    ``<lam>`` uses the weight ``(mu, mu)`` on ``(Re lam, Im lam)``; ``mu' = mu``
    for ``nu >= 0`` and ``mu - nu`` otherwise.
    """
    if a.q != 2:
        raise ValueError("iteration families need a parameter-dependent symbol")
    mu = a.order
    ell_x = AnisotropyVector(a.ell.entries[: a.d])
    ell_l = AnisotropyVector(a.ell.entries[a.d:])
    mu_p = mu if nu >= 0 else mu - nu
    X = X or BanachSpaceSpec.euclidean(a.shape[0])
    lams = np.asarray(lams, dtype=complex)
    up = bracket_multiplier(grid, s - nu, ell_x, a.shape[0])
    down = bracket_multiplier(grid, -s, ell_x, a.shape[1])
    fam, betas = [], list(multi_indices(2, max_beta))
    for beta in betas:
        da = a.derivative(None, None, beta)
        for lam in lams:
            w = aniso_bracket(np.array([lam.real, lam.imag]), ell_l) ** (-mu_p + aniso_length(beta, ell_l))
            if da.is_zero:
                continue
            op = up @ op_operator(da, grid, lam, check) @ down
            fam.append(w * op.matrix())
    if not fam:
        fam = [np.zeros((grid.n_nodes * a.shape[0],) * 2)]
    space = X.bochner(grid.n_nodes, p, grid.cell_volume)
    est = rbound_estimate(fam, space, space, p, budget)
    return IterationReport(est.value, est, mu_p, betas, len(lams))


# --------------------------------------------------------------------------
# composition consistency


@dataclass
class CompositionReport:
    N: int
    lams: np.ndarray
    norms: np.ndarray
    slope: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.slope <= self.bound

    def to_dict(self):
        return {"N": self.N, "slope": self.slope, "bound": self.bound, "passed": self.passed,
                "lambda": [[complex(l).real, complex(l).imag] for l in self.lams],
                "norms": [float(v) for v in self.norms]}


def composition_consistency(a: MatrixSymbol, b: MatrixSymbol, N: int, lams, u: GridFunction,
                            slack: float = 0.25, floor: float = 1e-12, check: bool = True) -> CompositionReport:
    """Decay of ``op(a # b) u - op(a) op(b) u`` along ``lam``.

    The slope is fitted against ``|(0, lam)|_ell`` so it is directly
    comparable with the symbol order ``mu_a + mu_b - N - 1``. Norms at or
    below ``floor`` times ``|op(a) op(b) u|`` are treated as exact zeros.
    """
    if a.q != 2:
        raise ValueError("composition along lam needs parameter-dependent symbols")
    ab = compose(a, b, N)
    lams = np.asarray(lams, dtype=complex).ravel()
    ell_l = AnisotropyVector(a.ell.entries[a.d:])
    norms, rel = [], []
    for lam in lams:
        direct = op_apply(a, lam, op_apply(b, lam, u, check), check=False)
        diff = op_apply(ab, lam, u, check).values - direct.values
        ref = lp_norm(direct.values, u.grid, 2.0)
        norms.append(lp_norm(diff, u.grid, 2.0))
        rel.append(norms[-1] / ref if ref > 0 else 0.0)
    radii = aniso_abs(np.stack([lams.real, lams.imag], axis=-1), ell_l)
    # exact compositions leave roundoff only; drop those points before fitting
    vals = np.where(np.asarray(rel) <= floor, 0.0, norms)
    slope = _max_ray_slope(radii, vals, lams)
    return CompositionReport(N, lams, np.asarray(norms), slope, a.order + b.order - N - 1 + slack)


def _max_ray_slope(radii, vals, lams) -> float:
    angles = np.round(np.angle(lams), 9)
    slopes = [fit_order(radii[angles == t], vals[angles == t]) for t in np.unique(angles)]
    return float(max(slopes))
