"""Parameter-dependent ellipticity, grid resolvents and maximal regularity.

An operator ``A = sum_alpha a_alpha(x) D^alpha`` (``D = -i d``) has the
parameter-dependent symbol ``a(x, xi, lam) = sum_alpha a_alpha(x) xi^alpha - lam``
with anisotropy ``(ell', mu, mu)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .aniso import AnisotropyVector, GridSpec, SectorSpec, aniso_length
from .psido import _fft, _ifft, bracket_multiplier, lattice_values, lp_norm, op_operator, wave_packets
from .rbound import ORACLE, BanachSpaceSpec, Budget, RBoundEstimate, rbound_estimate
from .symbols import (PolySymbol, PolyTerm, XProfile, _parse_coef, classical_from_poly, fit_order,
                      neumann_parametrix, principal_inverse, sphere_directions)

log = logging.getLogger(__name__)


class EllipticityError(ValueError):
    """Spectrum of a principal symbol meets the sector."""


class NonInvertibleError(ValueError):
    """``A - lam`` is not invertible on the grid for some sampled ``lam``."""


class RemainderTooLarge(ValueError):
    """Parametrix remainder norm is at least one."""


class UnstableModeError(ValueError):
    """A grid eigenvalue of ``A - gamma`` has non-negative real part."""


# --------------------------------------------------------------------------
# operator specification


@dataclass(frozen=True)
class OperatorTerm:
    alpha: tuple[int, ...]
    coef: np.ndarray
    profile: XProfile = XProfile()


@dataclass
class DifferentialOperatorSpec:
    """``A = sum a_alpha(x) D^alpha`` with ``a_alpha = profile(x) * coef``."""

    terms: list[OperatorTerm]
    ell: AnisotropyVector
    m: int = 1
    name: str = ""

    def __post_init__(self):
        self.ell = AnisotropyVector.coerce(self.ell)
        if not self.terms:
            raise ValueError("operator needs at least one term")
        d = len(self.ell)
        for t in self.terms:
            if len(t.alpha) != d:
                raise ValueError(f"multi-index {t.alpha} has wrong length for d = {d}")
            if np.shape(t.coef) != (self.m, self.m):
                raise ValueError("coefficient shape does not match the fiber size")

    @property
    def d(self) -> int:
        return len(self.ell)

    @property
    def mu(self) -> int:
        return max(aniso_length(t.alpha, self.ell) for t in self.terms)

    @property
    def principal_terms(self) -> list[OperatorTerm]:
        return [t for t in self.terms if aniso_length(t.alpha, self.ell) == self.mu]

    @property
    def x_independent(self) -> bool:
        return all(t.profile.is_constant for t in self.terms)

    def scaled(self, c: float) -> "DifferentialOperatorSpec":
        return DifferentialOperatorSpec([OperatorTerm(t.alpha, c * t.coef, t.profile) for t in self.terms],
                                        self.ell, self.m, self.name)

    @classmethod
    def from_dict(cls, spec: dict) -> "DifferentialOperatorSpec":
        ell = [int(v) for v in spec["ell"]]
        m = int(spec.get("m", 1))
        terms = [OperatorTerm(tuple(int(a) for a in t["alpha"]), _parse_coef(t.get("coef", 1.0), (m, m)),
                              XProfile.from_dict(t.get("profile"))) for t in spec["terms"]]
        return cls(terms, AnisotropyVector(ell), m, spec.get("name", ""))

    @classmethod
    def laplacian(cls, d: int, sign: float = 1.0, m: int = 1) -> "DifferentialOperatorSpec":
        """``sign * Delta``; symbol ``-sign |xi|^2``."""
        terms = [OperatorTerm(tuple(2 if i == j else 0 for i in range(d)), -sign * np.eye(m, dtype=complex))
                 for j in range(d)]
        return cls(terms, AnisotropyVector.isotropic(d), m, "laplacian" if sign > 0 else "negative-laplacian")


def build_full_symbol(A: DifferentialOperatorSpec) -> PolySymbol:
    """``a(x, xi, lam) = sum a_alpha(x) xi^alpha - lam`` with ``ell = (ell', mu, mu)``."""
    mu = A.mu
    terms = [PolyTerm(t.coef, t.alpha, 0, t.profile) for t in A.terms]
    terms.append(PolyTerm(-np.eye(A.m, dtype=complex), (0,) * A.d, 1))
    return PolySymbol(terms, A.d, 2, list(A.ell) + [mu, mu], (A.m, A.m))


def principal_symbol(A: DifferentialOperatorSpec, limit: bool = False) -> PolySymbol:
    """``sum_{|alpha| = mu} a_alpha(x) xi^alpha`` (``limit``: radial-limit coefficients)."""
    terms = []
    for t in A.principal_terms:
        prof = XProfile.constant(t.profile.limit()) if limit else t.profile
        terms.append(PolyTerm(t.coef, t.alpha, 0, prof))
    return PolySymbol(terms, A.d, 0, A.ell, (A.m, A.m))


# --------------------------------------------------------------------------
# ellipticity


@dataclass
class EllipticityReport:
    principal_ok: bool
    extended_ok: bool
    worst_distance: float
    principal_distance: float
    extended_distance: float
    witness_principal: dict
    witness_extended: dict
    margin: float
    seed: int

    @property
    def ok(self) -> bool:
        return self.principal_ok and self.extended_ok

    def to_dict(self):
        return {"principal_ok": self.principal_ok, "extended_ok": self.extended_ok, "ok": self.ok,
                "worst_distance": self.worst_distance, "principal_distance": self.principal_distance,
                "extended_distance": self.extended_distance, "witness_principal": self.witness_principal,
                "witness_extended": self.witness_extended, "margin": self.margin, "seed": self.seed}


def _spectral_distance(sym: PolySymbol, x, xi, sector: SectorSpec):
    vals = sym(x, xi)
    ev = np.linalg.eigvals(vals)
    dist = sector.cone_distance(ev)
    flat = np.argmin(dist)
    i, j = np.unravel_index(flat, dist.shape)
    witness = {"x": [float(t) for t in np.atleast_1d(x[i] if x.ndim > 1 else x)],
               "xi": [float(t) for t in xi[i]], "eigenvalue": [float(ev[i, j].real), float(ev[i, j].imag)]}
    return float(dist[i, j]), witness


def ellipticity_check(A: DifferentialOperatorSpec, sector: SectorSpec, n_probes: int = 256, seed: int = 0,
                      margin: float = 1e-6, x_probes: np.ndarray | None = None) -> EllipticityReport:
    """Spectra of the principal and the radial-limit principal symbols on ``|xi|_ell' = 1``.

    Condition (i) probes ``x`` on ``x_probes`` (default: a box sample and the
    origin); condition (ii) probes ``|x| = 1`` directions. Distances are to
    the closed cone ``{|arg lam| <= half_angle}``.
    """
    d = A.d
    xi = sphere_directions(n_probes, d, 0, A.ell, None, seed)
    rng = np.random.default_rng(seed)
    if x_probes is None:
        x_probes = np.vstack([np.zeros((1, d)), rng.uniform(-8.0, 8.0, (15, d))])
    x_probes = np.atleast_2d(np.asarray(x_probes, dtype=float))
    P = principal_symbol(A)
    best, wit = math.inf, {}
    for x in x_probes:
        dist, w = _spectral_distance(P, np.broadcast_to(x, xi.shape), xi, sector)
        if dist < best:
            best, wit = dist, w
    dirs = rng.normal(size=(16, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    P0 = principal_symbol(A, limit=True)
    best0, wit0 = math.inf, {}
    for x in dirs:
        dist, w = _spectral_distance(P0, np.broadcast_to(x, xi.shape), xi, sector)
        if dist < best0:
            best0, wit0 = dist, w
    return EllipticityReport(best > margin, best0 > margin, min(best, best0), best, best0, wit, wit0, margin, seed)


# --------------------------------------------------------------------------
# grid realizations


def grid_operator(A: DifferentialOperatorSpec, grid: GridSpec):
    """``A_grid = op(a)(0)`` (multiplier or dense)."""
    return op_operator(build_full_symbol(A), grid, 0.0)


def grid_matrix(A: DifferentialOperatorSpec, grid: GridSpec) -> np.ndarray:
    return grid_operator(A, grid).matrix()


def grid_spectrum(A: DifferentialOperatorSpec, grid: GridSpec) -> np.ndarray:
    op = grid_operator(A, grid)
    if op.kind == "multiplier":
        return np.linalg.eigvals(op.data).ravel()
    return np.linalg.eigvals(op.matrix())


def spectral_shift(A: DifferentialOperatorSpec, grid: GridSpec, margin: float = 1.0) -> float:
    """Smallest power of two ``gamma`` with ``Re spec(A_grid - gamma) <= -margin``."""
    top = float(np.max(grid_spectrum(A, grid).real))
    need = top + margin
    if need <= 0:
        return 0.0
    return float(2.0 ** math.ceil(math.log2(need)))


def band_basis(grid: GridSpec, m: int, fraction: float = 0.25) -> np.ndarray:
    """Orthonormal columns spanning modes with ``|k_j| <= fraction * M`` (node-major, fiber minor)."""
    k = np.rint(grid.frequencies() * grid.B / math.pi)
    keep = np.all(np.abs(k) <= fraction * grid.M, axis=-1)
    E = np.exp(1j * grid.nodes() @ grid.frequencies()[keep].T) / math.sqrt(grid.n_nodes)
    return np.kron(E, np.eye(m))


# --------------------------------------------------------------------------
# resolvent via parametrix


@dataclass
class ParametrixRow:
    lam: complex
    remainder_norm: float
    remainder2_norm: float
    resolvent_norm: float
    discrepancy_band: float | None
    discrepancy_full: float | None
    identity_residual: float
    corrected: bool

    def to_dict(self):
        return {"lam": [self.lam.real, self.lam.imag], "remainder_norm": self.remainder_norm,
                "remainder2_norm": self.remainder2_norm, "resolvent_norm": self.resolvent_norm,
                "discrepancy_band": self.discrepancy_band,
                "discrepancy_full": self.discrepancy_full, "identity_residual": self.identity_residual,
                "corrected": self.corrected}


@dataclass
class ParametrixReport:
    N: int
    mu: int
    rows: list[ParametrixRow]
    slopes: list[float]
    threshold: float | None
    M: int

    @property
    def slope(self) -> float:
        return max(self.slopes) if self.slopes else math.nan

    @property
    def max_discrepancy(self) -> float:
        vals = [r.discrepancy_band for r in self.rows if r.discrepancy_band is not None]
        return max(vals) if vals else math.nan

    def to_dict(self):
        return {"N": self.N, "mu": self.mu, "M": self.M, "slope": self.slope, "slopes": self.slopes,
                "threshold": self.threshold, "max_discrepancy": self.max_discrepancy,
                "rows": [r.to_dict() for r in self.rows]}


def _opnorm(T) -> float:
    return float(np.linalg.norm(T, 2))


def corrected_resolvent(P: np.ndarray, R1: np.ndarray) -> np.ndarray:
    """``P (1 + R1)^-1``, valid when ``||R1|| < 1``."""
    nrm = _opnorm(R1)
    if nrm >= 1.0:
        raise RemainderTooLarge(f"remainder norm {nrm:.3g} >= 1: increase |lam| or N")
    return P @ np.linalg.inv(np.eye(R1.shape[0]) + R1)


def resolvent_via_parametrix(A: DifferentialOperatorSpec, lams, N: int, grid: GridSpec,
                             sector: SectorSpec | None = None, band: float = 0.25) -> ParametrixReport:
    """Parametrix ``P = op(p)``, remainder ``R1 = op(a # p - 1)`` and the corrected resolvent.

    The corrected resolvent ``P (1 + R1)^-1`` is compared with the dense
    inverse of ``A_grid - lam``, in operator norm relative to the inverse,
    on the resolved band (``|k_j| <= band * M``) and on the full lattice.
    """
    a = build_full_symbol(A)
    ca = classical_from_poly(a)
    b = principal_inverse(ca, sector).assembled()
    par = neumann_parametrix(a, b, N)
    E = band_basis(grid, A.m, band)
    rows = []
    for lam in np.asarray(lams, dtype=complex).ravel():
        P = op_operator(par.p, grid, lam).matrix()
        R1 = op_operator(par.r1, grid, lam).matrix()
        R2 = op_operator(par.r2, grid, lam).matrix()
        Aml = op_operator(a, grid, lam).matrix()
        direct = np.linalg.inv(Aml)
        ident = _opnorm(Aml @ direct - np.eye(Aml.shape[0]))
        n1, n2 = _opnorm(R1), _opnorm(R2)
        disc_b = disc_f = None
        if n1 < 1.0:
            C = corrected_resolvent(P, R1)
            disc_f = _opnorm(C - direct) / _opnorm(direct)
            disc_b = _opnorm((C - direct) @ E) / _opnorm(direct @ E)
        rows.append(ParametrixRow(complex(lam), n1, n2, abs(lam) * _opnorm(direct), disc_b, disc_f, ident, n1 < 1.0))
    slopes = []
    lam_arr = np.array([r.lam for r in rows])
    for ang in np.unique(np.round(np.angle(lam_arr), 12)):
        sel = [r for r in rows if abs(np.angle(r.lam) - ang) < 1e-9]
        if len(sel) >= 2:
            slopes.append(fit_order([abs(r.lam) for r in sel], [r.remainder_norm for r in sel], 1e-15))
    ok = sorted((abs(r.lam) for r in rows if r.remainder_norm <= 0.5))
    return ParametrixReport(N, A.mu, rows, slopes, ok[0] if ok else None, grid.M)


# --------------------------------------------------------------------------
# R-bound of the resolvent family


@dataclass
class ResolventRow:
    lam: complex
    remainder_norm: float | None
    resolvent_norm: float
    rbound_running: float


@dataclass
class ResolventRBoundReport:
    estimate: RBoundEstimate
    rows: list[ResolventRow]
    s: float
    p: float
    M: int

    @property
    def value(self) -> float:
        return self.estimate.value

    def to_dict(self):
        return {"value": self.value, "estimate": self.estimate.to_dict(), "s": self.s, "p": self.p,
                "M": self.M, "samples": len(self.rows)}


def check_invertible(A: DifferentialOperatorSpec, grid: GridSpec, lams, sector: SectorSpec | None = None,
                     cond_limit: float = 1e12):
    """Raise :class:`NonInvertibleError` if the grid spectrum meets the sector or a sample."""
    ev = grid_spectrum(A, grid)
    if sector is not None:
        inside = ev[np.asarray(sector.contains(ev))]
        if inside.size:
            lams = np.asarray(lams, dtype=complex)
            near = lams[np.argmin(np.min(np.abs(lams[:, None] - inside[None, :]), axis=1))]
            raise NonInvertibleError(
                f"{inside.size} grid eigenvalues of A lie in the sector (e.g. {inside[np.argmax(inside.real)]:.4g}); "
                f"A - lam is not invertible near the sampled lam = {near:.4g}")
    for lam in np.asarray(lams, dtype=complex):
        gap = np.min(np.abs(ev - lam))
        scale_ = max(np.max(np.abs(ev)), abs(lam), 1.0)
        if gap <= scale_ / cond_limit:
            raise NonInvertibleError(f"A - lam is singular on the grid at lam = {lam:.4g}")


def resolvent_rbound(A: DifferentialOperatorSpec, lams, grid: GridSpec, s: float = 0.0, p: float = 2.0,
                     X: BanachSpaceSpec | None = None, budget: Budget | None = None,
                     sector: SectorSpec | None = None, parametrix_N: int | None = None) -> ResolventRBoundReport:
    """R-bound estimate of ``{lam (A_grid - lam)^-1}`` on the discrete ``H^s_p(X)``."""
    lams = np.asarray(lams, dtype=complex).ravel()
    check_invertible(A, grid, lams, sector)
    X = X or BanachSpaceSpec.euclidean(A.m)
    Agrid = grid_matrix(A, grid)
    I = np.eye(Agrid.shape[0])
    if s:
        up = bracket_multiplier(grid, s, A.ell, A.m).matrix()
        down = bracket_multiplier(grid, -s, A.ell, A.m).matrix()
    rem = {}
    if parametrix_N is not None:
        rep = resolvent_via_parametrix(A, lams, parametrix_N, grid, sector)
        rem = {r.lam: r.remainder_norm for r in rep.rows}
    space = X.bochner(grid.n_nodes, p, grid.cell_volume)
    budget = budget or Budget()
    op = grid_operator(A, grid)
    if op.kind == "multiplier" and space.is_hilbert and p == 2.0 and budget.mode != "sample":
        return _multiplier_resolvent_oracle(op, lams, grid, A, s, p, rem, budget)
    fam, rows = [], []
    for k, lam in enumerate(lams):
        T = lam * np.linalg.inv(Agrid - lam * I)
        if s:
            T = up @ T @ down
        fam.append(T)
        if space.is_hilbert:
            running = max(_opnorm(T), rows[-1].rbound_running if rows else 0.0)
        else:
            running = rbound_estimate(fam, space, space, p, budget).value
        rows.append(ResolventRow(complex(lam), rem.get(complex(lam)), _opnorm(T), running))
    est = rbound_estimate(fam, space, space, p, budget)
    return ResolventRBoundReport(est, rows, s, p, grid.M)


def _multiplier_resolvent_oracle(op, lams, grid, A, s, p, rem, budget) -> ResolventRBoundReport:
    # Hilbert case with x-independent A: the DFT diagonalizes every member,
    # so the R-bound is the largest per-mode matrix norm; the H^s weights
    # commute with the resolvent and cancel
    I = np.eye(A.m)
    rows, best, best_j = [], -1.0, 0
    for j, lam in enumerate(lams):
        T = lam * np.linalg.inv(op.data - lam * I)
        nrm = float(np.max(np.linalg.svd(T, compute_uv=False)[:, 0]))
        if nrm > best:
            best, best_j = nrm, j
        rows.append(ResolventRow(complex(lam), rem.get(complex(lam)), nrm, best))
    est = RBoundEstimate(best, ORACLE, p, 1, len(lams), budget.seed, (best_j,), len(lams))
    return ResolventRBoundReport(est, rows, s, p, grid.M)


# --------------------------------------------------------------------------
# maximal regularity


@dataclass
class MaxRegReport:
    p: float
    dt: float
    T: float
    gamma: float
    C_p: float
    ratios: list[float]
    derivative_ratio: float
    operator_ratio: float
    samples: int
    M: int

    def to_dict(self):
        return {"p": self.p, "dt": self.dt, "T": self.T, "gamma": self.gamma, "C_p": self.C_p,
                "derivative_ratio": self.derivative_ratio, "operator_ratio": self.operator_ratio,
                "samples": self.samples, "M": self.M, "max_sample_ratio": max(self.ratios, default=0.0)}


def _phi12(z):
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-3
    zs = np.where(small, 1.0, z)
    phi1 = np.where(small, 1 + z / 2 + z**2 / 6 + z**3 / 24, np.expm1(zs) / zs)
    phi2 = np.where(small, 0.5 + z / 6 + z**2 / 24 + z**3 / 120, (np.expm1(zs) - zs) / zs**2)
    return phi1, phi2


def forcing_samples(grid: GridSpec, m: int, count: int, seed: int, t_force: float):
    """Seeded ``f(t, x) = sum_j psi_j(t) w_j(x)``, zero outside ``[0, t_force]``."""
    rng = np.random.default_rng(seed + 1)
    shapes = wave_packets(grid, m, 2 * count, seed)
    out = []
    for i in range(count):
        om = rng.uniform(0.0, 4.0 * math.pi / t_force, 2)
        ph = rng.uniform(0, 2 * math.pi, 2)
        out.append([(om[j], ph[j], shapes[2 * i + j].values) for j in range(2)])
    return out


def _envelope(t, t_force, om, ph):
    t = np.asarray(t, dtype=float)
    inside = (t >= 0) & (t <= t_force)
    return np.where(inside, np.sin(math.pi * t / t_force) ** 2 * np.cos(om * t + ph), 0.0)


def maxreg_experiment(A: DifferentialOperatorSpec, grid: GridSpec, p: float = 2.0, gamma: float | None = None,
                      dt: float = 0.01, t_force: float = 4.0, decay: float = 25.0, samples: int = 32,
                      seed: int = 0, margin: float = 1.0, check_ellipticity: bool = True,
                      X: BanachSpaceSpec | None = None) -> MaxRegReport:
    """Solve ``u' = (A - gamma) u + f``, ``u(0) = 0`` exactly per eigenmode; measure ``C_p``.

    ``C_p`` is the largest ratio ``(||u'||_p^p + ||(A - gamma) u||_p^p)^(1/p) / ||f||_p``
    over the forcing batch (space-time Riemann sums). Forcing is piecewise
    linear between time nodes, for which the exponential integrator is exact.
    """
    if check_ellipticity:
        rep = ellipticity_check(A, SectorSpec.right_half_plane(1.0), seed=seed)
        if not rep.ok:
            raise EllipticityError(f"not elliptic with respect to the right half-plane: {rep.to_dict()}")
    X = X or BanachSpaceSpec.euclidean(A.m)
    if gamma is None:
        gamma = spectral_shift(A, grid, margin)
    op = grid_operator(A, grid)
    N, m = grid.n_nodes, A.m
    if op.kind == "multiplier":
        Ak = op.data - gamma * np.eye(m)
        ev, V = np.linalg.eig(Ak)                    # (N, m), (N, m, m)
        Vinv = np.linalg.inv(V)

        def to_modes(F):                              # physical (S, N, m) -> eigen coords
            return np.einsum("kij,skj->ski", Vinv, _fft(F.transpose(1, 2, 0), grid).transpose(2, 0, 1))

        def from_modes(Z):
            return _ifft(np.einsum("kij,skj->ski", V, Z).transpose(1, 2, 0), grid).transpose(2, 0, 1)

        def apply_A(U):
            Uh = _fft(U.transpose(1, 2, 0), grid).transpose(2, 0, 1)
            return _ifft(np.einsum("kij,skj->ski", Ak, Uh).transpose(1, 2, 0), grid).transpose(2, 0, 1)
    else:
        Ad = op.matrix() - gamma * np.eye(N * m)
        ev, V = np.linalg.eig(Ad)
        Vinv = np.linalg.inv(V)
        ev = ev.reshape(N, m)

        def to_modes(F):
            return (F.reshape(F.shape[0], -1) @ Vinv.T).reshape(F.shape)

        def from_modes(Z):
            return (Z.reshape(Z.shape[0], -1) @ V.T).reshape(Z.shape)

        def apply_A(U):
            return (U.reshape(U.shape[0], -1) @ Ad.T).reshape(U.shape)

    if np.max(ev.real) >= 0:
        raise UnstableModeError(f"A - gamma has an eigenvalue with real part {np.max(ev.real):.3g} >= 0")
    rate = float(-np.max(ev.real))
    T = t_force + decay / rate
    n_steps = int(math.ceil(T / dt))
    E = np.exp(ev * dt)
    phi1, phi2 = _phi12(ev * dt)
    forcing = forcing_samples(grid, m, samples, seed, t_force)
    omegas = np.array([[c[0] for c in f] for f in forcing])       # (S, 2)
    phases = np.array([[c[1] for c in f] for f in forcing])
    shapes = np.array([[c[2] for c in f] for f in forcing])        # (S, 2, N, m)
    shape_modes = np.stack([to_modes(shapes[:, j]) for j in range(2)], axis=1)

    def f_at(t):
        env = _envelope(t, t_force, omegas, phases)                # (S, 2)
        return np.einsum("sj,sjnm->snm", env, shapes), np.einsum("sj,sjnm->snm", env, shape_modes)

    def pnorm_pow(F):
        if m == 1 and X.kind == "euclidean":
            pw = np.abs(F[..., 0])
        else:
            pw = X.norm(F.reshape(-1, m)).reshape(F.shape[:2])
        return np.sum(pw**p, axis=1)

    z = np.zeros((samples, N, m), dtype=complex)
    acc_du = np.zeros(samples)
    acc_au = np.zeros(samples)
    acc_f = np.zeros(samples)
    f_phys, f_mod = f_at(0.0)
    w = dt * grid.cell_volume
    for n in range(n_steps + 1):
        u = from_modes(z)
        au = apply_A(u)
        du = au + f_phys
        acc_du += w * pnorm_pow(du)
        acc_au += w * pnorm_pow(au)
        acc_f += w * pnorm_pow(f_phys)
        f_next_phys, f_next_mod = f_at((n + 1) * dt)
        z = E * z + dt * (phi1 * f_mod + phi2 * (f_next_mod - f_mod))
        f_phys, f_mod = f_next_phys, f_next_mod
    ok = acc_f > 0
    ratios = np.zeros(samples)
    ratios[ok] = ((acc_du[ok] + acc_au[ok]) / acc_f[ok]) ** (1.0 / p)
    dr = float(np.max((acc_du[ok] / acc_f[ok]) ** (1 / p))) if np.any(ok) else 0.0
    ar = float(np.max((acc_au[ok] / acc_f[ok]) ** (1 / p))) if np.any(ok) else 0.0
    return MaxRegReport(p, dt, n_steps * dt, float(gamma), float(np.max(ratios)), [float(r) for r in ratios],
                        dr, ar, samples, grid.M)
