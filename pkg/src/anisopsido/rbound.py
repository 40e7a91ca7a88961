"""R-bounds of finite operator families.

The R-bound of a set ``T`` of operators ``X -> Y`` is the best constant in

    (sum_eps ||sum_j eps_j T_j x_j||^p)^(1/p) <= C (sum_eps ||sum_j eps_j x_j||^p)^(1/p)

over all finite tuples. Outside Hilbert geometry it is only bounded from
below here: the estimator maximizes the ratio over sampled tuples and
hill-climbs the vectors. For Euclidean spaces at ``p = 2`` the sign sums
collapse by orthogonality and the R-bound equals ``max_j ||T_j||``, which
is returned as the ``hilbert-oracle`` value.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels

EXACT = "exact-enumeration"
MONTE_CARLO = "monte-carlo-lower"
ORACLE = "hilbert-oracle"

MAX_ENUMERATION = 20


@dataclass(frozen=True)
class BanachSpaceSpec:
    """Finite-dimensional complex Banach space.

    ``kind`` is ``"euclidean"`` or ``"lp"`` (exponent ``p``). A Bochner space
    ``L_r(nodes; fiber)`` on a grid is built with :meth:`bochner`; its
    vectors are node-major with ``fiber.dim`` entries per node.
    """

    dim: int
    kind: str = "euclidean"
    p: float = 2.0
    nodes: int = 1
    outer: float | None = None
    weight: float = 1.0
    class_HT: bool = True
    property_alpha: bool = True

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if self.kind not in ("euclidean", "lp"):
            raise ValueError(f"unknown norm kind {self.kind!r}")
        if self.kind == "lp" and not (1.0 < self.p < math.inf):
            raise ValueError(f"l_p exponent must lie in (1, inf), got {self.p}")
        if self.outer is not None and not (1.0 <= self.outer < math.inf):
            raise ValueError("outer exponent must lie in [1, inf)")

    @classmethod
    def euclidean(cls, m: int) -> "BanachSpaceSpec":
        return cls(m)

    @classmethod
    def lp(cls, m: int, p: float) -> "BanachSpaceSpec":
        return cls(m, "lp", float(p))

    def bochner(self, nodes: int, r: float, weight: float = 1.0) -> "BanachSpaceSpec":
        """``L_r`` over ``nodes`` grid points with cell weight ``weight`` and this fiber."""
        return replace(self, nodes=int(nodes), outer=float(r), weight=float(weight))

    @property
    def fiber_dim(self) -> int:
        return self.dim

    @property
    def total_dim(self) -> int:
        return self.dim * self.nodes

    @property
    def inner(self) -> float:
        return 2.0 if self.kind == "euclidean" else self.p

    @property
    def outer_exponent(self) -> float:
        return self.outer if self.outer is not None else self.inner

    @property
    def is_hilbert(self) -> bool:
        return self.kind == "euclidean" and self.outer_exponent == 2.0

    def kernel_args(self) -> tuple[float, float, int, float]:
        return self.inner, self.outer_exponent, self.dim, self.weight

    def norm(self, v) -> np.ndarray | float:
        """Norm of a vector, or of each row of a 2-D array."""
        V = np.asarray(v, dtype=complex)
        flat = V.reshape(1, -1) if V.ndim == 1 else V.reshape(V.shape[0], -1)
        if flat.shape[1] != self.total_dim:
            raise ValueError(f"vector length {flat.shape[1]} != space dimension {self.total_dim}")
        q, r, block, w = self.kernel_args()
        out = _kernels.norm_pow(flat, 1.0, q, r, block, w)
        return float(out[0]) if V.ndim == 1 else out


@dataclass
class RBoundEstimate:
    value: float
    method: str
    p: float
    n_max: int
    sample_count: int
    seed: int
    best_choice: tuple[int, ...] = ()
    members: int = 0

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "method": self.method,
            "p": self.p,
            "n_max": self.n_max,
            "sample_count": self.sample_count,
            "seed": self.seed,
            "best_choice": list(self.best_choice),
            "members": self.members,
        }


@dataclass(frozen=True)
class Budget:
    """Search budget for the sampling estimator.

    ``mode`` is ``"auto"`` (oracle when it applies), ``"sample"`` (always
    search) or ``"oracle"`` (require Hilbert geometry).
    """

    n_max: int = 4
    samples: int = 64
    starts: int = 2
    ascent_steps: int = 50
    ascent_top: int = 8
    seed: int = 0
    mode: str = "auto"

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if self.n_max > MAX_ENUMERATION:
            raise ValueError(f"n_max above {MAX_ENUMERATION} exceeds exact sign enumeration")
        if self.mode not in ("auto", "sample", "oracle"):
            raise ValueError(f"unknown estimator mode {self.mode!r}")


def _as_family(T) -> list[np.ndarray]:
    members = [np.atleast_2d(np.asarray(t, dtype=complex)) for t in T]
    if not members:
        raise ValueError("operator family is empty")
    shape = members[0].shape
    for t in members:
        if t.shape != shape:
            raise ValueError(f"operator family has mixed shapes {shape} and {t.shape}")
    return members


def _default_space(space, dim) -> BanachSpaceSpec:
    if space is None:
        return BanachSpaceSpec.euclidean(dim)
    if space.total_dim != dim:
        raise ValueError(f"space dimension {space.total_dim} does not match operator size {dim}")
    return space


def sign_sum(vectors, space: BanachSpaceSpec, p: float) -> float:
    """``sum_eps ||sum_j eps_j v_j||^p`` over all sign patterns."""
    V = np.ascontiguousarray(np.atleast_2d(np.asarray(vectors, dtype=complex)))
    if V.shape[0] > MAX_ENUMERATION:
        raise ValueError(f"N = {V.shape[0]} exceeds the enumeration cap {MAX_ENUMERATION}")
    q, r, block, w = space.kernel_args()
    return _kernels.sign_sum(V, float(p), q, r, block, w)


def rademacher_mean(vectors, space: BanachSpaceSpec, p: float) -> float:
    """Normalized ``(2^-N sum_eps ||sum eps_j v_j||^p)^(1/p)``."""
    V = np.atleast_2d(vectors)
    return (sign_sum(V, space, p) / 2.0 ** V.shape[0]) ** (1.0 / p)


def rademacher_functional(T_choice, x_choice, p: float = 2.0, X=None, Y=None) -> float:
    """Ratio of the randomized sums for one tuple ``(T_j, x_j)``."""
    Ts = _as_family(T_choice)
    xs = np.atleast_2d(np.asarray(x_choice, dtype=complex))
    if len(Ts) != xs.shape[0]:
        raise ValueError("operator and vector tuples differ in length")
    if len(Ts) > MAX_ENUMERATION:
        raise ValueError(f"N = {len(Ts)} exceeds the enumeration cap {MAX_ENUMERATION}")
    X = _default_space(X, Ts[0].shape[1])
    Y = _default_space(Y, Ts[0].shape[0])
    den = sign_sum(xs, X, p)
    if den == 0.0:
        raise ValueError("all x_j vanish; the functional is undefined")
    num = sign_sum(np.stack([t @ x for t, x in zip(Ts, xs)]), Y, p)
    return (num / den) ** (1.0 / p)


def rademacher_functional_mc(T_choice, x_choice, p=2.0, X=None, Y=None, patterns=4096, seed=0):
    """Monte-Carlo version over sampled sign patterns, for tuples beyond the cap."""
    Ts = _as_family(T_choice)
    xs = np.atleast_2d(np.asarray(x_choice, dtype=complex))
    X = _default_space(X, Ts[0].shape[1])
    Y = _default_space(Y, Ts[0].shape[0])
    rng = np.random.default_rng(seed)
    eps = rng.choice([-1.0, 1.0], size=(patterns, len(Ts)))
    TX = np.stack([t @ x for t, x in zip(Ts, xs)])
    num = np.sum(np.asarray(Y.norm(eps @ TX)) ** p)
    den = np.sum(np.asarray(X.norm(eps @ xs)) ** p)
    if den == 0.0:
        raise ValueError("all x_j vanish; the functional is undefined")
    return float((num / den) ** (1.0 / p))


def _top_right_vector(t: np.ndarray) -> np.ndarray:
    _, _, vh = np.linalg.svd(t)
    v = vh[0].conj()
    k = int(np.argmax(np.abs(v)))
    # fix the phase so the start is invariant under positive scaling of t
    return v * (abs(v[k]) / v[k])


def _choice_rng(seed: int, choice: Sequence[int]) -> np.random.Generator:
    return np.random.default_rng([int(seed), len(choice), *choice])


def _enumerate_choices(k: int, n_max: int, samples: int, seed: int):
    """Singletons always; larger multisets exhaustively or by seeded sampling."""
    total = sum(math.comb(k + n - 1, n) for n in range(1, n_max + 1))
    singles = [(j,) for j in range(k)]
    if total <= max(samples, k):
        choices = singles + [
            c for n in range(2, n_max + 1) for c in itertools.combinations_with_replacement(range(k), n)
        ]
        return choices, EXACT
    rng = np.random.default_rng([int(seed), 7919])
    seen = set(singles)
    choices = list(singles)
    target = len(singles) + max(samples - len(singles), samples // 2)
    attempts = 0
    while len(choices) < target and attempts < 50 * samples and n_max > 1:
        attempts += 1
        n = int(rng.integers(2, n_max + 1))
        c = tuple(sorted(int(i) for i in rng.integers(0, k, size=n)))
        if c not in seen:
            seen.add(c)
            choices.append(c)
    return choices, MONTE_CARLO


def _ascend(Ts, x, val, p, X, Y, steps, rng):
    step = 0.3
    for _ in range(steps):
        D = rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape)
        D *= step * np.linalg.norm(x) / np.linalg.norm(D)
        cand = x + D
        try:
            v = rademacher_functional(Ts, cand, p, X, Y)
        except ValueError:
            continue
        if v > val:
            x, val = cand, v
            step = min(1.0, step * 1.5)
        else:
            step *= 0.6
    return x, val


def rbound_estimate(T, X=None, Y=None, p: float = 2.0, budget: Budget | None = None) -> RBoundEstimate:
    """Estimate the R-bound of a finite family.

    Returns the Hilbert oracle when both spaces are Euclidean, ``p = 2`` and
    the budget mode allows it; otherwise a lower bound from the search.
    """
    budget = budget or Budget()
    members = _as_family(T)
    X = _default_space(X, members[0].shape[1])
    Y = _default_space(Y, members[0].shape[0])
    hilbert = X.is_hilbert and Y.is_hilbert and p == 2.0
    if budget.mode == "oracle" and not hilbert:
        raise ValueError("the Hilbert oracle needs Euclidean spaces and p = 2")
    if hilbert and budget.mode != "sample":
        norms = np.linalg.svd(np.stack(members), compute_uv=False)[:, 0]
        j = int(np.argmax(norms))
        return RBoundEstimate(float(norms[j]), ORACLE, p, 1, len(members), budget.seed, (j,), len(members))

    if not any(np.any(t) for t in members):
        return RBoundEstimate(0.0, EXACT, p, 1, len(members), budget.seed, (0,), len(members))

    choices, method = _enumerate_choices(len(members), budget.n_max, budget.samples, budget.seed)
    tops = [_top_right_vector(t) for t in members]
    scored = []
    for choice in choices:
        rng = _choice_rng(budget.seed, choice)
        Ts = [members[j] for j in choice]
        n, dim = len(choice), members[0].shape[1]
        w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        starts = [np.stack([w[i] * tops[j] for i, j in enumerate(choice)])]
        for _ in range(budget.starts):
            starts.append(rng.standard_normal((n, dim)) + 1j * rng.standard_normal((n, dim)))
        best_x, best_v = None, -1.0
        for x in starts:
            try:
                v = rademacher_functional(Ts, x, p, X, Y)
            except ValueError:
                continue
            if v > best_v:
                best_x, best_v = x, v
        scored.append((best_v, choice, best_x, rng))

    scored.sort(key=lambda s: (-s[0], s[1]))
    best_v, best_choice = scored[0][0], scored[0][1]
    for v, choice, x, rng in scored[: budget.ascent_top]:
        if x is None:
            continue
        _, v2 = _ascend([members[j] for j in choice], x, v, p, X, Y, budget.ascent_steps, rng)
        if v2 > best_v:
            best_v, best_choice = v2, choice
    return RBoundEstimate(float(best_v), method, p, budget.n_max, len(choices), budget.seed,
                          tuple(best_choice), len(members))


def rbound_of_range(f, gamma, X=None, Y=None, p: float = 2.0, budget: Budget | None = None) -> RBoundEstimate:
    """R-bound estimate of ``{f(g) : g in gamma}``; ``f`` is a callable or precomputed values."""
    gamma = list(gamma)
    if not gamma:
        raise ValueError("empty parameter sample")
    values = [f(g) for g in gamma] if callable(f) else gamma
    return rbound_estimate(values, X, Y, p, budget)


@dataclass
class KahaneReport:
    p: float
    q: float
    trials: int
    min_ratio: float
    max_ratio: float


def kahane_equivalence_check(p: float, q: float, trials: int, X=None, n_max: int = 6, seed: int = 0) -> KahaneReport:
    """Ratios of normalized ``p``- and ``q``-Rademacher means over random tuples."""
    if not (1.0 <= p < math.inf and 1.0 <= q < math.inf):
        raise ValueError("exponents must lie in [1, inf)")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    X = X or BanachSpaceSpec.euclidean(2)
    rng = np.random.default_rng(seed)
    ratios = np.empty(trials)
    for t in range(trials):
        n = int(rng.integers(1, n_max + 1))
        x = rng.standard_normal((n, X.total_dim)) + 1j * rng.standard_normal((n, X.total_dim))
        # heavy-tailed scales make the extremal configurations reachable
        x *= np.exp(rng.normal(0, 1.5, (n, 1)))
        ratios[t] = rademacher_mean(x, X, p) / rademacher_mean(x, X, q)
    return KahaneReport(p, q, trials, float(ratios.min()), float(ratios.max()))


@dataclass
class ContractionResult:
    ratio: float
    passed: bool


def contraction_check(alpha, beta, x, p: float = 2.0, X=None) -> ContractionResult:
    """Check ``mean_p(alpha x) <= 2 mean_p(beta x)`` for ``|alpha_j| <= |beta_j|``."""
    alpha = np.asarray(alpha, dtype=complex)
    beta = np.asarray(beta, dtype=complex)
    x = np.atleast_2d(np.asarray(x, dtype=complex))
    if alpha.shape != beta.shape or alpha.shape[0] != x.shape[0]:
        raise ValueError("coefficient and vector tuples differ in length")
    if np.any(np.abs(alpha) > np.abs(beta) * (1 + 1e-15)):
        raise ValueError("contraction principle needs |alpha_j| <= |beta_j|")
    X = _default_space(X, x.shape[1])
    num = sign_sum(alpha[:, None] * x, X, p)
    den = sign_sum(beta[:, None] * x, X, p)
    if den == 0.0:
        ratio = 0.0 if num == 0.0 else math.inf
    else:
        ratio = (num / den) ** (1.0 / p)
    return ContractionResult(float(ratio), bool(ratio <= 2.0))


MAX_ALPHA_N = 8


def double_sign_sum(z, space: BanachSpaceSpec, p: float) -> float:
    """``sum_{eps, eps'} ||sum_{j,k} eps_j eps'_k z_jk||^p`` for ``z`` of shape ``(N, N, dim)``."""
    z = np.asarray(z, dtype=complex)
    N = z.shape[0]
    total = 0.0
    # eps' and -eps' give the same inner sum up to sign
    for bits in range(1 << (N - 1)):
        eps2 = np.array([1.0] + [1.0 - 2.0 * ((bits >> k) & 1) for k in range(N - 1)])
        y = np.einsum("k,jkd->jd", eps2, z)
        total += sign_sum(y, space, p)
    return 2.0 * total


def property_alpha_check(X: BanachSpaceSpec, N_max: int, trials: int, p: float = 2.0, seed: int = 0) -> float:
    """Largest observed double-Rademacher ratio with random signs ``alpha_jk``."""
    if N_max > MAX_ALPHA_N:
        raise ValueError(f"N_max = {N_max} too large: enumeration costs 4^N")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(1, N_max + 1))
        x = rng.standard_normal((n, n, X.total_dim)) + 1j * rng.standard_normal((n, n, X.total_dim))
        a = rng.choice([-1.0, 1.0], size=(n, n))
        num = double_sign_sum(a[:, :, None] * x, X, p)
        den = double_sign_sum(x, X, p)
        worst = max(worst, (num / den) ** (1.0 / p))
    return float(worst)


@dataclass
class AlgebraReport:
    r_T: float
    r_S: float
    r_sum: float
    r_prod: float
    sum_ok: bool
    prod_ok: bool
    certified: bool


def rbound_algebra_check(T, S, X=None, Y=None, Z=None, p: float = 2.0,
                         budget: Budget | None = None, tol: float = 0.05) -> AlgebraReport:
    """Subadditivity over pairwise sums and submultiplicativity over products.

    ``S`` maps ``X -> Y``; ``T`` maps ``Y -> Z`` for products. Sums need
    equal shapes and are formed only when they exist (then ``T: X -> Y``).
    In Hilbert geometry both sides are exact and ``tol`` drops to roundoff.
    """
    T = _as_family(T)
    S = _as_family(S)
    budget = budget or Budget()
    same = T[0].shape == S[0].shape
    composable = T[0].shape[1] == S[0].shape[0]
    if not (same or composable):
        raise ValueError("families are neither addable nor composable")
    X = _default_space(X, S[0].shape[1])
    Y = _default_space(Y, S[0].shape[0])
    Z = _default_space(Z, T[0].shape[0])
    certified = X.is_hilbert and Y.is_hilbert and Z.is_hilbert and p == 2.0
    eps = 1e-12 if certified else tol
    rS = rbound_estimate(S, X, Y, p, budget).value
    rT_sum = rbound_estimate(T, X, Y, p, budget).value if same else math.nan
    rT_prod = rbound_estimate(T, Y, Z, p, budget).value if composable else math.nan
    r_sum = r_prod = math.nan
    sum_ok = prod_ok = True
    if same:
        r_sum = rbound_estimate([t + s for t in T for s in S], X, Y, p, budget).value
        sum_ok = r_sum <= (rT_sum + rS) * (1 + eps) + eps
    if composable:
        r_prod = rbound_estimate([t @ s for t in T for s in S], X, Z, p, budget).value
        prod_ok = r_prod <= rT_prod * rS * (1 + eps) + eps
    r_T = rT_sum if same else rT_prod
    return AlgebraReport(r_T, rS, r_sum, r_prod, bool(sum_ok), bool(prod_ok), certified)


def absolute_convex_hull_check(T, combos: int = 16, X=None, Y=None, p=2.0, budget=None, seed=0):
    """R-bound of finite absolutely convex combinations against ``2 R(T)``.

    Returns ``(r_hull, r_T)``.
    """
    members = _as_family(T)
    rng = np.random.default_rng(seed)
    hull = []
    for _ in range(combos):
        c = rng.standard_normal(len(members)) + 1j * rng.standard_normal(len(members))
        c /= np.sum(np.abs(c))
        hull.append(sum(ci * t for ci, t in zip(c, members)))
    r_hull = rbound_estimate(hull, X, Y, p, budget).value
    r_T = rbound_estimate(members, X, Y, p, budget).value
    return r_hull, r_T
