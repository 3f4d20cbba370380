"""Solution-distribution moment matrices, spectral richness, sign rounding.

The degree-2d moment matrix of a solution distribution is E[m(s) m(s)^T]
where m collects the monomials of degree <= d (including the constant).
Monomial exponents are reduced by the distribution's ideal relations before
the basis is formed: s_i^2 = 1 on the hypercube and s_i^2 = s_i on the 0/1
slice kill higher powers, while the signed slice (s_i in {0,+-1}) only
enforces s_i^3 = s_i, leaving exponents 1 and 2.

Hypercube and slice matrices are exact enumerations; sphere moments use the
closed form E[prod x_i^(2a_i)] = prod (2a_i - 1)!! / prod_{j<A} (n + 2j) with
A the total half-degree (odd exponents vanish).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import GuardExceeded
from .models import Instance

MONOMIAL_GUARD = 5000
ENUM_GUARD = 1 << 22

_KINDS = ("hypercube", "sphere", "boolean-slice", "signed-slice")


@dataclass(frozen=True)
class SolutionDistribution:
    """Uniform distribution over a feasible set, with a target degree d."""

    kind: str
    n: int
    d: int
    k: int = 0  # slice weight

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.kind.endswith("slice"):
            if not 0 < self.k <= self.n:
                raise ValueError("slice weight k must lie in (0, n]")
            if 2 * self.d > self.k:
                raise ValueError("slice moment matrices need 2d <= k")
        if self.d < 0 or self.n < 1:
            raise ValueError("need d >= 0, n >= 1")


def monomial_basis(dist: SolutionDistribution) -> list[tuple[tuple[int, int], ...]]:
    """Exponent dictionaries ((variable, exponent), ...) of total degree <= d,
    reduced by the ideal relations of the kind."""
    if dist.kind in ("hypercube", "boolean-slice"):
        max_exp = 1
    elif dist.kind == "signed-slice":
        max_exp = 2
    else:
        max_exp = dist.d
    out: list[tuple[tuple[int, int], ...]] = []
    def extend(start: int, left: int, acc: list[tuple[int, int]]):
        out.append(tuple(acc))
        if left == 0:
            return
        for v in range(start, dist.n):
            for e in range(1, min(max_exp, left) + 1):
                acc.append((v, e))
                extend(v + 1, left - e, acc)
                acc.pop()
    extend(0, dist.d, [])
    if len(out) > MONOMIAL_GUARD:
        raise GuardExceeded(f"{len(out)} monomials exceed the guard")
    return out


def _solutions(dist: SolutionDistribution) -> np.ndarray:
    n, k = dist.n, dist.k
    if dist.kind == "hypercube":
        if (1 << n) > ENUM_GUARD:
            raise GuardExceeded("hypercube enumeration too large")
        idx = np.arange(1 << n)
        return np.array([np.where((idx >> i) & 1, 1.0, -1.0) for i in range(n)]).T
    if dist.kind == "boolean-slice":
        rows = []
        for sup in itertools.combinations(range(n), k):
            x = np.zeros(n)
            x[list(sup)] = 1.0
            rows.append(x)
        return np.array(rows)
    if dist.kind == "signed-slice":
        rows = []
        for sup in itertools.combinations(range(n), k):
            for signs in itertools.product((-1.0, 1.0), repeat=k):
                x = np.zeros(n)
                x[list(sup)] = signs
                rows.append(x)
        if len(rows) > ENUM_GUARD:
            raise GuardExceeded("signed-slice enumeration too large")
        return np.array(rows)
    raise ValueError("sphere moments are analytic; no enumeration")


def _sphere_moment(n: int, expo: dict[int, int]) -> float:
    if any(e % 2 for e in expo.values()):
        return 0.0
    half_total = sum(e // 2 for e in expo.values())
    num = 1.0
    for e in expo.values():
        num *= math.prod(range(e - 1, 0, -2)) if e else 1.0  # (e-1)!!
    den = math.prod(n + 2 * j for j in range(half_total))
    return num / den if den else 1.0


def solution_moment_matrix(dist: SolutionDistribution) -> np.ndarray:
    """E[m(s) m(s)^T] over the monomial basis of degree <= d."""
    basis = monomial_basis(dist)
    if dist.kind == "sphere":
        size = len(basis)
        X = np.empty((size, size))
        for i, a in enumerate(basis):
            for j in range(i, size):
                expo: dict[int, int] = {}
                for v, e in a:
                    expo[v] = expo.get(v, 0) + e
                for v, e in basis[j]:
                    expo[v] = expo.get(v, 0) + e
                X[i, j] = X[j, i] = _sphere_moment(dist.n, expo)
        return X
    sols = _solutions(dist)
    cols = np.empty((sols.shape[0], len(basis)))
    for j, mono in enumerate(basis):
        col = np.ones(sols.shape[0])
        for v, e in mono:
            col = col * sols[:, v] ** e
        cols[:, j] = col
    return cols.T @ cols / sols.shape[0]


def min_nonzero_eigenvalue(X: np.ndarray, rank_tol: float = 1e-12
                           ) -> tuple[float, int]:
    """(smallest eigenvalue above rank_tol * lambda_max, kernel dimension)."""
    X = np.asarray(X, dtype=np.float64)
    if not X.any():
        raise ValueError("zero matrix has no nonzero eigenvalues")
    eigs = np.linalg.eigvalsh(0.5 * (X + X.T))
    lam_max = float(np.abs(eigs).max())
    keep = eigs > rank_tol * lam_max
    kernel_dim = int((~keep).sum())
    if not keep.any():
        raise ValueError("all eigenvalues fall below the rank tolerance")
    return float(eigs[keep].min()), kernel_dim


@dataclass
class RichnessFit:
    """Log-log fit of the minimum nonzero eigenvalue against n."""

    kind: str
    d: int
    n_grid: tuple[int, ...]
    lambda_mins: tuple[float, ...]
    kernel_dims: tuple[int, ...]
    exponent: float   # fitted c in lambda_min ~ n^(-c*d)
    r_squared: float
    residuals: tuple[float, ...]


def spectral_richness_fit(kind: str, d: int, n_grid, k_rule=None) -> RichnessFit:
    """Fit lambda_min >= n^(-c d) by log-log regression over the n grid."""
    n_grid = tuple(int(n) for n in n_grid)
    if len(n_grid) < 3:
        raise ValueError("need at least 3 grid points")
    lams = []
    kdims = []
    for n in n_grid:
        k = int(k_rule(n)) if k_rule else 0
        dist = SolutionDistribution(kind, n, d, k)
        lam, kdim = min_nonzero_eigenvalue(solution_moment_matrix(dist))
        lams.append(lam)
        kdims.append(kdim)
    xs = np.log(np.asarray(n_grid, dtype=float))
    ys = np.log(np.asarray(lams))
    if np.allclose(ys, ys[0], atol=1e-13):
        # constant eigenvalue: slope zero, perfect fit by convention
        return RichnessFit(kind, d, n_grid, tuple(lams), tuple(kdims), 0.0, 1.0,
                           tuple(0.0 for _ in n_grid))
    slope, intercept = np.polyfit(xs, ys, 1)
    pred = slope * xs + intercept
    ss_res = float(np.sum((ys - pred) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RichnessFit(kind, d, n_grid, tuple(lams), tuple(kdims),
                       float(-slope / d) if d else 0.0, r2,
                       tuple(float(r) for r in (ys - pred)))


def sign_round(inst: Instance) -> Instance:
    """Entrywise sign, with zeros resolved to +1."""
    return Instance(np.where(inst.coords >= 0.0, 1.0, -1.0), inst.scheme)
