"""Exact primal/dual laboratory on fully enumerable instance spaces.

Everything here works with dense matrix-valued functions: an array of shape
(2^N, m, m) holding one symmetric matrix per instance of a uniform +-1
space.  All expectations are full enumerations; there is no Monte Carlo
error in this module.

The two programs:

- Pseudodistribution program: minimize the nu-Frobenius norm of a pointwise
  PSD matrix function P whose per-entry Fourier coefficients up to degree D
  match those of the target Lambda.  Solved by Dykstra alternating
  projections between the moment-matching affine set and the pointwise PSD
  cone (corrections are only needed on the cone side since the other set is
  affine); started from zero it converges to the minimum-norm feasible
  point.
- Low-degree distinguisher: maximize <Lambda, Q>_nu over degree-<=D matrix
  polynomials with ||Q_+||_{Fr,nu} <= 1.  The scale-invariant reformulation
  max <Lambda,Q> - ||Q_+||^2/4 is smooth and concave, so plain gradient
  ascent in coefficient space converges; rescaling the optimizer to unit
  positive-part norm yields the feasible maximizer, and the two optima obey
  value = sqrt(max of the reformulation) exactly.

The construction of Lambda follows the subsample-and-complete recipe: for
each subset S in the support of Theta, the S-entry is the conditional mean
of the relative density given the kept coordinates times the outer product
of the monomial vector of the sub-instance witness.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConvergenceError, GuardExceeded
from .ldlr import density_table
from .models import Instance, PlantedModel, make_scheme
from .pseudocal import TupleIndex
from .fourier import pm1_rows

SPACE_GUARD = 16  # max N for full enumeration here


# ---------------------------------------------------------------------------
# Enumerated spaces and matrix-valued functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnumeratedSpace:
    """A uniform +-1 instance space small enough to enumerate."""

    model: PlantedModel
    rows: np.ndarray      # (2^N, N) of +-1
    mu_hat: np.ndarray    # (2^N,) relative density

    @staticmethod
    def build(model: PlantedModel) -> "EnumeratedSpace":
        N = model.scheme().size
        if N > SPACE_GUARD:
            raise GuardExceeded(f"N={N} too large for the duality laboratory")
        if not model.uniform_is_pm1():
            raise GuardExceeded("duality laboratory needs a uniform +-1 space")
        rows = pm1_rows(N)
        mu = np.asarray(density_table(model, dtype=np.float64))
        return EnumeratedSpace(model, rows, mu)

    @property
    def N(self) -> int:
        return self.rows.shape[1]

    @property
    def size(self) -> int:
        return self.rows.shape[0]


def nu_inner(F: np.ndarray, G: np.ndarray) -> float:
    """<F,G>_nu = average over instances of the matrix inner products."""
    return float(np.mean(np.sum(F * G, axis=(1, 2))))


def nu_norm(F: np.ndarray) -> float:
    return math.sqrt(max(nu_inner(F, F), 0.0))


def _walsh_axis0(table: np.ndarray, forward: bool) -> np.ndarray:
    """Walsh butterfly along axis 0 of a (2^N, ...) array."""
    out = np.array(table, dtype=np.float64, copy=True)
    size = out.shape[0]
    trail = out.shape[1:]
    width = 1
    while width < size:
        view = out.reshape(-1, 2, width, *trail)
        lo = view[:, 0].copy()
        hi = view[:, 1].copy()
        if forward:
            view[:, 0] = (hi + lo) * 0.5
            view[:, 1] = (hi - lo) * 0.5
        else:
            view[:, 0] = lo - hi
            view[:, 1] = lo + hi
        width *= 2
    return out


def _degree_mask(N: int, D: int) -> np.ndarray:
    idx = np.arange(1 << N)
    pc = np.zeros(1 << N, dtype=np.int64)
    for j in range(N):
        pc += (idx >> j) & 1
    return pc <= D


def truncate_degree(F: np.ndarray, D: int, strict: bool = False) -> np.ndarray:
    """Entrywise projection onto instance-degree <= D (or < D)."""
    N = int(round(math.log2(F.shape[0])))
    coeffs = _walsh_axis0(F, forward=True)
    keep = _degree_mask(N, D - 1 if strict else D)
    coeffs[~keep] = 0.0
    return _walsh_axis0(coeffs, forward=False)


def psd_part(F: np.ndarray) -> np.ndarray:
    """Pointwise projection onto the PSD cone."""
    sym = 0.5 * (F + np.transpose(F, (0, 2, 1)))
    vals, vecs = np.linalg.eigh(sym)
    clipped = np.clip(vals, 0.0, None)
    return np.einsum("iab,ib,icb->iac", vecs, clipped, vecs)


def condition_on_subset(F: np.ndarray, cols: tuple[int, ...], N: int) -> np.ndarray:
    """Average out every coordinate outside ``cols`` (conditional mean)."""
    groups = _subset_groups(cols, N)
    sums = np.zeros((groups.max() + 1 if groups.size else 1,) + F.shape[1:])
    np.add.at(sums, groups, F)
    counts = np.bincount(groups).astype(float)
    means = sums / counts.reshape((-1,) + (1,) * (F.ndim - 1))
    return means[groups]


def _subset_groups(cols: tuple[int, ...], N: int) -> np.ndarray:
    idx = np.arange(1 << N, dtype=np.int64)
    g = np.zeros(1 << N, dtype=np.int64)
    for j, c in enumerate(cols):
        g |= ((idx >> c) & 1) << j
    return g


# ---------------------------------------------------------------------------
# Lambda from robust-inference solution maps
# ---------------------------------------------------------------------------

@dataclass
class LambdaFamily:
    """Lambda = sum_S w_S Lambda_S over an enumerated Theta."""

    space: EnumeratedSpace
    index: TupleIndex
    total: np.ndarray                       # (2^N, m, m)
    parts: list[tuple[float, tuple[int, ...], np.ndarray]]  # (w, cols, Lambda_S)


def monomial_vector(index: TupleIndex, x: np.ndarray) -> np.ndarray:
    out = np.empty(index.size)
    for i, tup in enumerate(index.tuples):
        val = 1.0
        for v in tup:
            val *= x[v]
        out[i] = val
    return out


def max_clique_witness(model: PlantedModel, vertex_mask: int,
                       cols: tuple[int, ...], values: np.ndarray) -> np.ndarray:
    """Brute-force maximum clique of the kept subgraph, lexicographic
    tie-breaking; returns a 0/1 indicator over all n vertices."""
    layout = model.scheme()
    n = model.n
    verts = [v for v in range(n) if (vertex_mask >> v) & 1]
    colset = dict(zip(cols, values))
    best: tuple[int, ...] = ()
    for size in range(len(verts), 0, -1):
        if best:
            break
        for sub in itertools.combinations(verts, size):
            ok = True
            for i, j in itertools.combinations(sub, 2):
                cidx = layout.index_of((i, j))
                if colset.get(cidx, -1.0) != 1.0:
                    ok = False
                    break
            if ok:
                best = sub
                break
    x = np.zeros(n)
    x[list(best)] = 1.0
    return x


def build_lambda_exact(model: PlantedModel,
                       theta: list[tuple[float, tuple[int, ...], int]],
                       solver: Callable[[PlantedModel, int, tuple[int, ...], np.ndarray], np.ndarray],
                       d: int) -> LambdaFamily:
    """Exact Lambda over an enumerated Theta and a total sub-instance solver.

    ``solver(model, vertex_mask, cols, values)`` must return the witness
    vector inferred from the sub-instance only.
    """
    space = EnumeratedSpace.build(model)
    index = TupleIndex.build(model.n, d)
    m = index.size
    total = np.zeros((space.size, m, m))
    parts = []
    for w, cols, vmask in theta:
        groups = _subset_groups(cols, space.N)
        ngroups = int(groups.max()) + 1 if groups.size else 1
        sums = np.zeros(ngroups)
        np.add.at(sums, groups, space.mu_hat)
        counts = np.bincount(groups, minlength=ngroups).astype(float)
        cond = sums / counts
        lam_s = np.zeros((space.size, m, m))
        # one witness per sub-instance pattern
        outer_by_group: dict[int, np.ndarray] = {}
        for g in range(ngroups):
            values = np.array([1.0 if (g >> j) & 1 else -1.0
                               for j in range(len(cols))])
            x = solver(model, vmask, cols, values)
            vec = monomial_vector(index, x)
            outer_by_group[g] = cond[g] * np.outer(vec, vec)
        for i in range(space.size):
            lam_s[i] = outer_by_group[int(groups[i])]
        total += w * lam_s
        parts.append((w, cols, lam_s))
    return LambdaFamily(space, index, total, parts)


# ---------------------------------------------------------------------------
# Pseudodistribution program (Dykstra)
# ---------------------------------------------------------------------------

@dataclass
class SolveTrace:
    iterations: int
    moment_residuals: list[float] = field(default_factory=list)
    psd_residuals: list[float] = field(default_factory=list)

    def rows(self) -> list[tuple[int, float, float]]:
        return [(i, m, p) for i, (m, p) in
                enumerate(zip(self.moment_residuals, self.psd_residuals))]


def solve_pseudodistribution_program(lam: np.ndarray, D: int, tol: float = 1e-8,
                                     max_iter: int = 100_000
                                     ) -> tuple[np.ndarray, float, SolveTrace]:
    """Minimum-nu-norm pointwise-PSD P matching Lambda's degree-<=D moments.

    Dykstra alternating projections from zero; the eta perturbation of the
    target is set to zero (it only exists to force strong duality and its
    error terms are negligible here).
    """
    target_low = truncate_degree(lam, D)
    scale = max(nu_norm(target_low), 1e-30)
    x = np.zeros_like(lam)
    q = np.zeros_like(lam)
    trace = SolveTrace(0)
    for it in range(max_iter):
        y = x - truncate_degree(x, D) + target_low   # affine projection
        z = y + q
        x = psd_part(z)
        q = z - x
        moment_res = nu_norm(truncate_degree(x, D) - target_low) / scale
        sym = 0.5 * (y + np.transpose(y, (0, 2, 1)))
        min_eig = float(np.linalg.eigvalsh(sym)[:, 0].min())
        psd_res = max(0.0, -min_eig) / scale
        trace.moment_residuals.append(moment_res)
        trace.psd_residuals.append(psd_res)
        trace.iterations = it + 1
        if moment_res <= tol and psd_res <= tol:
            opt = nu_inner(x, x)
            return x, float(opt), trace
    raise ConvergenceError(
        f"Dykstra did not reach tol={tol} in {max_iter} iterations",
        {"moment_residual": trace.moment_residuals[-1],
         "psd_residual": trace.psd_residuals[-1]})


# ---------------------------------------------------------------------------
# Low-degree distinguisher (projected gradient on the smooth reformulation)
# ---------------------------------------------------------------------------

def _estimate_lipschitz(lam_low: np.ndarray, D: int, Q: np.ndarray,
                        rng: np.random.Generator, iters: int = 8) -> float:
    """Power iteration on the gradient map's local quadratic form."""
    delta = 1e-6 * max(nu_norm(Q), 1.0)
    base = truncate_degree(psd_part(Q), D)
    v = rng.standard_normal(Q.shape)
    v = truncate_degree(v, D)
    v /= max(nu_norm(v), 1e-30)
    L = 0.5
    for _ in range(iters):
        probe = truncate_degree(psd_part(Q + delta * v), D)
        w = (probe - base) / delta
        L = max(nu_norm(w), 1e-12)
        v = truncate_degree(w, D)
        nv = nu_norm(v)
        if nv < 1e-14:
            break
        v /= nv
    return 0.5 * max(L, 1e-12)


def solve_low_degree_distinguisher(lam: np.ndarray, D: int, tol: float = 1e-9,
                                   max_iter: int = 20_000,
                                   rng: np.random.Generator | None = None,
                                   start: np.ndarray | None = None
                                   ) -> tuple[np.ndarray, float, dict]:
    """Best degree-<=D matrix polynomial with unit positive-part norm.

    Returns (Q, value, diagnostics); the value is <Lambda, Q>_nu and is a
    valid lower bound on the program optimum at any accuracy.
    """
    rng = rng or np.random.default_rng(0)
    lam_low = truncate_degree(lam, D)
    lam_scale = max(nu_norm(lam_low), 0.0)
    if lam_scale == 0.0:
        return np.zeros_like(lam), 0.0, {"kkt_residual": 0.0, "iterations": 0,
                                         "unconstrained_opt": 0.0}
    Q = truncate_degree(start, D) if start is not None else np.zeros_like(lam)
    L = _estimate_lipschitz(lam_low, D, Q + 1e-3 * lam_low, rng)
    step = 1.0 / max(L, 0.25)
    kkt = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        grad = lam_low - 0.5 * truncate_degree(psd_part(Q), D)
        kkt = nu_norm(grad)
        if kkt <= tol * (1.0 + lam_scale):
            break
        Q = Q + step * grad
    s = nu_norm(psd_part(Q))
    if s < 1e-30:
        return np.zeros_like(lam), 0.0, {"kkt_residual": kkt, "iterations": it,
                                         "unconstrained_opt": 0.0}
    Qfeas = Q / s
    value = nu_inner(lam, Qfeas)
    g_val = nu_inner(lam_low, Q) - 0.25 * nu_inner(psd_part(Q), psd_part(Q))
    diag = {"kkt_residual": kkt, "iterations": it, "unconstrained_opt": g_val,
            "psd_norm": nu_norm(psd_part(Qfeas))}
    if it >= max_iter and kkt > 100 * tol * (1.0 + lam_scale):
        raise ConvergenceError("distinguisher ascent did not converge",
                               {"kkt_residual": kkt})
    return Qfeas, float(value), diag


# ---------------------------------------------------------------------------
# Reports, duality verdicts, random restriction
# ---------------------------------------------------------------------------

@dataclass
class DualityReport:
    primal_opt: float
    dual_value: float
    dual_psd_norm: float
    ratio: float
    primal_iterations: int
    dual_iterations: int
    residuals: dict

    def __post_init__(self):
        if self.dual_psd_norm > 1.0 + 1e-6:
            raise ValueError("dual witness violates the unit positive-part norm")

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, default=float)


def verify_duality(primal_opt: float, report: DualityReport,
                   ratio_floor: float = 0.5) -> str:
    """'pass'/'fail' for dual >= ratio_floor * sqrt(primal); 'vacuous' when
    the primal optimum is at most 1."""
    if primal_opt <= 1.0:
        return "vacuous"
    return "pass" if report.dual_value >= ratio_floor * math.sqrt(primal_opt) \
        else "fail"


def run_duality_lab(model: PlantedModel, theta, solver, d: int, D: int,
                    tol: float = 1e-8, rng: np.random.Generator | None = None
                    ) -> tuple[DualityReport, LambdaFamily, SolveTrace]:
    """Build Lambda, solve both programs, and assemble the report."""
    fam = build_lambda_exact(model, theta, solver, d)
    P, primal_opt, trace = solve_pseudodistribution_program(fam.total, D, tol=tol)
    Q, dual_value, diag = solve_low_degree_distinguisher(fam.total, D, rng=rng)
    psd_norm = diag.get("psd_norm", 0.0)
    ratio = dual_value / math.sqrt(primal_opt) if primal_opt > 0 else 0.0
    rep = DualityReport(primal_opt, dual_value, psd_norm, ratio,
                        trace.iterations, diag["iterations"],
                        {"moment_residual": trace.moment_residuals[-1],
                         "psd_residual": trace.psd_residuals[-1],
                         "kkt_residual": diag["kkt_residual"]})
    return rep, fam, trace


def random_restriction_check(parts: list[tuple[float, tuple[int, ...], np.ndarray]],
                             R: np.ndarray, D: int, rho: float) -> dict:
    """Evaluate both sides of the random-restriction inequality exactly.

    parts is the enumerated family {(w_S, cols_S, P_S)} with each P_S a
    function of the kept coordinates only; rho is max over supports of size
    >= D of their survival probability.
    """
    N = int(round(math.log2(R.shape[0])))
    lhs = 0.0
    low = 0.0
    p_norm_sq = 0.0
    for w, cols, P_S in parts:
        lhs += w * nu_inner(P_S, R)
        R_S = condition_on_subset(R, cols, N)
        R_S_low = truncate_degree(R_S, D, strict=True)
        low += w * nu_inner(P_S, R_S_low)
        p_norm_sq += w * nu_inner(P_S, P_S)
    tail = math.sqrt(max(rho, 0.0)) * math.sqrt(max(p_norm_sq, 0.0)) * nu_norm(R)
    rhs = low - tail
    return {"lhs": lhs, "low_term": low, "tail_term": tail, "rhs": rhs,
            "slack": lhs - rhs, "rho": rho}
