"""Low-degree likelihood-ratio computations.

The central quantity is the squared nu-norm of the degree-<=d truncation of
the relative density minus one; it equals the squared advantage of the best
degree-d scalar distinguisher between the planted and uniform distributions.

Three methods compute it:

- "analytic": closed-form coefficients.  A support W (a set of hyperedges)
  has nonzero coefficient only when every vertex has even degree; the tensor
  PCA coefficient is (lambda n^(-k/2))^|W| * (n^(-eps))^|V(W)| and the sparse
  PCA coefficient is (lambda/k)^|W| * Pr[V(W) in supp(v)] * (n^(-gamma))^|V(W)|.
  Norms then need only the cached even-hypergraph counts.
- "exact-enum": dense enumeration of the instance space in extended
  precision (value tables go through the Walsh butterfly in longdouble so
  the 1e-10 agreement targets are honest).
- "mc": sample the planted distribution and average orthonormal characters;
  the squared norm uses two independent halves so the estimate is unbiased.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GuardExceeded, IntractableModel, ZeroDistinguisher
from .fourier import (FourierPoly, pm1_rows, standardized_character_rows,
                      walsh_coefficients)
from .hypergraphs import T_CAP, count_even_spanning
from .models import (ENUMERATION_GUARD, PlantedModel, _all_spike_products,
                     _coords_inside, _vertex_subset_weights, members_matrix,
                     sample_planted)

ANALYTIC_SUPPORT_GUARD = 200_000  # max explicit supports for polynomial output


# ---------------------------------------------------------------------------
# Parity helpers on hyperedge collections
# ---------------------------------------------------------------------------

def vertex_degrees(edges) -> dict[int, int]:
    deg: dict[int, int] = {}
    for e in edges:
        for v in e:
            deg[v] = deg.get(v, 0) + 1
    return deg


def is_even_hypergraph(edges) -> bool:
    return all(d % 2 == 0 for d in vertex_degrees(edges).values())


def vertex_support(edges) -> frozenset[int]:
    return frozenset(vertex_degrees(edges))


def _falling(a: int, m: int) -> float:
    out = 1.0
    for j in range(m):
        out *= a - j
    return out


# ---------------------------------------------------------------------------
# Analytic coefficients
# ---------------------------------------------------------------------------

def tpca_coeff(W, model: PlantedModel) -> float:
    """Fourier coefficient of the tensor PCA relative density at support W.

    W is a collection of k-subsets of [n].  Nonzero only when W is an even
    hypergraph.
    """
    edges = [tuple(sorted(e)) for e in W]
    if model.problem != "tpca":
        raise ValueError("tpca_coeff needs a tpca model")
    if len(set(edges)) != len(edges):
        raise ValueError("repeated hyperedges are reduced away on the cube")
    if not edges:
        return 1.0
    if not is_even_hypergraph(edges):
        return 0.0
    q = model.rerandomize_keep_prob()
    p = model.vertex_survival_prob()
    return q ** len(edges) * p ** len(vertex_support(edges))


def spca_coeff(W, model: PlantedModel) -> float:
    """Coefficient of the sparse PCA relative density at an edge set W."""
    edges = [tuple(sorted(e)) for e in W]
    if model.problem != "spca":
        raise ValueError("spca_coeff needs an spca model")
    if len(set(edges)) != len(edges):
        raise ValueError("repeated edges are reduced away on the cube")
    if not edges:
        return 1.0
    if not is_even_hypergraph(edges):
        return 0.0
    verts = vertex_support(edges)
    u = len(verts)
    if u > model.k:
        return 0.0
    incl = _falling(model.k, u) / _falling(model.n, u)
    return (model.lam / model.k) ** len(edges) * incl \
        * model.vertex_survival_prob() ** u


# ---------------------------------------------------------------------------
# Reports and analytic norms
# ---------------------------------------------------------------------------

@dataclass
class LdlrReport:
    """Norm of the truncated relative density, with a per-size breakdown."""

    model: dict
    d: int
    norm_sq: float
    per_t: dict[int, float] = field(default_factory=dict)
    method: str = "analytic"
    stderr: float | None = None

    def __post_init__(self):
        if self.norm_sq < 0.0:
            raise ValueError("norm_sq must be nonnegative")
        # MC estimates clamp a possibly-negative sum at zero, so the breakdown
        # is only required to match up to its own statistical error
        slack = 1e-9 * max(1.0, abs(self.norm_sq)) + 4.0 * (self.stderr or 0.0)
        total = math.fsum(self.per_t.values())
        if self.per_t and not (total <= self.norm_sq + slack
                               and self.norm_sq <= max(total, 0.0) + slack):
            raise ValueError("per_t breakdown does not sum to norm_sq")

    def to_json(self) -> str:
        out = {"model": self.model, "d": self.d, "norm_sq": self.norm_sq,
               "per_t": {str(t): v for t, v in sorted(self.per_t.items())},
               "method": self.method}
        if self.stderr is not None:
            out["stderr"] = self.stderr
        return json.dumps(out, indent=2)


def tpca_norm_analytic(model: PlantedModel, d: int, t_cap: int = T_CAP) -> LdlrReport:
    """Closed-form norm for tensor PCA via cached even-hypergraph counts."""
    if model.problem != "tpca":
        raise ValueError("tpca model required")
    if t_cap > T_CAP:
        raise GuardExceeded(f"t_cap exceeds the enumeration cap {T_CAP}")
    q2 = model.rerandomize_keep_prob() ** 2
    p2 = model.vertex_survival_prob() ** 2
    per_t: dict[int, float] = {}
    for t in range(1, min(d, t_cap) + 1):
        if (model.k * t) % 2:
            per_t[t] = 0.0
            continue
        pieces = []
        for m in range(model.k, model.k * t // 2 + 1):
            if m > model.n:
                break
            c = count_even_spanning(model.k, t, m)
            if c:
                pieces.append(math.comb(model.n, m) * c * q2 ** t * p2 ** m)
        per_t[t] = math.fsum(pieces)
    norm = math.fsum(per_t.values())
    return LdlrReport(model.describe(), d, norm, per_t, "analytic")


def spca_norm_analytic(model: PlantedModel, d: int, t_cap: int = T_CAP) -> LdlrReport:
    """Closed-form norm for sparse PCA; even graphs are counted with the same
    enumerator at k = 2."""
    if model.problem != "spca":
        raise ValueError("spca model required")
    if t_cap > T_CAP:
        raise GuardExceeded(f"t_cap exceeds the enumeration cap {T_CAP}")
    r2 = (model.lam / model.k) ** 2
    p2 = model.vertex_survival_prob() ** 2
    per_t: dict[int, float] = {}
    for t in range(1, min(d, t_cap) + 1):
        pieces = []
        for u in range(2, min(t, model.k, model.n) + 1):
            c = count_even_spanning(2, t, u)
            if c:
                incl = _falling(model.k, u) / _falling(model.n, u)
                pieces.append(math.comb(model.n, u) * c * r2 ** t * incl * incl * p2 ** u)
        per_t[t] = math.fsum(pieces)
    norm = math.fsum(per_t.values())
    return LdlrReport(model.describe(), d, norm, per_t, "analytic")


# ---------------------------------------------------------------------------
# Exact-enumeration engine (dense density tables in extended precision)
# ---------------------------------------------------------------------------

def density_table(model: PlantedModel, dtype=np.longdouble) -> np.ndarray:
    """Relative density at every instance of an enumerable Boolean space.

    Index order matches models.enumerate_instances.  Requires a uniform +-1
    instance space (clique, Boolean tensor/sparse PCA).
    """
    if not model.uniform_is_pm1():
        raise IntractableModel("dense density tables need a uniform +-1 space")
    scheme = model.scheme()
    N = scheme.size
    if N > ENUMERATION_GUARD:
        raise GuardExceeded(f"2^{N} instances exceed the enumeration guard")
    if model.problem == "tpca":
        return _tpca_density_table(model, dtype)
    if model.problem == "spca":
        return _spca_density_table(model, dtype)
    return _clique_density_table(model, dtype)


def _expand_indices(N: int, cols: list[int]) -> np.ndarray:
    """Map each global instance index to its sub-index on the given coords."""
    idx = np.arange(1 << N, dtype=np.int64)
    out = np.zeros(1 << N, dtype=np.int64)
    for j, c in enumerate(cols):
        out |= ((idx >> c) & 1) << j
    return out


def _product_table(bias_rows: np.ndarray, weights: np.ndarray, ncols: int,
                   dtype) -> np.ndarray:
    """sum_r w_r * prod_j (1 + bias_rows[r, j] * a_j) over all a in {+-1}^ncols."""
    rows = pm1_rows(ncols, dtype=dtype)
    out = np.zeros(1 << ncols, dtype=dtype)
    for r in range(bias_rows.shape[0]):
        prod = np.ones(1 << ncols, dtype=dtype)
        for j in range(ncols):
            prod *= 1.0 + bias_rows[r, j] * rows[:, j]
        out += dtype(weights[r]) * prod
    return out


def _tpca_density_table(model: PlantedModel, dtype) -> np.ndarray:
    # Each factor (1 + q v^a A_a) equals (1+q) where A agrees with the spike
    # pattern and (1-q) where it disagrees, so the spike/subset average only
    # needs xor + popcount against precomputed exact power tables.
    scheme = model.scheme()
    N = scheme.size
    n = model.n
    q = dtype(model.lam) * dtype(n) ** (dtype(-model.k) / dtype(2))
    vchi = _all_spike_products(n, scheme)
    patterns = np.zeros(1 << n, dtype=np.uint64)
    for c in range(N):
        patterns |= (vchi[:, c] > 0).astype(np.uint64) << np.uint64(c)
    table = np.zeros(1 << N, dtype=dtype)
    subsets = [((1 << n) - 1, 1.0)] if model.eps_noise == 0.0 \
        else list(_vertex_subset_weights(n, model.vertex_survival_prob()))
    v_weight = dtype(1.0) / dtype(1 << n)
    for mask, w in subsets:
        cols = _coords_inside(scheme, mask)
        if not cols:
            table += dtype(w)
            continue
        ncols = len(cols)
        idx_small = np.arange(1 << ncols, dtype=np.uint64)
        pow_tab = _agreement_powers(q, ncols, dtype)
        small = np.zeros(1 << ncols, dtype=dtype)
        for pv in patterns:
            pv_small = np.uint64(sum(((int(pv) >> c) & 1) << j
                                     for j, c in enumerate(cols)))
            small += pow_tab[np.bitwise_count(idx_small ^ pv_small)]
        small *= dtype(w) * v_weight
        if ncols == N:
            table += small
        else:
            table += small[_expand_indices(N, cols)]
    return table


def _agreement_powers(q, ncols: int, dtype) -> np.ndarray:
    """pow_tab[j] = (1+q)^(ncols-j) * (1-q)^j, built by exact cumulative
    multiplication."""
    plus = np.empty(ncols + 1, dtype=dtype)
    minus = np.empty(ncols + 1, dtype=dtype)
    plus[0] = minus[0] = dtype(1.0)
    for j in range(1, ncols + 1):
        plus[j] = plus[j - 1] * (dtype(1.0) + q)
        minus[j] = minus[j - 1] * (dtype(1.0) - q)
    return plus[::-1].copy() * minus


def _spca_density_table(model: PlantedModel, dtype) -> np.ndarray:
    scheme = model.scheme()
    N = scheme.size
    n = model.n
    r = dtype(model.lam) / dtype(model.k)
    spikes = []
    for sup in itertools.combinations(range(n), model.k):
        for signs in itertools.product((-1, 1), repeat=model.k):
            v = np.zeros(n)
            v[list(sup)] = signs
            spikes.append(v)
    subsets = [((1 << n) - 1, 1.0)] if model.gamma == 0.0 \
        else list(_vertex_subset_weights(n, model.vertex_survival_prob()))
    mem = members_matrix(scheme)
    table = np.zeros(1 << N, dtype=dtype)
    w_spike = 1.0 / len(spikes)
    for mask, w in subsets:
        for v in spikes:
            keep = [c for c in range(N)
                    if v[mem[c, 0]] != 0 and v[mem[c, 1]] != 0
                    and (mask >> mem[c, 0]) & 1 and (mask >> mem[c, 1]) & 1]
            if not keep:
                table += dtype(w * w_spike)
                continue
            bias = np.array([[r * dtype(v[mem[c, 0]] * v[mem[c, 1]]) for c in keep]],
                            dtype=dtype)
            small = _product_table(bias, np.ones(1), len(keep), dtype)
            table += dtype(w * w_spike) * small[_expand_indices(N, keep)]
    return table


def _clique_density_table(model: PlantedModel, dtype) -> np.ndarray:
    scheme = model.scheme()
    N = scheme.size
    s = model.clique_size
    supports = list(itertools.combinations(range(model.n), s))
    table = np.zeros(1 << N, dtype=dtype)
    idx = np.arange(1 << N, dtype=np.int64)
    boost = dtype(2.0) ** math.comb(s, 2)
    for sup in supports:
        inside = set(sup)
        emask = 0
        for c, (i, j) in enumerate(scheme.members):
            if i in inside and j in inside:
                emask |= 1 << c
        table += boost * ((idx & emask) == emask).astype(dtype)
    return table / dtype(len(supports))


def norms_from_table(table: np.ndarray, d: int) -> dict[int, float]:
    """per-|W| squared-coefficient sums (1 <= |W| <= d) of a dense table."""
    coeffs = walsh_coefficients(table)
    N = int(round(math.log2(coeffs.shape[0])))
    pc = np.zeros(coeffs.shape[0], dtype=np.int8)
    idx = np.arange(coeffs.shape[0], dtype=np.int64)
    for j in range(N):
        pc += ((idx >> j) & 1).astype(np.int8)
    out: dict[int, float] = {}
    for t in range(1, d + 1):
        sel = coeffs[pc == t]
        out[t] = float(np.sum(sel * sel, dtype=coeffs.dtype)) if sel.size else 0.0
    return out


# ---------------------------------------------------------------------------
# The advantage of the best low-degree scalar distinguisher
# ---------------------------------------------------------------------------

def ldlr_advantage(model: PlantedModel, d: int, method: str = "analytic",
                   trials: int | None = None, rng: np.random.Generator | None = None,
                   t_cap: int = T_CAP) -> LdlrReport:
    """Squared norm of (truncated relative density - 1) by the chosen method."""
    if method == "analytic":
        if model.problem == "tpca":
            return tpca_norm_analytic(model, d, t_cap)
        if model.problem == "spca":
            return spca_norm_analytic(model, d, t_cap)
        raise IntractableModel(f"no analytic coefficients for {model.problem}")
    if method == "exact-enum":
        per_t = norms_from_table(density_table(model), d)
        return LdlrReport(model.describe(), d, math.fsum(per_t.values()),
                          per_t, "exact-enum")
    if method == "mc":
        if trials is None or rng is None:
            raise ValueError("mc method needs trials and rng")
        return _mc_norm(model, d, trials, rng)
    raise ValueError(f"unknown method {method!r}")


def _support_sizes(N: int, d: int) -> int:
    return sum(math.comb(N, s) for s in range(1, d + 1))


def _mc_norm(model: PlantedModel, d: int, trials: int, rng: np.random.Generator) -> LdlrReport:
    """Unbiased MC estimate: coefficients are planted-sample character means;
    the squared norm multiplies two independent halves."""
    scheme = model.scheme()
    N = scheme.size
    if _support_sizes(N, d) > ANALYTIC_SUPPORT_GUARD:
        raise GuardExceeded("too many supports for the MC coefficient sweep")
    half = max(1, trials // 2)
    rows = np.empty((2 * half, N))
    for i in range(2 * half):
        rows[i] = sample_planted(model, rng)[0].coords
    per_t: dict[int, float] = {t: 0.0 for t in range(1, d + 1)}
    var = 0.0
    for size in range(1, d + 1):
        for W in itertools.combinations(range(N), size):
            vals = standardized_character_rows(model, W, rows)
            a, b = vals[:half], vals[half:]
            c1, c2 = float(a.mean()), float(b.mean())
            s1 = float(a.std(ddof=1) / math.sqrt(half))
            s2 = float(b.std(ddof=1) / math.sqrt(half))
            per_t[size] += c1 * c2
            var += c1 * c1 * s2 * s2 + c2 * c2 * s1 * s1 + s1 * s1 * s2 * s2
    norm = math.fsum(per_t.values())
    return LdlrReport(model.describe(), d, max(norm, 0.0), per_t, "mc",
                      math.sqrt(var))


def optimal_scalar_distinguisher(model: PlantedModel, d: int) -> FourierPoly:
    """The unit-norm degree-<=d polynomial maximizing the planted mean:
    (truncated density - 1) / its norm."""
    scheme = model.scheme()
    N = scheme.size
    if model.problem in ("tpca", "spca"):
        if _support_sizes(N, d) > ANALYTIC_SUPPORT_GUARD:
            raise GuardExceeded("too many supports to materialize the polynomial")
        coeff_fn = tpca_coeff if model.problem == "tpca" else spca_coeff
        terms = {}
        for size in range(1, d + 1):
            for W in itertools.combinations(range(N), size):
                c = coeff_fn([scheme.members[j] for j in W], model)
                if c != 0.0:
                    terms[W] = c
        poly = FourierPoly(terms, d)
    else:
        table = density_table(model, dtype=np.float64)
        from .fourier import project_low_degree_exact
        proj = project_low_degree_exact(table, model, d)
        terms = {W: c for W, c in proj.terms.items() if W}
        poly = FourierPoly(terms, d)
    norm = math.sqrt(poly.norm_sq())
    if norm == 0.0:
        raise ZeroDistinguisher("the truncated density is constant; "
                                "no low-degree distinguisher exists")
    return poly.scaled(1.0 / norm)
