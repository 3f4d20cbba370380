"""Planted/uniform distribution pairs and their instance spaces.

Six problems are supported: planted clique, random CSP refutation, the
stochastic block model, densest-k-subgraph, tensor PCA and sparse PCA.

Conventions
-----------
- Boolean coordinates are +/-1.0 (never 0/1); for graph problems
  edge-present maps to +1.
- An instance is a flat coordinate array plus an index scheme that knows the
  coordinate layout (edges, k-subsets, matrix cells, constraint slots).
- The "uniform" side nu is always a product distribution over coordinates;
  the planted side mu carries the hidden structure.  ``relative_density``
  returns mu(inst)/nu(inst) where tractable.
- Tensor PCA (Boolean): spike v in {+-1}^n, B = v tensor-power k indexed by
  k-subsets; each coordinate keeps its spiked value with probability
  lambda * n^(-k/2), then only coordinates whose vertices all survive a
  per-vertex n^(-eps_noise) thinning keep it; everything else is uniform.
- Sparse PCA (Boolean): spike v with k nonzero +-1 entries, B = v v^T off
  diagonal; entries inside the support survive with probability lambda/k and
  additionally require both endpoints to survive a per-vertex n^(-gamma)
  thinning; all other entries are uniform.
- Everything is pure given an explicit numpy Generator; instances are
  immutable after creation.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .errors import GuardExceeded, IntractableModel

ENUMERATION_GUARD = 24          # max N for enumerate_instances
DENSITY_VERTEX_GUARD = 16       # max n for spike enumeration in relative_density
DENSITY_SUBSET_GUARD = 10       # max n when a 2^n vertex-subset average is needed
CLIQUE_DENSITY_GUARD = 2_000_000  # max number of planted supports to average over


# ---------------------------------------------------------------------------
# Index schemes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IndexScheme:
    """Coordinate layout of an instance space.

    kind is one of "graph-edges", "k-subsets", "symmetric-matrix",
    "csp-slots".  ``members[i]`` lists the vertices touched by coordinate i;
    ``blocks`` groups coordinates that live or die together under
    constraint-wise subsampling (one block per CSP constraint, singleton
    blocks otherwise).
    """

    kind: str
    n: int
    k: int = 2
    members: tuple[tuple[int, ...], ...] = field(repr=False, default=())
    blocks: tuple[tuple[int, ...], ...] = field(repr=False, default=())

    @property
    def size(self) -> int:
        return len(self.members)

    def index_of(self, vertices: Sequence[int]) -> int:
        return _index_map(self.kind, self.n, self.k)[tuple(sorted(vertices))]


@lru_cache(maxsize=None)
def members_matrix(scheme: IndexScheme) -> np.ndarray:
    """Vertex members per coordinate as an (N, arity) int array.

    Only valid for schemes whose coordinates all touch the same number of
    vertices (true for every scheme here: pairs, k-subsets, csp slots).
    """
    return np.array(scheme.members, dtype=np.int64)


@lru_cache(maxsize=None)
def _index_map(kind: str, n: int, k: int) -> dict[tuple[int, ...], int]:
    scheme = make_scheme(kind, n, k)
    out: dict[tuple[int, ...], int] = {}
    for i, mem in enumerate(scheme.members):
        out.setdefault(mem, i)
    return out


@lru_cache(maxsize=None)
def make_scheme(kind: str, n: int, k: int = 2) -> IndexScheme:
    if kind in ("graph-edges", "symmetric-matrix"):
        pairs = tuple(itertools.combinations(range(n), 2))
        blocks = tuple((i,) for i in range(len(pairs)))
        return IndexScheme(kind, n, 2, pairs, blocks)
    if kind == "k-subsets":
        subs = tuple(itertools.combinations(range(n), k))
        blocks = tuple((i,) for i in range(len(subs)))
        return IndexScheme(kind, n, k, subs, blocks)
    if kind == "csp-slots":
        # per k-subset: slot 0 presence, slots 1..k literal signs, slot k+1 rhs
        members = []
        blocks = []
        pos = 0
        for sub in itertools.combinations(range(n), k):
            blocks.append(tuple(range(pos, pos + k + 2)))
            for _ in range(k + 2):
                members.append(sub)
            pos += k + 2
        return IndexScheme(kind, n, k, tuple(members), tuple(blocks))
    raise ValueError(f"unknown scheme kind {kind!r}")


# ---------------------------------------------------------------------------
# Core data types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Instance:
    """A point of the instance space: flat coords + index scheme."""

    coords: np.ndarray
    scheme: IndexScheme

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=np.float64)
        if c.shape != (self.scheme.size,):
            raise ValueError(f"expected {self.scheme.size} coords, got {c.shape}")
        c.flags.writeable = False
        object.__setattr__(self, "coords", c)

    @property
    def n(self) -> int:
        return self.scheme.n


@dataclass(frozen=True)
class Solution:
    """Program-variable witness (indicator / assignment / labeling / spike)."""

    x: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        x.flags.writeable = False
        object.__setattr__(self, "x", x)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.x != 0.0)


_PROBLEMS = ("clique", "csp", "sbm", "dks", "tpca", "spca")


def xor_predicate(k: int) -> tuple[int, ...]:
    """The k-XOR predicate table: P(u) = prod(u), indexed by the bitmask of
    +1 positions."""
    table = []
    for bits in range(1 << k):
        prod = 1
        for j in range(k):
            prod *= 1 if (bits >> j) & 1 else -1
        table.append(prod)
    return tuple(table)


@dataclass(frozen=True)
class PlantedModel:
    """Tagged parameter record for one of the six problems.

    Use the per-problem constructors (``PlantedModel.tpca(...)`` etc.) rather
    than filling fields by hand.
    """

    problem: str
    n: int
    # clique / dks / spca sparsity / tpca order / csp arity
    k: int = 0
    clique_size: int = 0
    # csp
    alpha: float = 0.0
    delta: float = 0.0
    predicate: tuple[int, ...] = ()
    # sbm (within-community a/n, across-community b/n; null G(n, (a+b)/2n))
    a: float = 0.0
    b: float = 0.0
    # dks (within planted set q, elsewhere p; null G(n,p))
    p: float = 0.0
    q: float = 0.0
    # tpca / spca
    lam: float = 0.0
    eps_noise: float = 0.0
    gamma: float = 0.0
    gaussian: bool = False

    # -- constructors -------------------------------------------------------

    @staticmethod
    def clique(n: int, size: int) -> "PlantedModel":
        return PlantedModel(problem="clique", n=n, clique_size=size)

    @staticmethod
    def csp(n: int, k: int = 3, alpha: float = 4.0, delta: float = 0.1,
            predicate: tuple[int, ...] | None = None) -> "PlantedModel":
        return PlantedModel(problem="csp", n=n, k=k, alpha=alpha, delta=delta,
                            predicate=predicate or xor_predicate(k))

    @staticmethod
    def sbm(n: int, a: float, b: float) -> "PlantedModel":
        return PlantedModel(problem="sbm", n=n, a=a, b=b)

    @staticmethod
    def dks(n: int, k: int, p: float, q: float) -> "PlantedModel":
        return PlantedModel(problem="dks", n=n, k=k, p=p, q=q)

    @staticmethod
    def tpca(n: int, k: int = 3, lam: float = 1.0, eps_noise: float = 0.0,
             gaussian: bool = False) -> "PlantedModel":
        return PlantedModel(problem="tpca", n=n, k=k, lam=lam,
                            eps_noise=eps_noise, gaussian=gaussian)

    @staticmethod
    def spca(n: int, k: int, lam: float, gamma: float = 0.0,
             gaussian: bool = False) -> "PlantedModel":
        return PlantedModel(problem="spca", n=n, k=k, lam=lam, gamma=gamma,
                            gaussian=gaussian)

    def __post_init__(self):
        if self.problem not in _PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.problem == "clique" and not (1 <= self.clique_size <= self.n):
            raise ValueError("clique size must lie in [1, n]")
        if self.problem == "csp":
            if self.k < 1 or len(self.predicate) != (1 << self.k):
                raise ValueError("predicate table must have 2^k entries")
            if not 0.0 <= self.delta <= 1.0:
                raise ValueError("noise delta must lie in [0,1]")
            if not 0.0 < self.alpha * self.n ** (1 - self.k) <= 1.0:
                raise ValueError("constraint probability alpha*n^(1-k) not in (0,1]")
        if self.problem == "sbm":
            if self.n % 2:
                raise ValueError("sbm needs even n")
            if not (0 <= self.a <= self.n and 0 <= self.b <= self.n):
                raise ValueError("need 0 <= a,b <= n")
        if self.problem == "dks":
            if not (1 <= self.k <= self.n):
                raise ValueError("need 1 <= k <= n")
            if not (0.0 <= self.p <= 1.0 and 0.0 <= self.q <= 1.0):
                raise ValueError("p,q must be probabilities")
        if self.problem == "tpca":
            if self.lam < 0 or self.k < 2 or self.eps_noise < 0:
                raise ValueError("tpca needs lam >= 0, k >= 2, eps_noise >= 0")
            if self.rerandomize_keep_prob() > 1.0 + 1e-12:
                raise ValueError(
                    f"lambda*n^(-k/2) = {self.rerandomize_keep_prob():g} > 1: "
                    "rerandomization probability would be negative")
        if self.problem == "spca":
            if not (0 < self.k <= self.n):
                raise ValueError("sparsity k must lie in (0, n]")
            if self.lam > self.k:
                raise ValueError("spca requires lam <= k")
            if self.lam < 0 or self.gamma < 0:
                raise ValueError("spca needs lam >= 0, gamma >= 0")

    # -- scheme / nu --------------------------------------------------------

    def scheme(self) -> IndexScheme:
        if self.problem in ("clique", "sbm", "dks"):
            return make_scheme("graph-edges", self.n)
        if self.problem == "tpca":
            return make_scheme("k-subsets", self.n, self.k)
        if self.problem == "spca":
            return make_scheme("symmetric-matrix", self.n)
        return make_scheme("csp-slots", self.n, self.k)

    def rerandomize_keep_prob(self) -> float:
        """tpca per-coordinate spike survival lambda * n^(-k/2)."""
        return self.lam * self.n ** (-self.k / 2.0)

    def vertex_survival_prob(self) -> float:
        """tpca n^(-eps_noise) / spca n^(-gamma) per-vertex survival."""
        if self.problem == "tpca":
            return self.n ** (-self.eps_noise)
        if self.problem == "spca":
            return self.n ** (-self.gamma)
        return 1.0

    def is_gaussian(self) -> bool:
        return self.gaussian

    def nu_plus_prob(self) -> np.ndarray:
        """P[coordinate = +1] under nu, per coordinate (Boolean models)."""
        if self.gaussian:
            raise IntractableModel("nu is Gaussian, not +-1-valued")
        scheme = self.scheme()
        if self.problem in ("clique", "tpca", "spca"):
            return np.full(scheme.size, 0.5)
        if self.problem == "sbm":
            return np.full(scheme.size, (self.a + self.b) / (2.0 * self.n))
        if self.problem == "dks":
            return np.full(scheme.size, self.p)
        # csp: presence slot biased, literal/rhs slots uniform
        out = np.full(scheme.size, 0.5)
        p_con = self.alpha * self.n ** (1 - self.k)
        for block in scheme.blocks:
            out[block[0]] = p_con
        return out

    def uniform_is_pm1(self) -> bool:
        """True when nu is the uniform distribution on {+-1}^N."""
        return (not self.gaussian) and self.problem in ("clique", "tpca", "spca")

    def describe(self) -> dict:
        d = {"problem": self.problem, "n": self.n}
        for name in ("k", "clique_size", "alpha", "delta", "a", "b", "p", "q",
                     "lam", "eps_noise", "gamma"):
            v = getattr(self, name)
            if v:
                d[name] = v
        if self.gaussian:
            d["gaussian"] = True
        return d


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def _pm1(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.integers(0, 2, size=shape).astype(np.float64) * 2.0 - 1.0


def sample_uniform(model: PlantedModel, rng: np.random.Generator) -> Instance:
    """One draw from the product distribution nu."""
    scheme = model.scheme()
    if model.gaussian:
        coords = rng.standard_normal(scheme.size)
    else:
        probs = model.nu_plus_prob()
        coords = np.where(rng.random(scheme.size) < probs, 1.0, -1.0)
    return Instance(coords, scheme)


def _planted_solution_vector(model: PlantedModel, rng: np.random.Generator) -> np.ndarray:
    n = model.n
    if model.problem == "clique":
        x = np.zeros(n)
        x[rng.choice(n, size=model.clique_size, replace=False)] = 1.0
        return x
    if model.problem == "csp":
        return _pm1(rng, n)
    if model.problem == "sbm":
        x = np.concatenate([np.ones(n // 2), -np.ones(n // 2)])
        return x[rng.permutation(n)]
    if model.problem == "dks":
        x = np.zeros(n)
        x[rng.choice(n, size=model.k, replace=False)] = 1.0
        return x
    if model.problem == "tpca":
        return _pm1(rng, n)  # scaled to the unit sphere on return
    # spca: k-sparse +-1
    x = np.zeros(n)
    x[rng.choice(n, size=model.k, replace=False)] = _pm1(rng, model.k)
    return x


def sample_planted(model: PlantedModel, rng: np.random.Generator) -> tuple[Instance, Solution]:
    """One draw from the planted distribution mu, with its hidden witness."""
    scheme = model.scheme()
    n = model.n

    if model.problem == "tpca":
        v = _planted_solution_vector(model, rng)
        signal = _subset_products(v, scheme)
        if model.gaussian:
            coords = (model.lam * n ** (-model.k / 2.0)) * signal \
                + rng.standard_normal(scheme.size)
        else:
            mem = members_matrix(scheme)
            keep = rng.random(scheme.size) < model.rerandomize_keep_prob()
            alive = rng.random(n) < model.vertex_survival_prob()
            keep &= alive[mem].all(axis=1)
            coords = np.where(keep, signal, _pm1(rng, scheme.size))
        return Instance(coords, scheme), Solution(v / math.sqrt(n))

    if model.problem == "spca":
        v = _planted_solution_vector(model, rng)
        signal = _subset_products(v, scheme)
        if model.gaussian:
            coords = (model.lam / model.k) * signal + rng.standard_normal(scheme.size)
        else:
            mem = members_matrix(scheme)
            alive = rng.random(n) < model.vertex_survival_prob()
            keep = rng.random(scheme.size) < (model.lam / model.k)
            keep &= signal != 0.0
            keep &= alive[mem].all(axis=1)
            coords = np.where(keep, signal, _pm1(rng, scheme.size))
        return Instance(coords, scheme), Solution(v)

    if model.problem == "clique":
        x = _planted_solution_vector(model, rng)
        mem = members_matrix(scheme)
        coords = _pm1(rng, scheme.size)
        coords[(x[mem] == 1.0).all(axis=1)] = 1.0
        return Instance(coords, scheme), Solution(x)

    if model.problem == "sbm":
        y = _planted_solution_vector(model, rng)
        mem = members_matrix(scheme)
        same = y[mem[:, 0]] == y[mem[:, 1]]
        prob = np.where(same, model.a / n, model.b / n)
        coords = np.where(rng.random(scheme.size) < prob, 1.0, -1.0)
        return Instance(coords, scheme), Solution(y)

    if model.problem == "dks":
        x = _planted_solution_vector(model, rng)
        mem = members_matrix(scheme)
        inside = (x[mem] == 1.0).all(axis=1)
        prob = np.where(inside, model.q, model.p)
        coords = np.where(rng.random(scheme.size) < prob, 1.0, -1.0)
        return Instance(coords, scheme), Solution(x)

    # csp
    y = _planted_solution_vector(model, rng)
    nblocks = len(scheme.blocks)
    k = model.k
    p_con = model.alpha * n ** (1 - k)
    present = rng.random(nblocks) < p_con
    z = _pm1(rng, (nblocks, k))
    subs = members_matrix(scheme)[::k + 2]          # one row per block
    planted_rhs = _eval_predicate_rows(model.predicate, y[subs] * z)
    noisy = rng.random(nblocks) >= 1.0 - model.delta
    rhs = np.where(present & ~noisy, planted_rhs, _pm1(rng, nblocks))
    coords = np.empty(scheme.size)
    coords[0::k + 2] = np.where(present, 1.0, -1.0)
    for j in range(k):
        coords[1 + j::k + 2] = z[:, j]
    coords[k + 1::k + 2] = rhs
    return Instance(coords, scheme), Solution(y)


def _subset_products(v: np.ndarray, scheme: IndexScheme) -> np.ndarray:
    """v^alpha for every coordinate alpha of the scheme."""
    return np.prod(v[members_matrix(scheme)], axis=1)


def _eval_predicate(table: tuple[int, ...], u: np.ndarray) -> int:
    bits = 0
    for j, val in enumerate(u):
        if val > 0:
            bits |= 1 << j
    return table[bits]


def _eval_predicate_rows(table: tuple[int, ...], u: np.ndarray) -> np.ndarray:
    """Predicate on each row of a (rows, k) array of +-1 literals."""
    k = u.shape[1]
    bits = np.zeros(u.shape[0], dtype=np.int64)
    for j in range(k):
        bits |= (u[:, j] > 0).astype(np.int64) << j
    return np.asarray(table, dtype=np.float64)[bits]


# ---------------------------------------------------------------------------
# Relative density mu/nu
# ---------------------------------------------------------------------------

def relative_density(model: PlantedModel, inst: Instance) -> float:
    """Exact mu(inst)/nu(inst) for tractable models.

    Tensor/sparse PCA average over the spike (and, when the per-vertex
    thinning is active, over vertex subsets); clique/dks average over planted
    supports, csp over assignments, sbm over balanced labelings.
    """
    if model.gaussian:
        raise IntractableModel("Gaussian models expose densities only through "
                               "analytic coefficients")
    A = inst.coords
    n = model.n

    if model.problem == "tpca":
        q = model.rerandomize_keep_prob()
        if q == 0.0:
            return 1.0
        _guard_spike_enum(model)
        vchi = _all_spike_products(n, model.scheme())     # (2^n, N) of +-1
        if model.eps_noise == 0.0:
            per = 1.0 + q * vchi * A                      # all coords in play
            return float(np.mean(np.prod(per, axis=1)))
        total = 0.0
        surv = model.vertex_survival_prob()
        for s_mask, w in _vertex_subset_weights(n, surv):
            cols = _coords_inside(model.scheme(), s_mask)
            per = 1.0 + q * vchi[:, cols] * A[cols]
            total += w * float(np.mean(np.prod(per, axis=1)))
        return total

    if model.problem == "spca":
        if model.lam == 0.0:
            return 1.0
        supports = list(itertools.combinations(range(n), model.k))
        if len(supports) * (1 << model.k) > 200_000:
            raise GuardExceeded("too many sparse spikes to enumerate")
        scheme = model.scheme()
        r = model.lam / model.k
        if model.gamma == 0.0:
            subset_iter = [((1 << n) - 1, 1.0)]
        else:
            _guard(n <= DENSITY_SUBSET_GUARD, "n too large for vertex-subset average")
            subset_iter = list(_vertex_subset_weights(n, model.vertex_survival_prob()))
        total = 0.0
        count = 0
        for sup in supports:
            for signs in itertools.product((-1.0, 1.0), repeat=model.k):
                v = np.zeros(n)
                v[list(sup)] = signs
                count += 1
                for s_mask, w in subset_iter:
                    prod = 1.0
                    for idx, (i, j) in enumerate(scheme.members):
                        if v[i] != 0 and v[j] != 0 and (s_mask >> i) & 1 and (s_mask >> j) & 1:
                            prod *= 1.0 + r * v[i] * v[j] * A[idx]
                    total += w * prod
        return total / count

    if model.problem == "clique":
        supports = math.comb(n, model.clique_size)
        _guard(supports <= CLIQUE_DENSITY_GUARD, "too many clique supports")
        scheme = model.scheme()
        s = model.clique_size
        acc = 0.0
        boost = 2.0 ** math.comb(s, 2)
        for sup in itertools.combinations(range(n), s):
            inside = set(sup)
            ok = all(A[idx] == 1.0 for idx, (i, j) in enumerate(scheme.members)
                     if i in inside and j in inside)
            if ok:
                acc += boost
        return acc / supports

    if model.problem == "csp":
        _guard(n <= DENSITY_VERTEX_GUARD, "too many assignments to enumerate")
        scheme = model.scheme()
        total = 0.0
        for bits in range(1 << n):
            y = np.array([1.0 if (bits >> i) & 1 else -1.0 for i in range(n)])
            prod = 1.0
            for block in scheme.blocks:
                if A[block[0]] != 1.0:
                    continue
                sub = scheme.members[block[0]]
                z = A[list(block[1:model.k + 1])]
                rhs = A[block[model.k + 1]]
                match = _eval_predicate(model.predicate, y[list(sub)] * z) == rhs
                prod *= 2.0 * (1.0 - model.delta) * match + model.delta
            total += prod
        return total / (1 << n)

    if model.problem == "sbm":
        _guard(math.comb(n, n // 2) <= CLIQUE_DENSITY_GUARD, "too many labelings")
        scheme = model.scheme()
        p_null = (model.a + model.b) / (2.0 * n)
        acc = 0.0
        labelings = list(itertools.combinations(range(n), n // 2))
        for side in labelings:
            y = -np.ones(n)
            y[list(side)] = 1.0
            prod = 1.0
            for idx, (i, j) in enumerate(scheme.members):
                pe = (model.a if y[i] == y[j] else model.b) / n
                if A[idx] == 1.0:
                    prod *= pe / p_null
                else:
                    prod *= (1.0 - pe) / (1.0 - p_null)
            acc += prod
        return acc / len(labelings)

    # dks
    _guard(math.comb(n, model.k) <= CLIQUE_DENSITY_GUARD, "too many planted sets")
    scheme = model.scheme()
    acc = 0.0
    sets = list(itertools.combinations(range(n), model.k))
    for sup in sets:
        inside = set(sup)
        prod = 1.0
        for idx, (i, j) in enumerate(scheme.members):
            if i in inside and j in inside:
                if A[idx] == 1.0:
                    prod *= model.q / model.p
                else:
                    prod *= (1.0 - model.q) / (1.0 - model.p)
        acc += prod
    return acc / len(sets)


def _guard(cond: bool, message: str) -> None:
    if not cond:
        raise GuardExceeded(message)


def _guard_spike_enum(model: PlantedModel) -> None:
    if model.eps_noise == 0.0:
        _guard(model.n <= DENSITY_VERTEX_GUARD, "n too large to enumerate spikes")
    else:
        _guard(model.n <= DENSITY_SUBSET_GUARD,
               "n too large for the vertex-subset average")


@lru_cache(maxsize=8)
def _all_spike_products(n: int, scheme: IndexScheme) -> np.ndarray:
    """(2^n, N) matrix of v^alpha over all v in {+-1}^n (bit i of the row
    index set => v_i = +1)."""
    rows = 1 << n
    v = np.empty((rows, n), dtype=np.int8)
    idx = np.arange(rows)
    for i in range(n):
        v[:, i] = np.where((idx >> i) & 1, 1, -1)
    out = np.empty((rows, scheme.size), dtype=np.float64)
    for c, mem in enumerate(scheme.members):
        col = np.ones(rows, dtype=np.int8)
        for i in mem:
            col = col * v[:, i]
        out[:, c] = col
    return out


def _vertex_subset_weights(n: int, p: float) -> Iterator[tuple[int, float]]:
    """(bitmask, probability) over all vertex subsets, inclusion prob p."""
    for mask in range(1 << n):
        size = mask.bit_count()
        yield mask, p ** size * (1.0 - p) ** (n - size)


def _coords_inside(scheme: IndexScheme, vertex_mask: int) -> list[int]:
    return [i for i, mem in enumerate(scheme.members)
            if all((vertex_mask >> v) & 1 for v in mem)]


# ---------------------------------------------------------------------------
# Resampling and enumeration
# ---------------------------------------------------------------------------

def resample_outside(model: PlantedModel, inst: Instance, kept: Sequence[int],
                     rng: np.random.Generator) -> Instance:
    """Preserve coordinates in ``kept`` bit-exact; redraw the rest from nu."""
    scheme = inst.scheme
    kept_idx = np.asarray(sorted(set(int(i) for i in kept)), dtype=np.int64)
    if kept_idx.size and (kept_idx[0] < 0 or kept_idx[-1] >= scheme.size):
        raise IndexError("kept coordinate out of range")
    fresh = sample_uniform(model, rng).coords.copy()
    if kept_idx.size:
        fresh[kept_idx] = inst.coords[kept_idx]
    return Instance(fresh, scheme)


def enumerate_instances(model: PlantedModel) -> Iterator[Instance]:
    """All 2^N Boolean instances, in bit order (bit j set => coord j = +1)."""
    if model.gaussian:
        raise IntractableModel("cannot enumerate a Gaussian instance space")
    scheme = model.scheme()
    N = scheme.size
    _guard(N <= ENUMERATION_GUARD, f"2^{N} instances exceed the enumeration guard")
    for bits in range(1 << N):
        coords = np.array([1.0 if (bits >> j) & 1 else -1.0 for j in range(N)])
        yield Instance(coords, scheme)


def nu_weight(model: PlantedModel, inst: Instance) -> float:
    """nu-probability of a Boolean instance."""
    probs = model.nu_plus_prob()
    plus = inst.coords > 0
    return float(np.prod(np.where(plus, probs, 1.0 - probs)))


# ---------------------------------------------------------------------------
# Serialization: one-line JSON header + one CSV row of coordinates
# ---------------------------------------------------------------------------

def instance_to_text(model: PlantedModel, inst: Instance) -> str:
    header = {"problem": model.problem, "n": model.n,
              "scheme": inst.scheme.kind, "params": model.describe()}
    body = ",".join(repr(float(c)) for c in inst.coords)
    return json.dumps(header) + "\n" + body + "\n"


def instance_from_text(text: str) -> tuple[dict, Instance]:
    header_line, body = text.strip().split("\n", 1)
    header = json.loads(header_line)
    coords = np.array([float(t) for t in body.strip().split(",")])
    k = header["params"].get("k", 2)
    scheme = make_scheme(header["scheme"], header["n"], k if k else 2)
    return header, Instance(coords, scheme)
