"""Subsampling schemes, survival exponents, and Monte Carlo robust-inference
rates.

A scheme draws a random coordinate subset S; ``estimate_epsilon`` then plays
the full game per trial: sample a planted instance with its witness, draw S,
resample every coordinate outside S from nu, restrict the witness to the
sub-instance, and test whether the restricted witness stays feasible (ideal
constraints plus objective >= threshold) on the completed instance.

Feasibility thresholds are configuration: the asymptotic objective bounds are
meaningless at desk sizes, so shipped defaults take the corresponding lemma's
expected objective with a fixed multiplicative margin.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import GuardExceeded
from .models import (Instance, PlantedModel, Solution, members_matrix,
                     resample_outside, sample_planted)
from .rng import derive_stream
from .util import wilson_interval

_KINDS = ("vertex-bernoulli", "coordinate-bernoulli", "constraint-bernoulli",
          "row-column-bernoulli")


@dataclass(frozen=True)
class SubsampleScheme:
    """Random coordinate-subset distribution Theta."""

    kind: str
    rho: float

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")

    def compatible(self, model: PlantedModel) -> bool:
        scheme = model.scheme()
        if self.kind == "constraint-bernoulli":
            return scheme.kind == "csp-slots"
        if self.kind == "vertex-bernoulli":
            return scheme.kind in ("graph-edges", "k-subsets")
        if self.kind == "row-column-bernoulli":
            return scheme.kind == "symmetric-matrix"
        # coordinate-bernoulli severs constraint blocks, so csp is excluded
        return scheme.kind in ("graph-edges", "k-subsets", "symmetric-matrix")


def subsample(model: PlantedModel, inst: Instance, scheme: SubsampleScheme,
              rng: np.random.Generator) -> np.ndarray:
    """Draw S per the scheme; returns the sorted kept-coordinate indices."""
    if not scheme.compatible(model):
        raise ValueError(f"{scheme.kind} is incompatible with {model.problem}")
    layout = inst.scheme
    if scheme.kind in ("vertex-bernoulli", "row-column-bernoulli"):
        alive = rng.random(layout.n) < scheme.rho
        mem = members_matrix(layout)
        keep = alive[mem].all(axis=1)
        return np.flatnonzero(keep)
    if scheme.kind == "constraint-bernoulli":
        keep = np.zeros(layout.size, dtype=bool)
        for block in layout.blocks:
            if rng.random() < scheme.rho:
                keep[list(block)] = True
        return np.flatnonzero(keep)
    # coordinate-bernoulli
    return np.flatnonzero(rng.random(layout.size) < scheme.rho)


def min_vertices_of_edges(layout_kind: str, arity: int, D: int) -> int:
    """Minimum vertex count spanned by D distinct coordinates (edges or
    k-subsets): the smallest m with C(m, arity) >= D."""
    m = arity
    while math.comb(m, arity) < D:
        m += 1
    return m


def rho_survival(D: int, scheme: SubsampleScheme, model: PlantedModel) -> float:
    """max over coordinate sets of size >= D of Pr[set subset of S]."""
    if D < 1:
        raise ValueError("D must be >= 1")
    if scheme.rho in (0.0, 1.0):
        return scheme.rho if D > 0 else 1.0
    if scheme.kind in ("coordinate-bernoulli", "constraint-bernoulli"):
        return scheme.rho ** D
    layout = model.scheme()
    v_min = min_vertices_of_edges(layout.kind, layout.k, D)
    return scheme.rho ** v_min


def solution_map(model: PlantedModel, kept: np.ndarray, inst: Instance,
                 planted: Solution) -> Solution:
    """Witness for the sub-instance: the planted witness restricted to the
    surviving part (clique problems) or carried over unchanged (assignment,
    labeling, and spike problems)."""
    if model.problem == "clique":
        # keep the planted clique vertices whose pairwise edges all survived;
        # under vertex subsampling this is exactly clique ∩ S
        support = planted.support
        keptset = set(int(i) for i in kept)
        layout = inst.scheme
        alive = []
        for v in support:
            ok = True
            for w in alive:
                if layout.index_of((min(v, w), max(v, w))) not in keptset:
                    ok = False
                    break
            if ok:
                alive.append(int(v))
        x = np.zeros(model.n)
        x[alive] = 1.0
        return Solution(x)
    return planted


# ---------------------------------------------------------------------------
# Feasibility of a witness on a completed instance
# ---------------------------------------------------------------------------

def objective_value(model: PlantedModel, inst: Instance, sol: Solution) -> float:
    """Problem objective of a witness on an instance (single-count over the
    upper triangle for pair schemes)."""
    x = sol.x
    mem = members_matrix(inst.scheme)
    if model.problem == "clique":
        return float(x.sum())
    if model.problem == "csp":
        k = model.k
        total = 0.0
        blocks = inst.scheme.blocks
        sub = mem[::k + 2]
        present = inst.coords[0::k + 2] == 1.0
        z = np.stack([inst.coords[1 + j::k + 2] for j in range(k)], axis=1)
        rhs = inst.coords[k + 1::k + 2]
        lit = x[sub] * z
        bits = np.zeros(len(blocks), dtype=np.int64)
        for j in range(k):
            bits |= (lit[:, j] > 0).astype(np.int64) << j
        pred = np.asarray(model.predicate, dtype=np.float64)[bits]
        return float(np.sum(present & (pred == rhs)))
    if model.problem in ("sbm", "dks"):
        present = inst.coords == 1.0
        prods = x[mem[:, 0]] * x[mem[:, 1]]
        return float(np.sum(prods[present]))
    if model.problem == "tpca":
        prods = np.prod(x[mem], axis=1)
        return float(np.dot(inst.coords, prods))
    # spca
    prods = x[mem[:, 0]] * x[mem[:, 1]]
    return float(np.dot(inst.coords, prods))


def ideal_feasible(model: PlantedModel, inst: Instance, sol: Solution) -> bool:
    """Exact ideal constraints of the problem's polynomial system."""
    x = sol.x
    if model.problem == "clique":
        if not np.all((x == 0.0) | (x == 1.0)):
            return False
        mem = members_matrix(inst.scheme)
        both = (x[mem] == 1.0).all(axis=1)
        return bool(np.all(inst.coords[both] == 1.0))
    if model.problem in ("csp", "sbm"):
        ok = np.all(np.abs(x) == 1.0)
        if model.problem == "sbm":
            ok = ok and x.sum() == 0.0
        return bool(ok)
    if model.problem == "dks":
        return bool(np.all((x == 0.0) | (x == 1.0)))
    if model.problem == "tpca":
        return bool(abs(float(np.dot(x, x)) - 1.0) < 1e-9)
    return bool(np.all(np.isin(x, (-1.0, 0.0, 1.0))))


@dataclass
class RobustnessReport:
    """MC estimate of the robust-inference failure probability."""

    model: dict
    scheme: dict
    trials: int
    failures: int
    threshold: float
    eps_hat: float = field(init=False)
    ci_lo: float = field(init=False)
    ci_hi: float = field(init=False)
    value_mean: float = 0.0
    value_min: float = 0.0
    value_max: float = 0.0

    def __post_init__(self):
        self.eps_hat = self.failures / self.trials if self.trials else 0.0
        self.ci_lo, self.ci_hi = wilson_interval(self.failures, self.trials)

    def to_dict(self) -> dict:
        return {"model": self.model, "scheme": self.scheme,
                "trials": self.trials, "failures": self.failures,
                "threshold": self.threshold, "eps_hat": self.eps_hat,
                "wilson95": [self.ci_lo, self.ci_hi],
                "value_stats": {"mean": self.value_mean, "min": self.value_min,
                                "max": self.value_max}}


def estimate_epsilon(model: PlantedModel, scheme: SubsampleScheme,
                     obj_threshold: float, trials: int, master_seed: int
                     ) -> RobustnessReport:
    """MC loop over (plant, subsample, resample, test-witness)."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    failures = 0
    vsum = 0.0
    vmin = math.inf
    vmax = -math.inf
    for t in range(trials):
        rng = derive_stream(master_seed, t)
        inst, planted = sample_planted(model, rng)
        kept = subsample(model, inst, scheme, rng)
        completed = resample_outside(model, inst, kept, rng)
        witness = solution_map(model, kept, inst, planted)
        value = objective_value(model, completed, witness)
        ok = ideal_feasible(model, completed, witness) and value >= obj_threshold
        if not ok:
            failures += 1
        vsum += value
        vmin = min(vmin, value)
        vmax = max(vmax, value)
    rep = RobustnessReport(model.describe(),
                           {"kind": scheme.kind, "rho": scheme.rho},
                           trials, failures, obj_threshold)
    rep.value_mean = vsum / trials
    rep.value_min = vmin
    rep.value_max = vmax
    return rep


# ---------------------------------------------------------------------------
# Exact enumeration of Theta on small spaces (for the duality module)
# ---------------------------------------------------------------------------

def enumerate_theta(model: PlantedModel, scheme: SubsampleScheme
                    ) -> list[tuple[float, tuple[int, ...], int]]:
    """(probability, kept coordinates, kept-vertex mask) for every subset in
    the support of Theta.  Vertex/row-column schemes enumerate vertex subsets;
    coordinate schemes enumerate coordinate subsets (guarded)."""
    layout = model.scheme()
    rho = scheme.rho
    out = []
    if scheme.kind in ("vertex-bernoulli", "row-column-bernoulli"):
        n = layout.n
        if n > 16:
            raise GuardExceeded("vertex-subset enumeration capped at n <= 16")
        mem = members_matrix(layout)
        for mask in range(1 << n):
            size = mask.bit_count()
            w = rho ** size * (1.0 - rho) ** (n - size)
            if w == 0.0:
                continue
            cols = tuple(c for c in range(layout.size)
                         if all((mask >> int(v)) & 1 for v in mem[c]))
            out.append((w, cols, mask))
        return out
    if layout.size > 16:
        raise GuardExceeded("coordinate-subset enumeration capped at N <= 16")
    for mask in range(1 << layout.size):
        size = mask.bit_count()
        w = rho ** size * (1.0 - rho) ** (layout.size - size)
        if w == 0.0:
            continue
        cols = tuple(c for c in range(layout.size) if (mask >> c) & 1)
        out.append((w, cols, 0))
    return out


def rho_survival_exact(D: int, theta: list[tuple[float, tuple[int, ...], int]],
                       N: int) -> float:
    """rho(D, Theta) from an enumerated Theta: the max over coordinate sets
    of size D of the probability that the set survives."""
    best = 0.0
    for alpha in itertools.combinations(range(N), D):
        aset = set(alpha)
        p = sum(w for w, cols, _ in theta if aset.issubset(cols))
        best = max(best, p)
    return best
