"""Multilinear Fourier analysis on {+-1}^N and Hermite analysis for Gaussian
instances.

Conventions
-----------
- Characters are multilinear: chi_W(x) = prod_{j in W} x_j with W a set of
  coordinate indices (powers are reduced before storage, x^2 = 1).
- All inner products and norms are with respect to the uniform measure on the
  cube unless a biased product measure is passed explicitly (standardized
  characters).
- Hermite polynomials are probabilists' He_m divided by sqrt(m!), so products
  over coordinates are orthonormal under the standard Gaussian.
- The dense enumeration order matches models.enumerate_instances: instance
  index i has coordinate j equal to +1 iff bit j of i is set, and the Walsh
  coefficient table is indexed by the bitmask of W.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from .errors import GuardExceeded
from .models import ENUMERATION_GUARD, Instance, PlantedModel, members_matrix


# ---------------------------------------------------------------------------
# Support sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SupportSet:
    """A set of instance coordinates, canonically sorted and duplicate-free."""

    coords: tuple[int, ...]

    def __post_init__(self):
        c = tuple(sorted(self.coords))
        if len(set(c)) != len(c):
            raise ValueError("duplicate coordinates in a multilinear support")
        object.__setattr__(self, "coords", c)

    def __len__(self) -> int:
        return len(self.coords)

    def __iter__(self):
        return iter(self.coords)

    def degree_map(self, inst_or_scheme) -> dict[int, int]:
        """Vertex -> degree over the hyperedges named by the coordinates."""
        scheme = getattr(inst_or_scheme, "scheme", inst_or_scheme)
        deg: dict[int, int] = {}
        for c in self.coords:
            for v in scheme.members[c]:
                deg[v] = deg.get(v, 0) + 1
        return deg

    def vertex_support(self, inst_or_scheme) -> frozenset[int]:
        return frozenset(self.degree_map(inst_or_scheme))

    def symmetric_difference(self, other: "SupportSet") -> "SupportSet":
        return SupportSet(tuple(set(self.coords) ^ set(other.coords)))


def chi(W: SupportSet | Iterable[int], inst: Instance) -> float:
    """Character value prod_{j in W} x_j; +-1 on Boolean instances."""
    idx = list(W.coords if isinstance(W, SupportSet) else W)
    if idx and (min(idx) < 0 or max(idx) >= inst.coords.shape[0]):
        raise IndexError("support coordinate out of range")
    return float(np.prod(inst.coords[idx])) if idx else 1.0


# ---------------------------------------------------------------------------
# Sparse multilinear polynomials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FourierPoly:
    """Sparse multilinear polynomial: map from support to real coefficient.

    Zero coefficients are never stored; every stored key has size at most
    ``max_degree``.
    """

    terms: dict[tuple[int, ...], float] = field(default_factory=dict)
    max_degree: int = 0

    def __post_init__(self):
        clean = {}
        for key, val in self.terms.items():
            key = tuple(sorted(key))
            if len(set(key)) != len(key):
                raise ValueError(f"support {key} has duplicate coordinates")
            if len(key) > self.max_degree:
                raise ValueError(f"support {key} exceeds max_degree={self.max_degree}")
            if val != 0.0:
                clean[key] = float(val)
        object.__setattr__(self, "terms", clean)

    def coefficient(self, W: Iterable[int]) -> float:
        return self.terms.get(tuple(sorted(W)), 0.0)

    def evaluate(self, inst: Instance) -> float:
        return float(sum(c * chi(W, inst) for W, c in self.terms.items()))

    def evaluate_rows(self, coords: np.ndarray) -> np.ndarray:
        """Evaluate on a (rows, N) coordinate matrix."""
        out = np.zeros(coords.shape[0])
        for W, c in self.terms.items():
            out += c * (np.prod(coords[:, list(W)], axis=1) if W else 1.0)
        return out

    def norm_sq(self) -> float:
        return float(math.fsum(c * c for c in self.terms.values()))

    def scaled(self, factor: float) -> "FourierPoly":
        return FourierPoly({W: c * factor for W, c in self.terms.items()},
                           self.max_degree)

    def to_csv(self) -> str:
        lines = ["support,coefficient"]
        for W in sorted(self.terms, key=lambda w: (len(w), w)):
            lines.append(f"{' '.join(map(str, W))},{self.terms[W]!r}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_csv(text: str) -> "FourierPoly":
        terms = {}
        maxdeg = 0
        for line in text.strip().splitlines()[1:]:
            supp, coeff = line.rsplit(",", 1)
            W = tuple(int(t) for t in supp.split()) if supp.strip() else ()
            terms[W] = float(coeff)
            maxdeg = max(maxdeg, len(W))
        return FourierPoly(terms, maxdeg)


def inner_product_nu(f: FourierPoly, g: FourierPoly) -> float:
    """<f,g> under the uniform measure: sum of coefficient products."""
    small, large = (f.terms, g.terms) if len(f.terms) <= len(g.terms) else (g.terms, f.terms)
    return float(math.fsum(c * large[W] for W, c in small.items() if W in large))


# ---------------------------------------------------------------------------
# Walsh transform on dense value tables
# ---------------------------------------------------------------------------

def walsh_coefficients(values: np.ndarray) -> np.ndarray:
    """All Fourier coefficients of a dense value table.

    ``values[i]`` is f at the instance whose coordinate j is +1 iff bit j of
    i is set; the result is indexed by the bitmask of the support W.  Works in
    whatever float dtype it is given (use longdouble for tight tolerances).
    """
    table = np.array(values, copy=True)
    size = table.shape[0]
    if size & (size - 1):
        raise ValueError("value table length must be a power of two")
    half = np.longdouble(0.5) if table.dtype == np.longdouble else 0.5
    width = 1
    while width < size:
        view = table.reshape(-1, 2 * width)
        lo = view[:, :width].copy()
        hi = view[:, width:].copy()
        view[:, :width] = (hi + lo) * half
        view[:, width:] = (hi - lo) * half
        width *= 2
    return table


def walsh_values(coeffs: np.ndarray) -> np.ndarray:
    """Inverse of walsh_coefficients."""
    table = np.array(coeffs, copy=True)
    size = table.shape[0]
    if size & (size - 1):
        raise ValueError("coefficient table length must be a power of two")
    width = 1
    while width < size:
        view = table.reshape(-1, 2 * width)
        lo = view[:, :width].copy()
        hi = view[:, width:].copy()
        view[:, :width] = lo - hi
        view[:, width:] = lo + hi
        width *= 2
    return table


def pm1_rows(N: int, dtype=np.float64) -> np.ndarray:
    """(2^N, N) matrix of all +-1 rows in instance-index order."""
    if N > ENUMERATION_GUARD:
        raise GuardExceeded(f"2^{N} rows exceed the enumeration guard")
    idx = np.arange(1 << N)
    out = np.empty((1 << N, N), dtype=dtype)
    for j in range(N):
        out[:, j] = np.where((idx >> j) & 1, 1.0, -1.0)
    return out


def _value_table(f, model: PlantedModel) -> np.ndarray:
    """Dense f-values over the enumerated space; accepts arrays or callables."""
    scheme = model.scheme()
    N = scheme.size
    if N > ENUMERATION_GUARD:
        raise GuardExceeded(f"2^{N} instances exceed the enumeration guard")
    if isinstance(f, np.ndarray):
        if f.shape != (1 << N,):
            raise ValueError("value table has wrong length")
        return f
    rows = pm1_rows(N)
    return np.array([f(Instance(rows[i], scheme)) for i in range(1 << N)])


def project_low_degree_exact(f, model: PlantedModel, D: int) -> FourierPoly:
    """Exact projection of f onto supports of size <= D (uniform nu).

    ``f`` is a callable on instances or a precomputed table of 2^N values in
    enumeration order.  Coefficient at W is the average of f * chi_W over the
    whole cube.
    """
    if not model.uniform_is_pm1():
        raise GuardExceeded("exact projection requires a uniform +-1 instance space")
    table = walsh_coefficients(_value_table(f, model))
    N = model.scheme().size
    terms: dict[tuple[int, ...], float] = {}
    for mask in range(1 << N):
        if mask.bit_count() <= D:
            c = float(table[mask])
            if c != 0.0:
                terms[_mask_to_support(mask)] = c
    return FourierPoly(terms, D)


def _mask_to_support(mask: int) -> tuple[int, ...]:
    out = []
    j = 0
    while mask:
        if mask & 1:
            out.append(j)
        mask >>= 1
        j += 1
    return tuple(out)


def project_low_degree_mc(f, model: PlantedModel, D: int, trials: int,
                          rng: np.random.Generator
                          ) -> tuple[FourierPoly, dict[tuple[int, ...], float]]:
    """Monte Carlo estimate of the same projection, with per-term stderr."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not model.uniform_is_pm1():
        raise GuardExceeded("MC projection requires a uniform +-1 instance space")
    N = model.scheme().size
    rows = rng.integers(0, 2, size=(trials, N)).astype(np.float64) * 2.0 - 1.0
    if isinstance(f, FourierPoly):
        vals = f.evaluate_rows(rows)
    elif callable(f):
        scheme = model.scheme()
        vals = np.array([f(Instance(rows[i], scheme)) for i in range(trials)])
    else:
        raise TypeError("f must be callable or a FourierPoly")
    terms: dict[tuple[int, ...], float] = {}
    stderr: dict[tuple[int, ...], float] = {}
    for size in range(D + 1):
        for W in itertools.combinations(range(N), size):
            prods = vals * np.prod(rows[:, list(W)], axis=1) if W else vals
            est = float(np.mean(prods))
            se = float(np.std(prods, ddof=1) / math.sqrt(trials)) if trials > 1 else float("inf")
            if est != 0.0:
                terms[W] = est
            stderr[W] = se
    return FourierPoly(terms, D), stderr


# ---------------------------------------------------------------------------
# Hermite analysis (Gaussian instances)
# ---------------------------------------------------------------------------

def hermite_normalized(m: int, x):
    """Probabilists' Hermite polynomial He_m(x) / sqrt(m!), vectorized."""
    x = np.asarray(x, dtype=np.float64)
    if m == 0:
        return np.ones_like(x)
    prev, cur = np.ones_like(x), x.copy()
    for j in range(1, m):
        prev, cur = cur, x * cur - j * prev
    return cur / math.sqrt(math.factorial(m))


def hermite(W: Mapping[int, int], inst: Instance) -> float:
    """Product over coordinates of normalized Hermite polynomials.

    ``W`` maps coordinate index -> multiplicity; multiplicity-0 entries are
    ignored.
    """
    val = 1.0
    for coord, mult in W.items():
        if mult:
            val *= float(hermite_normalized(mult, inst.coords[coord]))
    return val


def hermite_rows(W: Mapping[int, int], coords: np.ndarray) -> np.ndarray:
    """hermite(W, .) on each row of a (rows, N) coordinate matrix."""
    out = np.ones(coords.shape[0])
    for coord, mult in W.items():
        if mult:
            out *= hermite_normalized(mult, coords[:, coord])
    return out


# ---------------------------------------------------------------------------
# Standardized characters for biased product measures
# ---------------------------------------------------------------------------

def standardized_character_rows(model: PlantedModel, W: Iterable[int],
                                coords: np.ndarray) -> np.ndarray:
    """Orthonormal product character under the model's product law nu.

    For +-1 coordinates with P[+1] = p the factor is (x - (2p-1)) /
    (2 sqrt(p(1-p))); under uniform nu this is chi_W.
    """
    probs = model.nu_plus_prob()
    out = np.ones(coords.shape[0])
    for j in W:
        p = probs[j]
        out *= (coords[:, j] - (2.0 * p - 1.0)) / (2.0 * math.sqrt(p * (1.0 - p)))
    return out
