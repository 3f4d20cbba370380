"""Pseudo-calibrated truncated moment matrices.

The moment matrix is indexed by ordered tuples with distinct entries from
[n] of length <= d.  Its (a, b) entry, as a function of the instance A, is
the conditional planted moment of the spike monomial v^(a+b) weighted by the
relative density, truncated to instance degree <= D.  The entry's Fourier
coefficient at a support W (a set of instance coordinates, viewed as
hyperedges) is:

- tensor PCA:  (lambda n^(-k/2))^|W| * (n^(-eps))^|V(W)|, nonzero exactly
  when every vertex of W + a + b has even multiplicity;
- sparse PCA:  (lambda/k)^|W| * falling(k,u)/falling(n,u) * (n^(-gamma))^u
  with u = |V(W) union V(a) union V(b)|, under the same parity condition
  (the spike entry v_i is 0/+-1, so odd powers reduce to v_i and even
  positive powers to v_i^2).

Because the coefficient law depends on (a, b) only through per-vertex
multiplicity parities (and for sparse PCA the touched-vertex set), truncation
at any D stays inside that constraint subspace; ``constraint_residual``
measures the violation, which is zero up to roundoff for exact evaluations.

Two evaluation engines:

- a parity-indexed dynamic program over coordinates (tensor PCA with
  eps_noise = 0), linear in the number of coordinates with 2^n * (D+1)
  state, used for the PSD trend runs at n up to ~16;
- an explicit support catalog (any model, small n), which also provides the
  per-entry sparse coefficient polynomials.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import GuardExceeded
from .fourier import FourierPoly
from .ldlr import _falling
from .models import (IndexScheme, Instance, PlantedModel, members_matrix,
                     _vertex_subset_weights)

ND_GUARD = 5000           # dense eigensolve guard on the matrix dimension
CATALOG_GUARD = 2_500_000  # max enumerated supports for the catalog engine


# ---------------------------------------------------------------------------
# Tuple indexing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TupleIndex:
    """Ordered distinct-entry tuples of length <= d over [n], row-numbered."""

    n: int
    d: int
    tuples: tuple[tuple[int, ...], ...]

    @staticmethod
    def build(n: int, d: int) -> "TupleIndex":
        tups: list[tuple[int, ...]] = []
        for s in range(d + 1):
            tups.extend(itertools.permutations(range(n), s))
        return TupleIndex(n, d, tuple(tups))

    @property
    def size(self) -> int:
        return len(self.tuples)

    def position(self, tup: tuple[int, ...]) -> int:
        return _tuple_positions(self)[tuple(tup)]

    def vertex_masks(self) -> np.ndarray:
        """Bitmask of the vertices of each tuple."""
        return np.array([_mask(t) for t in self.tuples], dtype=np.int64)


@lru_cache(maxsize=32)
def _tuple_positions(index: TupleIndex) -> dict[tuple[int, ...], int]:
    return {t: i for i, t in enumerate(index.tuples)}


def n_d(n: int, d: int) -> int:
    """Number of <= d-tuples with unique entries from [n]."""
    return sum(math.perm(n, s) for s in range(d + 1))


def _mask(vertices) -> int:
    m = 0
    for v in vertices:
        m |= 1 << v
    return m


# ---------------------------------------------------------------------------
# Entry coefficient laws
# ---------------------------------------------------------------------------

def _parity_class(model: PlantedModel, row, col) -> tuple[int, int]:
    """(odd-multiplicity vertex mask, touched vertex mask) of row + col."""
    odd = _mask(row) ^ _mask(col)
    touched = _mask(row) | _mask(col)
    return odd, touched


def _coeff_for_support(model: PlantedModel, sizes: np.ndarray, vmasks: np.ndarray,
                       touched: int) -> np.ndarray:
    """Vector of coefficient values for cataloged supports of one parity class."""
    if model.problem == "tpca":
        q = model.rerandomize_keep_prob()
        p = model.vertex_survival_prob()
        vcount = np.array([int(m).bit_count() for m in vmasks])
        return q ** sizes * p ** vcount
    r = model.lam / model.k if model.k else 0.0
    p = model.vertex_survival_prob()
    u = np.array([int(m | touched).bit_count() for m in vmasks])
    ffk = np.array([_falling(model.k, int(x)) for x in u])
    ffn = np.array([_falling(model.n, int(x)) for x in u])
    return r ** sizes * (ffk / ffn) * p ** u


@dataclass(frozen=True)
class SupportCatalog:
    """All supports |W| <= D of a scheme grouped by odd-vertex parity mask."""

    scheme: IndexScheme
    D: int
    by_parity: dict[int, tuple[np.ndarray, np.ndarray, list[tuple[int, ...]]]]
    # parity mask -> (sizes |W|, vertex masks V(W), coordinate index tuples)


@lru_cache(maxsize=8)
def support_catalog(scheme: IndexScheme, D: int) -> SupportCatalog:
    N = scheme.size
    total = sum(math.comb(N, t) for t in range(D + 1))
    if total > CATALOG_GUARD:
        raise GuardExceeded(f"{total} supports exceed the catalog guard; "
                            "use the parity DP engine")
    coord_masks = [_mask(mem) for mem in scheme.members]
    groups: dict[int, list[tuple[int, int, tuple[int, ...]]]] = {}
    for t in range(D + 1):
        for W in itertools.combinations(range(N), t):
            par = 0
            vm = 0
            for c in W:
                par ^= coord_masks[c]
                vm |= coord_masks[c]
            groups.setdefault(par, []).append((t, vm, W))
    by_parity = {}
    for par, items in groups.items():
        sizes = np.array([t for t, _, _ in items], dtype=np.int64)
        vmasks = np.array([vm for _, vm, _ in items], dtype=np.int64)
        coords = [W for _, _, W in items]
        by_parity[par] = (sizes, vmasks, coords)
    return SupportCatalog(scheme, D, by_parity)


def entry_coeffs(model: PlantedModel, row, col, D: int) -> "EntryCoeffs":
    """Exact sparse Fourier coefficients of one truncated matrix entry."""
    if model.problem not in ("tpca", "spca"):
        raise ValueError("entry coefficients exist for tpca/spca models only")
    scheme = model.scheme()
    cat = support_catalog(scheme, D)
    odd, touched = _parity_class(model, row, col)
    terms: dict[tuple[int, ...], float] = {}
    got = cat.by_parity.get(odd)
    if got is not None:
        sizes, vmasks, coords = got
        vals = _coeff_for_support(model, sizes, vmasks, touched)
        for W, cval in zip(coords, vals):
            if cval != 0.0:
                terms[W] = float(cval)
    return EntryCoeffs(tuple(row), tuple(col), FourierPoly(terms, D))


def lambda_entry_coeffs(model: PlantedModel, row, col, D: int) -> "EntryCoeffs":
    """Tensor PCA entry coefficients (see module docstring for the law)."""
    if model.problem != "tpca":
        raise ValueError("lambda_entry_coeffs needs a tpca model")
    return entry_coeffs(model, row, col, D)


def spca_entry_coeffs(model: PlantedModel, row, col, D: int) -> "EntryCoeffs":
    """Sparse PCA entry coefficients (see module docstring for the law)."""
    if model.problem != "spca":
        raise ValueError("spca_entry_coeffs needs an spca model")
    return entry_coeffs(model, row, col, D)


@dataclass(frozen=True)
class EntryCoeffs:
    """One matrix entry as a sparse polynomial in the instance."""

    row: tuple[int, ...]
    col: tuple[int, ...]
    poly: FourierPoly


# ---------------------------------------------------------------------------
# Evaluation engines
# ---------------------------------------------------------------------------

def _parity_dp(model: PlantedModel, A: np.ndarray, D: int) -> np.ndarray:
    """G[parity mask] = sum over supports W, |W| <= D, with that odd-vertex
    mask of q^|W| chi_W(A).  Tensor PCA with eps_noise = 0 only."""
    scheme = model.scheme()
    n = model.n
    if n > 16:
        raise GuardExceeded("parity DP state 2^n capped at n <= 16")
    q = model.rerandomize_keep_prob()
    coord_masks = [_mask(mem) for mem in scheme.members]
    F = np.zeros((1 << n, D + 1))
    F[0, 0] = 1.0
    base = np.arange(1 << n)
    for c, cm in enumerate(coord_masks):
        w = q * A[c]
        perm = base ^ cm
        for t in range(D, 0, -1):
            F[:, t] += w * F[perm, t - 1]
    return F.sum(axis=1)


@dataclass(frozen=True)
class MomentMatrix:
    """Dense symmetric pseudo-moment matrix with its tuple index."""

    entries: np.ndarray
    index: TupleIndex
    model: PlantedModel
    degree_D: int

    @property
    def dim(self) -> int:
        return self.index.size

    def entry(self, row, col) -> float:
        return float(self.entries[self.index.position(tuple(row)),
                                  self.index.position(tuple(col))])

    def to_csv(self) -> str:
        lines = ["row,col,value"]
        for i, a in enumerate(self.index.tuples):
            for j, b in enumerate(self.index.tuples):
                if j < i:
                    continue
                lines.append(f"{' '.join(map(str, a))},{' '.join(map(str, b))},"
                             f"{self.entries[i, j]!r}")
        return "\n".join(lines) + "\n"


def eval_lambda_truncated(model: PlantedModel, inst: Instance, d: int, D: int
                          ) -> MomentMatrix:
    """Evaluate the truncated moment matrix at one instance."""
    if n_d(model.n, d) > ND_GUARD:
        raise GuardExceeded(f"N_d = {n_d(model.n, d)} exceeds the eigensolve guard")
    index = TupleIndex.build(model.n, d)
    masks = index.vertex_masks()
    A = inst.coords
    if model.problem == "tpca" and model.eps_noise == 0.0:
        G = _parity_dp(model, A, D)
        xor = masks[:, None] ^ masks[None, :]
        entries = G[xor]
    else:
        scheme = model.scheme()
        cat = support_catalog(scheme, D)
        chi_cache = {par: np.array([np.prod(A[list(W)]) if W else 1.0
                                    for W in coords])
                     for par, (_, _, coords) in cat.by_parity.items()}
        size = index.size
        entries = np.zeros((size, size))
        xor = masks[:, None] ^ masks[None, :]
        orm = masks[:, None] | masks[None, :]
        class_vals: dict[tuple[int, int], float] = {}
        for i in range(size):
            for j in range(i, size):
                key = (int(xor[i, j]), int(orm[i, j]))
                val = class_vals.get(key)
                if val is None:
                    got = cat.by_parity.get(key[0])
                    if got is None:
                        val = 0.0
                    else:
                        sizes, vmasks, _ = got
                        coeffs = _coeff_for_support(model, sizes, vmasks, key[1])
                        val = float(np.dot(coeffs, chi_cache[key[0]]))
                    class_vals[key] = val
                entries[i, j] = entries[j, i] = val
    entries = np.asarray(entries, dtype=np.float64)
    return MomentMatrix(entries, index, model, D)


def min_eigenvalue(M: MomentMatrix | np.ndarray) -> float:
    """Smallest eigenvalue of the symmetrized matrix."""
    ent = M.entries if isinstance(M, MomentMatrix) else np.asarray(M)
    if not np.isfinite(ent).all():
        raise ValueError("matrix has non-finite entries")
    sym = 0.5 * (ent + ent.T)
    return float(np.linalg.eigvalsh(sym)[0])


# ---------------------------------------------------------------------------
# Scalar checks and the certified objective value
# ---------------------------------------------------------------------------

def degree_k_moments(model: PlantedModel, inst: Instance, D: int) -> np.ndarray:
    """Truncated pseudo-moment of the degree-k spike monomial attached to each
    instance coordinate (the objective block)."""
    scheme = model.scheme()
    A = inst.coords
    mem = members_matrix(scheme)
    if model.problem == "tpca" and model.eps_noise == 0.0:
        G = _parity_dp(model, A, D)
        sigs = np.array([_mask(row) for row in mem])
        return G[sigs]
    cat = support_catalog(scheme, D)
    chi_cache = {par: np.array([np.prod(A[list(W)]) if W else 1.0 for W in coords])
                 for par, (_, _, coords) in cat.by_parity.items()}
    out = np.zeros(scheme.size)
    class_vals: dict[tuple[int, int], float] = {}
    for cidx in range(scheme.size):
        key = (_mask(mem[cidx]), _mask(mem[cidx]))
        val = class_vals.get(key)
        if val is None:
            got = cat.by_parity.get(key[0])
            if got is None:
                val = 0.0
            else:
                sizes, vmasks, _ = got
                coeffs = _coeff_for_support(model, sizes, vmasks, key[1])
                val = float(np.dot(coeffs, chi_cache[key[0]]))
            class_vals[key] = val
        out[cidx] = val
    return out


def scalar_checks(model: PlantedModel, inst: Instance, d: int, D: int
                  ) -> tuple[float, float]:
    """(top-left entry, objective) of the truncated moment matrix.

    The objective contracts the degree-k moment block against the instance:
    sum over coordinates of A_alpha times the truncated moment of the
    matching spike monomial.
    """
    if model.problem == "tpca" and model.eps_noise == 0.0:
        G = _parity_dp(model, inst.coords, D)
        lambda_00 = float(G[0])
    else:
        M0 = entry_coeffs(model, (), (), D)
        lambda_00 = M0.poly.evaluate(inst)
    moments = degree_k_moments(model, inst, D)
    objective = float(np.dot(inst.coords, moments))
    return lambda_00, objective


def constraint_residual(M: MomentMatrix, model: PlantedModel) -> float:
    """Relative Frobenius norm of the component of M outside the constraint
    subspace (entries constant on parity classes; <= 1e-10 for exact evals)."""
    masks = M.index.vertex_masks()
    xor = masks[:, None] ^ masks[None, :]
    if model.problem == "tpca":
        keys = xor
    else:
        orm = masks[:, None] | masks[None, :]
        keys = (xor.astype(np.int64) << (model.n + 1)) | orm.astype(np.int64)
    flat_keys = keys.ravel()
    vals = M.entries.ravel()
    uniq, inv = np.unique(flat_keys, return_inverse=True)
    sums = np.bincount(inv, weights=vals)
    counts = np.bincount(inv)
    means = sums / counts
    dev = vals - means[inv]
    total = float(np.linalg.norm(vals))
    if total == 0.0:
        return 0.0
    return float(np.linalg.norm(dev)) / total


def certified_sos_value(model: PlantedModel, inst: Instance, d: int, D: int,
                        psd_tol: float = 1e-8) -> float | None:
    """Objective value certified by the truncated moment matrix, if it is PSD
    up to tolerance; None when the witness fails.

    The witness is the matrix normalized by its top-left entry, with
    tolerance-level negative eigenvalues projected out.
    """
    M = eval_lambda_truncated(model, inst, d, D)
    eigs = np.linalg.eigvalsh(0.5 * (M.entries + M.entries.T))
    scale = float(max(abs(eigs[0]), abs(eigs[-1]), 1e-300))
    lambda_00, objective = scalar_checks(model, inst, d, D)
    if eigs[0] < -psd_tol * scale or lambda_00 <= 0.0:
        return None
    return objective / lambda_00


def check_report(model: PlantedModel, inst: Instance, d: int, D: int,
                 psd_tol: float = 1e-8) -> dict:
    """One-sample JSON-ready report: PSD margin, scalar checks, residual,
    certified value."""
    M = eval_lambda_truncated(model, inst, d, D)
    sym = 0.5 * (M.entries + M.entries.T)
    eigs = np.linalg.eigvalsh(sym)
    lambda_00, objective = scalar_checks(model, inst, d, D)
    residual = constraint_residual(M, model)
    scale = float(max(abs(eigs[0]), abs(eigs[-1]), 1e-300))
    psd_ok = eigs[0] >= -psd_tol * scale and lambda_00 > 0.0
    return {
        "min_eig": float(eigs[0]),
        "max_eig": float(eigs[-1]),
        "lambda_00": lambda_00,
        "objective": objective,
        "residual": residual,
        "certified_value": objective / lambda_00 if psd_ok else None,
    }


# ---------------------------------------------------------------------------
# Exact entry values on sampled instances (the enumeration oracle)
# ---------------------------------------------------------------------------

def exact_entry_values(model: PlantedModel, rows: np.ndarray, row, col
                       ) -> np.ndarray:
    """Untruncated entry values Lambda_(row,col)(A) for a batch of instances,
    computed directly from the sampling description by enumerating the spike
    and the thinning subset.  Independent of the Fourier coefficient law."""
    weights, spikes, bias_items = _planted_mixture(model)
    scheme = model.scheme()
    T = rows.shape[0]
    out = np.zeros(T)
    ab = list(row) + list(col)
    for w, v, (rate, cols, signs) in zip(weights, spikes, bias_items):
        mono = 1.0
        for vert in ab:
            mono *= v[vert]
        if mono == 0.0 or w == 0.0:
            continue
        if not cols:
            out += w * mono
            continue
        agree = rows[:, cols] @ signs
        ncols = len(cols)
        pow_tab = _pow_table(rate, ncols)
        disagree = np.rint((ncols - agree) / 2.0).astype(np.int64)
        out += (w * mono) * pow_tab[disagree]
    return out


def _pow_table(rate: float, ncols: int) -> np.ndarray:
    plus = np.cumprod(np.full(ncols, 1.0 + rate))
    minus = np.cumprod(np.full(ncols, 1.0 - rate))
    plus = np.concatenate([[1.0], plus])
    minus = np.concatenate([[1.0], minus])
    return plus[::-1] * minus


@lru_cache(maxsize=4)
def _planted_mixture(model: PlantedModel):
    """(weights, effective spikes, (rate, cols, signs) per item) describing
    the planted law as a mixture of per-coordinate product distributions."""
    scheme = model.scheme()
    n = model.n
    mem = members_matrix(scheme)
    weights: list[float] = []
    spikes: list[np.ndarray] = []
    items: list[tuple[float, list[int], np.ndarray]] = []
    if model.problem == "tpca":
        if n > 12 or (model.eps_noise > 0.0 and n > 10):
            raise GuardExceeded("spike/subset mixture enumeration capped")
        q = model.rerandomize_keep_prob()
        vs = [np.array([1.0 if (bits >> i) & 1 else -1.0 for i in range(n)])
              for bits in range(1 << n)]
        subsets = [((1 << n) - 1, 1.0)] if model.eps_noise == 0.0 \
            else list(_vertex_subset_weights(n, model.vertex_survival_prob()))
        for mask, wS in subsets:
            cols = [c for c in range(scheme.size)
                    if all((mask >> int(x)) & 1 for x in mem[c])]
            for v in vs:
                signs = np.array([np.prod(v[mem[c]]) for c in cols])
                weights.append(wS / (1 << n))
                spikes.append(v)
                items.append((q, cols, signs))
        return np.array(weights), spikes, items
    if model.problem == "spca":
        r = model.lam / model.k
        spike_list = []
        for sup in itertools.combinations(range(n), model.k):
            for sgn in itertools.product((-1.0, 1.0), repeat=model.k):
                v = np.zeros(n)
                v[list(sup)] = sgn
                spike_list.append(v)
        subsets = [((1 << n) - 1, 1.0)] if model.gamma == 0.0 \
            else list(_vertex_subset_weights(n, model.vertex_survival_prob()))
        for mask, wS in subsets:
            for v in spike_list:
                veff = v * np.array([(mask >> i) & 1 for i in range(n)], dtype=float)
                cols = [c for c in range(scheme.size)
                        if veff[mem[c, 0]] != 0 and veff[mem[c, 1]] != 0]
                signs = np.array([veff[mem[c, 0]] * veff[mem[c, 1]] for c in cols])
                weights.append(wS / len(spike_list))
                spikes.append(veff)
                items.append((r, cols, signs))
        return np.array(weights), spikes, items
    raise ValueError("mixture description exists for tpca/spca only")


def mc_entry_coefficient(model: PlantedModel, row, col, W_coords, trials: int,
                         rng: np.random.Generator, chunk: int = 4096
                         ) -> tuple[float, float]:
    """MC projection of the exact (untruncated) entry onto chi_W under the
    uniform measure: (estimate, stderr)."""
    N = model.scheme().size
    Wl = list(W_coords)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < trials:
        size = min(chunk, trials - done)
        rows = rng.integers(0, 2, size=(size, N)).astype(np.float64) * 2.0 - 1.0
        vals = exact_entry_values(model, rows, row, col)
        if Wl:
            vals = vals * np.prod(rows[:, Wl], axis=1)
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
        done += size
    mean = total / trials
    var = max(total_sq / trials - mean * mean, 0.0)
    return mean, math.sqrt(var / trials)


def to_json_report(reports: list[dict]) -> str:
    return json.dumps(reports, indent=2)
