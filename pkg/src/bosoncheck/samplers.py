"""Exact samplers for the boson, fermion, uniform and classical-mockup distributions.

Two routes produce exact boson samples:

* table-based: enumerate the outcome space, compute every ``|Per(A_S)|^2 / prod s_i!``
  and draw by inverse CDF (``exact_boson_table`` + ``sample_from_table``);
* sequential: grow the outcome one photon at a time from conditional weights
  given by permanents of growing submatrices, after a uniformly random
  relabelling of the input columns (``sample_boson_sequential``). Costs
  ``O(m n 2^n)`` per sample, independent of the size of the outcome space,
  so it covers spaces far beyond the enumeration cap.

All samplers take an ``RngStream`` (fresh, reproducible) or a running numpy
``Generator``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import NumericalDegeneracyError, ResourceLimitError
from .linalg_core import (
    RngLike,
    RngStream,
    as_complex_matrix,
    as_generator,
    determinants,
    matrix_hash,
    orthonormality_error,
    permanents,
)
from .outcomes import (
    Outcome,
    OutcomeSpace,
    modes_from_occupations,
    occupations_from_modes,
)

__all__ = [
    "SAMPLER_KINDS",
    "MAX_TABLE_N",
    "ProbabilityTable",
    "SampleBatch",
    "exact_boson_table",
    "exact_fermion_table",
    "exact_mockup_classical_table",
    "exact_mockup_rownorm_table",
    "uniform_table",
    "empirical_table",
    "sample_from_table",
    "sample_boson_sequential",
    "sample_fermion",
    "sample_mockup_classical",
    "sample_mockup_rownorm",
    "sample_uniform",
    "sample_lossy_boson",
    "sample_batch",
]

SAMPLER_KINDS = (
    "boson-exact",
    "fermion",
    "mockup-classical",
    "mockup-rownorm",
    "uniform",
    "lossy-boson",
)

MAX_TABLE_N = 9
_CHUNK = 1 << 15
_FACT = np.array([math.factorial(k) for k in range(MAX_TABLE_N + 1)], dtype=np.float64)
_COLUMN_NORM_TOL = 1e-8


@dataclass
class ProbabilityTable:
    """Exact probabilities indexed by outcome rank.

    For a collision-free space built from a distribution that lives on the full
    space, ``probs`` is the unnormalized restriction and ``total_mass`` its sum;
    ``normalized`` records whether ``probs`` sums to one.
    """

    space: OutcomeSpace
    probs: np.ndarray
    normalized: bool = True
    modes: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.shape != (self.space.size,):
            raise ValueError(f"expected {self.space.size} probabilities, got {self.probs.shape}")
        if np.any(self.probs < 0) or not np.all(np.isfinite(self.probs)):
            raise ValueError("probabilities must be finite and nonnegative")
        if self.normalized and abs(self.total_mass - 1.0) > 1e-9:
            raise ValueError(f"table marked normalized but sums to {self.total_mass!r}")

    @property
    def total_mass(self) -> float:
        return float(self.probs.sum())

    @property
    def cumulative(self) -> np.ndarray:
        c = np.cumsum(self.probs)
        c /= c[-1]
        c[-1] = 1.0
        return c

    def renormalized(self) -> "ProbabilityTable":
        mass = self.total_mass
        if mass <= 0:
            raise NumericalDegeneracyError("cannot renormalize a table with zero mass")
        return ProbabilityTable(self.space, self.probs / mass, True, self.modes)

    def mode_array(self) -> np.ndarray:
        if self.modes is None:
            self.modes = self.space.mode_array()
        return self.modes

    def prob(self, S) -> float:
        return float(self.probs[self.space.rank(S)])


@dataclass
class SampleBatch:
    """Outcomes from one sampler run plus the provenance needed to reproduce it."""

    kind: str
    occupations: np.ndarray
    seed: Optional[int] = None
    stream: tuple = ()
    matrix_hash: Optional[str] = None

    def __post_init__(self):
        self.occupations = np.asarray(self.occupations, dtype=np.int32)
        if self.occupations.ndim != 2:
            raise ValueError("occupations must be a (k, m) array")

    def __len__(self) -> int:
        return self.occupations.shape[0]

    @property
    def m(self) -> int:
        return self.occupations.shape[1]

    @property
    def photon_counts(self) -> np.ndarray:
        return self.occupations.sum(axis=1)

    @property
    def outcomes(self) -> list[Outcome]:
        return [tuple(int(s) for s in row) for row in self.occupations]

    def modes(self) -> np.ndarray:
        """(k, n) sorted mode labels; requires a common photon number."""
        return modes_from_occupations(self.occupations)

    def header(self) -> dict:
        return {
            "type": "header",
            "kind": self.kind,
            "seed": self.seed,
            "stream": list(self.stream),
            "matrix_hash": self.matrix_hash,
            "m": self.m,
            "count": len(self),
        }

    def to_jsonl(self) -> str:
        lines = [json.dumps(self.header(), sort_keys=True)]
        lines.extend(json.dumps(row) for row in self.occupations.tolist())
        return "\n".join(lines) + "\n"

    def write_jsonl(self, path) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text: str) -> "SampleBatch":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = json.loads(lines[0])
        if head.get("type") != "header":
            raise ValueError("first JSON line must be the header record")
        rows = [json.loads(ln) for ln in lines[1:]]
        occ = np.array(rows, dtype=np.int32).reshape(len(rows), head["m"])
        return cls(head["kind"], occ, head["seed"], tuple(head["stream"]), head["matrix_hash"])

    @classmethod
    def read_jsonl(cls, path) -> "SampleBatch":
        return cls.from_jsonl(Path(path).read_text())


def _provenance(rng: RngLike) -> tuple[Optional[int], tuple]:
    if isinstance(rng, RngStream):
        return rng.seed, rng.stream
    return None, ()


# ---------------------------------------------------------------------------
# Exact tables
# ---------------------------------------------------------------------------

def _check_table_inputs(A, space: Optional[OutcomeSpace], collision_free: bool, orthonormal: bool):
    A = as_complex_matrix(A)
    m, n = A.shape
    if n > MAX_TABLE_N:
        raise ResourceLimitError(f"exact tables limited to n <= {MAX_TABLE_N}, got n={n}")
    if orthonormal:
        err = orthonormality_error(A)
        if err > 1e-9:
            raise ValueError(f"A is not column-orthonormal (max deviation {err:.2e})")
    if space is None:
        space = OutcomeSpace(m, n, collision_free)
    if space.m != m or space.n != n:
        raise ValueError(f"space (m={space.m}, n={space.n}) does not match A of shape {A.shape}")
    return A, space


def _fill_table(A, space: OutcomeSpace, kernel) -> tuple[np.ndarray, np.ndarray]:
    modes = space.mode_array()
    probs = np.empty(space.size, dtype=np.float64)
    for start in range(0, space.size, _CHUNK):
        chunk = modes[start:start + _CHUNK]
        occ = occupations_from_modes(chunk, space.m)
        probs[start:start + _CHUNK] = kernel(A[chunk], occ)
    return probs, modes


def _multiplicity(occ: np.ndarray) -> np.ndarray:
    return _FACT[occ].prod(axis=1)


def exact_boson_table(A, space: Optional[OutcomeSpace] = None, *, renormalize: bool = False) -> ProbabilityTable:
    """Pr[S] = |Per(A_S)|^2 / (s_1! ... s_m!) for every S in the space.

    Over the full space the table sums to one. Over the collision-free space
    it is the unnormalized restriction (``normalized=False``) unless
    ``renormalize`` is set.
    """
    A, space = _check_table_inputs(A, space, False, True)

    def kernel(sub, occ):
        return np.abs(permanents(sub)) ** 2 / _multiplicity(occ)

    probs, modes = _fill_table(A, space, kernel)
    if space.collision_free:
        table = ProbabilityTable(space, probs, False, modes)
        return table.renormalized() if renormalize else table
    return ProbabilityTable(space, probs, True, modes)


def exact_fermion_table(A) -> ProbabilityTable:
    """Pr[S] = |Det(A_S)|^2 over collision-free S (sums to one by Cauchy-Binet)."""
    A, space = _check_table_inputs(A, None, True, True)
    probs, modes = _fill_table(A, space, lambda sub, occ: np.abs(determinants(sub)) ** 2)
    return ProbabilityTable(space, probs, True, modes)


def _check_column_norms(A) -> np.ndarray:
    A = as_complex_matrix(A)
    norms = (np.abs(A) ** 2).sum(axis=0)
    if np.any(np.abs(norms - 1.0) > _COLUMN_NORM_TOL):
        raise ValueError(f"columns of A must have unit norm, got {norms}")
    return A


def exact_mockup_classical_table(A) -> ProbabilityTable:
    """Pr[S] = Per(A#_S) / prod s_i! with A#_ij = |a_ij|^2 (distinguishable photons)."""
    A = _check_column_norms(A)
    A, space = _check_table_inputs(A, None, False, False)
    W = np.abs(A) ** 2
    probs, modes = _fill_table(W, space, lambda sub, occ: permanents(sub).real / _multiplicity(occ))
    return ProbabilityTable(space, np.clip(probs, 0.0, None), True, modes)


def exact_mockup_rownorm_table(A) -> ProbabilityTable:
    """Multinomial law of n iid rows drawn with Pr[h] = (|a_h1|^2 + ... + |a_hn|^2) / n."""
    A = _check_column_norms(A)
    A, space = _check_table_inputs(A, None, False, False)
    n = A.shape[1]
    q = (np.abs(A) ** 2).sum(axis=1) / n

    def kernel(sub, occ):
        logp = (occ * np.log(np.where(q > 0, q, 1.0))).sum(axis=1)
        zero = ((occ > 0) & (q == 0)).any(axis=1)
        p = math.factorial(n) * np.exp(logp) / _multiplicity(occ)
        return np.where(zero, 0.0, p)

    probs, modes = _fill_table(A, space, kernel)
    return ProbabilityTable(space, probs, True, modes)


def uniform_table(space: OutcomeSpace) -> ProbabilityTable:
    return ProbabilityTable(space, np.full(space.size, 1.0 / space.size), True)


def empirical_table(batch: SampleBatch, space: OutcomeSpace) -> ProbabilityTable:
    """Histogram of a batch as a normalized table over ``space``."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    counts = np.zeros(space.size, dtype=np.float64)
    rows, freq = np.unique(batch.occupations, axis=0, return_counts=True)
    for row, c in zip(rows, freq):
        counts[space.rank(row)] += c
    return ProbabilityTable(space, counts / counts.sum(), True)


def sample_from_table(table: ProbabilityTable, k: int, rng: RngLike, *, kind: str = "table",
                      matrix_digest: Optional[str] = None) -> SampleBatch:
    """k iid inverse-CDF draws. Unnormalized tables are sampled conditionally."""
    gen = as_generator(rng)
    idx = np.searchsorted(table.cumulative, gen.random(k), side="right")
    idx = np.minimum(idx, table.space.size - 1)
    occ = occupations_from_modes(table.mode_array()[idx], table.space.m)
    seed, stream = _provenance(rng)
    return SampleBatch(kind, occ, seed, stream, matrix_digest)


# ---------------------------------------------------------------------------
# Per-sample samplers
# ---------------------------------------------------------------------------

def _draw_index(weights: np.ndarray, gen: np.random.Generator) -> int:
    c = np.cumsum(weights)
    i = int(np.searchsorted(c, gen.random() * c[-1], side="right"))
    return min(i, len(weights) - 1)


@lru_cache(maxsize=None)
def _minor_columns(k: int) -> np.ndarray:
    """Row l lists the k-1 column indices left after deleting column l."""
    return np.array([[c for c in range(k) if c != l] for l in range(k)], dtype=np.intp)


def _boson_sequential_modes(A: np.ndarray, gen: np.random.Generator) -> list[int]:
    m, n = A.shape
    B = A[:, gen.permutation(n)]
    rows = [_draw_index(np.abs(B[:, 0]) ** 2, gen)]
    for k in range(2, n + 1):
        sub = B[rows, :k]  # (k-1) x k
        minors = sub[:, _minor_columns(k)].transpose(1, 0, 2)
        expansion = B[:, :k] @ permanents(minors)  # Per(B[rows + [i], :k]) for every i
        w = np.abs(expansion) ** 2
        if not w.sum() > 0:
            raise NumericalDegeneracyError("all conditional weights vanished")
        rows.append(_draw_index(w, gen))
    return rows


def sample_boson_sequential(A, rng: RngLike) -> Outcome:
    """One exact boson sample without enumerating the outcome space.

    The input columns are relabelled by a uniform random permutation, then the
    k-th photon's mode i is drawn with weight ``|Per(B[rows + [i], :k])|^2``,
    computed for all i at once by Laplace expansion along the new row.
    """
    A = as_complex_matrix(A)
    m, n = A.shape
    occ = [0] * m
    if n == 0:
        return tuple(occ)
    for i in _boson_sequential_modes(A, as_generator(rng)):
        occ[i] += 1
    return tuple(occ)


def sample_fermion(A, rng: RngLike) -> Outcome:
    """One draw from Pr[S] = |Det(A_S)|^2 by n rounds of row projection.

    Rows of A are vectors in C^n. Round t picks row h with probability
    ||v_h||^2 / (n - t + 1), then projects every row onto the orthogonal
    complement of the picked one.
    """
    A = as_complex_matrix(A)
    m, n = A.shape
    if n < 1 or m < n:
        raise ValueError(f"need m >= n >= 1, got shape {A.shape}")
    gen = as_generator(rng)
    v = A.copy()
    original = (np.abs(v) ** 2).sum(axis=1)
    basis: list[np.ndarray] = []
    occ = [0] * m
    norms = original.copy()
    for t in range(n):
        p = norms / (n - t)
        if abs(p.sum() - 1.0) > 1e-6:
            raise NumericalDegeneracyError(
                f"round {t + 1} probabilities sum to {p.sum():.9f}; A is not column-orthonormal"
            )
        h = _draw_index(p, gen)
        occ[h] += 1
        if t == n - 1:
            break
        q = v[h] / math.sqrt(norms[h])
        basis.append(q)
        v -= np.outer(v @ q.conj(), q)
        v[h] = 0.0
        norms = (v.real ** 2 + v.imag ** 2).sum(axis=1)
        # rows that lost almost all their norm carry mostly rounding error
        shrunk = norms < 1e-12 * original
        shrunk[h] = False
        if np.any(shrunk):
            for b in basis:
                v[shrunk] -= np.outer(v[shrunk] @ b.conj(), b)
            norms[shrunk] = (np.abs(v[shrunk]) ** 2).sum(axis=1)
    return tuple(occ)


def _fermion_occupations(A: np.ndarray, k: int, gen: np.random.Generator, chunk: int = 4096) -> np.ndarray:
    """``k`` fermion draws in lockstep, with the same round probabilities as :func:`sample_fermion`.

    Projecting every row each round is replaced by bookkeeping: a row's
    remaining squared norm is its original one minus the squared overlaps with
    the picked basis vectors, one ``(b, n) @ (n, m)`` product per round. Each
    basis vector is the picked row of A run through Gram-Schmidt twice.
    """
    m, n = A.shape
    if n < 1 or m < n:
        raise ValueError(f"need m >= n >= 1, got shape {A.shape}")
    original = (np.abs(A) ** 2).sum(axis=1)
    AT = np.ascontiguousarray(A.T)
    out = np.zeros((k, m), dtype=np.int32)
    for start in range(0, k, chunk):
        b = min(chunk, k - start)
        idx = np.arange(b)
        norms = np.broadcast_to(original, (b, m)).copy()
        basis = np.zeros((b, n, n), dtype=np.complex128)
        for t in range(n):
            p = norms / (n - t)
            total = p.sum(axis=1)
            if np.any(np.abs(total - 1.0) > 1e-6):
                raise NumericalDegeneracyError(
                    f"round {t + 1} probabilities sum to {total.min():.9f}..{total.max():.9f}; "
                    "A is not column-orthonormal"
                )
            c = np.cumsum(p, axis=1)
            u = gen.random(b) * c[:, -1]
            h = np.minimum((c <= u[:, None]).sum(axis=1), m - 1)
            out[start + idx, h] += 1
            if t == n - 1:
                break
            q = A[h]
            prev = basis[:, :t]
            for _ in range(2):
                q = q - np.einsum("bt,btj->bj", np.einsum("btj,bj->bt", prev.conj(), q), prev)
            q /= np.linalg.norm(q, axis=1)[:, None]
            basis[:, t] = q
            norms -= np.abs(q.conj() @ AT) ** 2
            norms[idx, h] = 0.0
            np.maximum(norms, 0.0, out=norms)
    return out

def _classical_occupations(A: np.ndarray, k: int, gen: np.random.Generator) -> np.ndarray:
    m, n = A.shape
    W = np.abs(A) ** 2
    cum = np.cumsum(W, axis=0)
    cum /= cum[-1]
    u = gen.random((k, n))
    modes = np.empty((k, n), dtype=np.int64)
    for j in range(n):
        modes[:, j] = np.minimum(np.searchsorted(cum[:, j], u[:, j], side="right"), m - 1)
    return occupations_from_modes(np.sort(modes, axis=1), m)


def sample_mockup_classical(A, rng: RngLike) -> Outcome:
    """Photon j lands in mode h with probability |a_hj|^2, independently for each j."""
    A = _check_column_norms(A)
    return tuple(int(s) for s in _classical_occupations(A, 1, as_generator(rng))[0])


def _rownorm_occupations(A: np.ndarray, k: int, gen: np.random.Generator) -> np.ndarray:
    m, n = A.shape
    q = (np.abs(A) ** 2).sum(axis=1) / n
    cum = np.cumsum(q)
    cum /= cum[-1]
    modes = np.minimum(np.searchsorted(cum, gen.random((k, n)), side="right"), m - 1)
    return occupations_from_modes(np.sort(modes, axis=1), m)


def sample_mockup_rownorm(A, rng: RngLike) -> Outcome:
    """n rows drawn iid with Pr[h] = (|a_h1|^2 + ... + |a_hn|^2) / n."""
    A = _check_column_norms(A)
    return tuple(int(s) for s in _rownorm_occupations(A, 1, as_generator(rng))[0])


def sample_uniform(space: OutcomeSpace, rng: RngLike) -> Outcome:
    gen = as_generator(rng)
    return space.unrank(int(gen.integers(space.size)))


def _uniform_occupations(space: OutcomeSpace, k: int, gen: np.random.Generator) -> np.ndarray:
    if space.size <= 10**6:
        idx = gen.integers(space.size, size=k)
        return occupations_from_modes(space.mode_array()[idx], space.m)
    # uniform n-subset of the ground set, mapped back through c_i - i for the full space
    ground = space.m if space.collision_free else space.m + space.n - 1
    shift = 0 if space.collision_free else np.arange(space.n)
    modes = np.array([np.sort(gen.choice(ground, space.n, replace=False)) - shift for _ in range(k)],
                     dtype=np.int64).reshape(k, space.n)
    return occupations_from_modes(modes, space.m)


def sample_lossy_boson(A, loss_prob: float, rng: RngLike) -> Outcome:
    """Drop each input photon independently with ``loss_prob``, boson-sample the rest.

    The surviving columns of A remain orthonormal, so the retained photons are
    sampled exactly with the sequential sampler. Losing every photon yields the
    all-zero outcome.
    """
    if not 0.0 <= loss_prob <= 1.0:
        raise ValueError(f"loss_prob must lie in [0, 1], got {loss_prob}")
    A = as_complex_matrix(A)
    gen = as_generator(rng)
    keep = gen.random(A.shape[1]) >= loss_prob
    return sample_boson_sequential(A[:, keep], gen)


# ---------------------------------------------------------------------------
# Batches
# ---------------------------------------------------------------------------

def sample_batch(kind: str, A, k: int, rng: RngLike, *, space: Optional[OutcomeSpace] = None,
                 loss_prob: float = 0.0, method: str = "auto",
                 table: Optional[ProbabilityTable] = None) -> SampleBatch:
    """Draw ``k`` outcomes of one sampler kind as a ``SampleBatch``.

    ``method`` applies to ``boson-exact``: ``"table"`` enumerates the full
    space, ``"sequential"`` uses the per-sample sampler, ``"auto"`` picks the
    table when the space has at most 2*10^6 outcomes. A precomputed ``table``
    is reused as-is. ``uniform`` draws over ``space`` (default: collision-free).
    """
    if kind not in SAMPLER_KINDS:
        raise ValueError(f"unknown sampler kind {kind!r}; expected one of {SAMPLER_KINDS}")
    if k < 0:
        raise ValueError("k must be nonnegative")
    A = as_complex_matrix(A)
    m, n = A.shape
    gen = as_generator(rng)
    seed, stream = _provenance(rng)
    digest = matrix_hash(A)

    if kind == "boson-exact":
        if table is None:
            full = OutcomeSpace(m, n)
            use_table = method == "table" or (method == "auto" and n <= MAX_TABLE_N and full.size <= 2 * 10**6)
            if use_table:
                table = exact_boson_table(A, full)
        if table is not None:
            batch = sample_from_table(table, k, gen, kind=kind, matrix_digest=digest)
            batch.seed, batch.stream = seed, stream
            return batch
        occ = [sample_boson_sequential(A, gen) for _ in range(k)]
    elif kind == "fermion":
        occ = _fermion_occupations(A, k, gen)
    elif kind == "mockup-classical":
        occ = _classical_occupations(_check_column_norms(A), k, gen)
    elif kind == "mockup-rownorm":
        occ = _rownorm_occupations(_check_column_norms(A), k, gen)
    elif kind == "uniform":
        occ = _uniform_occupations(space or OutcomeSpace(m, n, True), k, gen)
    else:
        occ = [sample_lossy_boson(A, loss_prob, gen) for _ in range(k)]
    occ = np.asarray(occ, dtype=np.int32).reshape(k, m)
    return SampleBatch(kind, occ, seed, stream, digest)
