"""Dense complex matrices, random-matrix generation and permanent/determinant kernels.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Functions that
operate on a single matrix validate their input; the batched kernels
(``permanents``, ``determinants``) accept stacks of shape ``(..., n, n)`` and
skip per-matrix validation because they sit in the inner loops of table
construction and Monte Carlo runs.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Union

import numpy as np

from .errors import ResourceLimitError

try:
    import numba as _nb
except ImportError:  # pragma: no cover - exercised only without numba
    _nb = None

__all__ = [
    "RngStream",
    "as_generator",
    "as_complex_matrix",
    "sample_gaussian_matrix",
    "haar_column_orthonormal",
    "orthonormality_error",
    "is_column_orthonormal",
    "permanent_ryser",
    "permanents",
    "permanent_naive",
    "determinant",
    "determinants",
    "row_squared_norms",
    "submatrix_for_outcome",
    "matrix_to_json",
    "matrix_from_json",
    "save_matrix",
    "load_matrix",
    "matrix_hash",
    "MAX_PERMANENT_N",
    "MAX_NAIVE_N",
]

MAX_PERMANENT_N = 32
MAX_NAIVE_N = 9


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream)``.

    Every call to :meth:`generator` returns a fresh generator positioned at the
    start of the stream, so functions receiving the same ``RngStream`` draw the
    same numbers. Use :meth:`spawn` for independent substreams.
    """

    seed: int
    stream: tuple[int, ...] = ()

    def __post_init__(self):
        stream = self.stream
        if isinstance(stream, (int, np.integer)):
            stream = (int(stream),)
        object.__setattr__(self, "stream", tuple(int(s) for s in stream))
        if any(s < 0 for s in self.stream) or self.seed < 0:
            raise ValueError("seed and stream ids must be nonnegative")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.stream)
        return np.random.Generator(np.random.PCG64(seq))

    def spawn(self, *ids: int) -> "RngStream":
        return RngStream(self.seed, self.stream + tuple(ids))


RngLike = Union[RngStream, np.random.Generator]


def as_generator(rng: RngLike) -> np.random.Generator:
    """Accept either an ``RngStream`` or an already-running ``Generator``."""
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def as_complex_matrix(X, *, square: bool = False) -> np.ndarray:
    """Coerce ``X`` to a finite 2-D ``complex128`` array."""
    X = np.asarray(X, dtype=np.complex128)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {X.shape}")
    if square and X.shape[0] != X.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("matrix has non-finite entries")
    return X


# ---------------------------------------------------------------------------
# Random matrices
# ---------------------------------------------------------------------------

def sample_gaussian_matrix(n_rows: int, n_cols: int, rng: RngLike, size: int | None = None) -> np.ndarray:
    """Matrix of iid standard complex Gaussians, E[x] = 0 and E[|x|^2] = 1.

    Real and imaginary parts are independent with variance 1/2 each. With
    ``size`` given, returns a stack of shape ``(size, n_rows, n_cols)``.
    """
    if n_rows < 1 or n_cols < 1:
        raise ValueError("matrix dimensions must be >= 1")
    shape = (n_rows, n_cols) if size is None else (size, n_rows, n_cols)
    gen = as_generator(rng)
    z = gen.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * math.sqrt(0.5)


def haar_column_orthonormal(m: int, n: int, rng: RngLike) -> np.ndarray:
    """First ``n`` columns of a Haar-random ``m x m`` unitary.

    QR of a complex Gaussian ``m x n`` matrix, with column ``j`` of ``Q``
    multiplied by the phase of ``r_jj`` so that the triangular factor has a
    positive diagonal; this makes the result exactly Haar distributed.
    """
    if n < 1 or m < n:
        raise ValueError(f"need m >= n >= 1, got m={m}, n={n}")
    Z = sample_gaussian_matrix(m, n, rng)
    Q, R = np.linalg.qr(Z, mode="reduced")
    d = np.diag(R)
    return Q * (d / np.abs(d))


def orthonormality_error(A) -> float:
    """max |(A^dagger A - I)_ij|."""
    A = as_complex_matrix(A)
    G = A.conj().T @ A
    return float(np.max(np.abs(G - np.eye(A.shape[1])), initial=0.0))


def is_column_orthonormal(A, tol: float = 1e-10) -> bool:
    return orthonormality_error(A) <= tol


# ---------------------------------------------------------------------------
# Permanents
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _gray_steps(n: int) -> tuple:
    """(column, added?, sign of (-1)^|S|) for each Gray-code step k = 1 .. 2^n - 1."""
    out = []
    for k in range(1, 1 << n):
        j = (k & -k).bit_length() - 1
        g = k ^ (k >> 1)
        out.append((j, bool((g >> j) & 1), -1.0 if bin(g).count("1") & 1 else 1.0))
    return tuple(out)


def permanents(X) -> np.ndarray:
    """Permanents of a stack of square matrices, shape ``(..., n, n)`` -> ``(...)``.

    Ryser's inclusion-exclusion formula visited in Gray-code order, vectorized
    over the leading (batch) axes. Intended for small ``n`` and large batches.
    """
    X = np.asarray(X, dtype=np.complex128)
    if X.ndim < 2 or X.shape[-1] != X.shape[-2]:
        raise ValueError(f"expected stack of square matrices, got shape {X.shape}")
    n = X.shape[-1]
    if n > MAX_PERMANENT_N:
        raise ResourceLimitError(f"permanent of order {n} exceeds cap {MAX_PERMANENT_N}")
    batch_shape = X.shape[:-2]
    if n == 0:
        return np.ones(batch_shape, dtype=np.complex128)
    flat = X.reshape(-1, n, n)
    cols = np.ascontiguousarray(flat.transpose(2, 0, 1))  # cols[j] is (B, n)
    rowsum = np.zeros(flat.shape[:2], dtype=np.complex128)
    total = np.zeros(flat.shape[0], dtype=np.complex128)
    for j, added, sign in _gray_steps(n):
        if added:
            rowsum += cols[j]
        else:
            rowsum -= cols[j]
        if sign > 0:
            total += rowsum.prod(axis=1)
        else:
            total -= rowsum.prod(axis=1)
    if n & 1:
        total = -total
    return total.reshape(batch_shape)


def _ryser_scalar_py(X: np.ndarray) -> complex:
    return complex(permanents(X[None])[0])


if _nb is not None:

    @_nb.njit(cache=True)
    def _ryser_scalar_jit(X):  # pragma: no cover - compiled
        n = X.shape[0]
        rowsum = np.zeros(n, dtype=np.complex128)
        total = 0j
        parity = 0
        g_prev = 0
        for k in range(1, 1 << n):
            g = k ^ (k >> 1)
            diff = g ^ g_prev
            j = 0
            while (diff >> j) & 1 == 0:
                j += 1
            if (g >> j) & 1:
                for i in range(n):
                    rowsum[i] += X[i, j]
            else:
                for i in range(n):
                    rowsum[i] -= X[i, j]
            parity ^= 1
            p = 1.0 + 0j
            for i in range(n):
                p *= rowsum[i]
            if parity:
                total -= p
            else:
                total += p
            g_prev = g
        if n & 1:
            total = -total
        return total

    def _ryser_scalar(X: np.ndarray) -> complex:
        return complex(_ryser_scalar_jit(X))

else:  # pragma: no cover
    _ryser_scalar = _ryser_scalar_py


def permanent_ryser(X) -> complex:
    """Permanent of a square matrix by Ryser's formula with Gray-code updates.

    Uses about ``2^(n+1) n`` floating-point operations. The Gray-code walk
    flips one column per step, so |S| parity alternates every step.

    >>> permanent_ryser([[1, 2], [3, 4]])
    (10+0j)
    """
    X = as_complex_matrix(X, square=True)
    n = X.shape[0]
    if n > MAX_PERMANENT_N:
        raise ResourceLimitError(f"permanent of order {n} exceeds cap {MAX_PERMANENT_N}")
    if n == 0:
        return 1.0 + 0j
    if n <= 6:
        return _ryser_scalar_py(X)
    return _ryser_scalar(np.ascontiguousarray(X))


def permanent_naive(X) -> complex:
    """Direct sum over all n! permutations. Test oracle, ``n <= 9``."""
    X = as_complex_matrix(X, square=True)
    n = X.shape[0]
    if n > MAX_NAIVE_N:
        raise ResourceLimitError(f"naive permanent limited to n <= {MAX_NAIVE_N}, got {n}")
    if n == 0:
        return 1.0 + 0j
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
    terms = X[np.arange(n), perms].prod(axis=1)
    return complex(terms.sum())


# ---------------------------------------------------------------------------
# Determinants and row statistics
# ---------------------------------------------------------------------------

def determinant(X) -> complex:
    """Determinant via LU factorization with partial pivoting (LAPACK)."""
    X = as_complex_matrix(X, square=True)
    if X.shape[0] == 0:
        return 1.0 + 0j
    return complex(np.linalg.det(X))


def determinants(X) -> np.ndarray:
    """Batched determinant over the leading axes."""
    X = np.asarray(X, dtype=np.complex128)
    if X.shape[-1] == 0:
        return np.ones(X.shape[:-2], dtype=np.complex128)
    return np.linalg.det(X)


def row_squared_norms(X) -> np.ndarray:
    """Squared 2-norm of every row (works on stacks too)."""
    X = np.asarray(X, dtype=np.complex128)
    return (X.real ** 2 + X.imag ** 2).sum(axis=-1)


def submatrix_for_outcome(A, S) -> np.ndarray:
    """The ``n x n`` matrix A_S: row i of A repeated ``s_i`` times, in mode order."""
    A = as_complex_matrix(A)
    S = np.asarray(S, dtype=np.int64)
    if S.ndim != 1 or S.shape[0] != A.shape[0]:
        raise ValueError(f"outcome has {S.size} modes but A has {A.shape[0]} rows")
    if np.any(S < 0):
        raise ValueError("occupations must be nonnegative")
    n = int(S.sum())
    if n > A.shape[1]:
        raise ValueError(f"outcome has {n} photons but A has only {A.shape[1]} columns")
    modes = np.repeat(np.arange(A.shape[0]), S)
    return A[modes][:, :n]


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def matrix_to_json(A) -> dict:
    A = as_complex_matrix(A)
    return {
        "rows": int(A.shape[0]),
        "cols": int(A.shape[1]),
        "re": [float(v) for v in A.real.ravel()],
        "im": [float(v) for v in A.imag.ravel()],
    }


def matrix_from_json(doc: dict) -> np.ndarray:
    rows, cols = int(doc["rows"]), int(doc["cols"])
    re = np.asarray(doc["re"], dtype=np.float64)
    im = np.asarray(doc["im"], dtype=np.float64)
    if re.size != rows * cols or im.size != rows * cols:
        raise ValueError(f"expected {rows * cols} entries, got re={re.size}, im={im.size}")
    return as_complex_matrix((re + 1j * im).reshape(rows, cols))


def save_matrix(A, path) -> None:
    Path(path).write_text(json.dumps(matrix_to_json(A)))


def load_matrix(path) -> np.ndarray:
    return matrix_from_json(json.loads(Path(path).read_text()))


def matrix_hash(A) -> str:
    """sha256 over shape and the little-endian complex128 bytes of A."""
    A = np.ascontiguousarray(as_complex_matrix(A), dtype="<c16")
    h = hashlib.sha256(f"{A.shape[0]}x{A.shape[1]}:".encode())
    h.update(A.tobytes())
    return h.hexdigest()
