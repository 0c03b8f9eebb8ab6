"""Statistics of submatrices and the distinguishers built from them.

Scalar functions (``p_statistic``, ``r_star``, ...) mirror the definitions on
one matrix; the ``*_batch`` variants work on stacks ``(k, n, n)`` and are what
the experiments use. Products of n terms are always formed in log space.

Gaussian-surrogate arms
-----------------------
Under the surrogate, an n x n submatrix is an iid complex Gaussian matrix X.
Each sampler kind then corresponds to reweighting the Gaussian law by a
likelihood ratio with unit mean:

=================  ======================================
arm                weight on X
=================  ======================================
uniform            1
boson              |Per(X)|^2 / n!
fermion            |Det(X)|^2 / n!
mockup-classical   Per(X#) / n!,  X#_ij = |x_ij|^2
mockup-rownorm     R*(X)
=================  ======================================

Expectations under a weighted arm are self-normalized importance averages of
plain Gaussian draws. Permanent weights cost 2^n per draw; above
``exact_weight_max_n`` they are replaced by their conditional expectation
given the row norms, which is R*(X) because the row-normalized part of X is
independent of the row norms and has unit-mean permanent weight.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy import special, stats as sps

from .errors import NumericalDegeneracyError
from .linalg_core import (
    RngLike,
    as_complex_matrix,
    as_generator,
    determinants,
    permanent_ryser,
    permanents,
    row_squared_norms,
    sample_gaussian_matrix,
)
from .samplers import SampleBatch

__all__ = [
    "p_statistic",
    "p_statistic_batch",
    "r_star",
    "log_r_star_batch",
    "r_star_batch",
    "q_statistic",
    "r_star_general",
    "log_r_star_general_batch",
    "wilson_interval",
    "Fraction",
    "rownorm_distinguisher",
    "VerifierDecision",
    "verifier_log_terms",
    "permanent_verifier",
    "MockupStatistics",
    "mockup_statistics",
    "SURROGATE_ARMS",
    "SurrogateArm",
    "surrogate_arm",
    "weighted_fraction",
    "gaussian_p_samples",
    "gaussian_d_samples",
    "gaussian_log_r_samples",
    "independence_check",
    "rownorm_gap_identity",
]


# ---------------------------------------------------------------------------
# P, R*, Q
# ---------------------------------------------------------------------------

def p_statistic(X) -> float:
    """|Per(X)|^2 / n!"""
    X = as_complex_matrix(X, square=True)
    return abs(permanent_ryser(X)) ** 2 / math.factorial(X.shape[0])


def p_statistic_batch(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.complex128)
    return np.abs(permanents(X)) ** 2 / math.factorial(X.shape[-1])


def r_star(X) -> float:
    """Product of squared row norms divided by n^n; zero if any row vanishes."""
    X = as_complex_matrix(X, square=True)
    return float(r_star_batch(X[None])[0])


def log_r_star_batch(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.complex128)
    n = X.shape[-1]
    with np.errstate(divide="ignore"):
        return np.log(row_squared_norms(X)).sum(axis=-1) - n * math.log(n)


def r_star_batch(X) -> np.ndarray:
    return np.exp(log_r_star_batch(X))


def q_statistic(X) -> float:
    """P(X) / R*(X), the part of P that ignores row norms."""
    rs = r_star(X)
    if rs == 0.0:
        raise NumericalDegeneracyError("R* is zero, Q is undefined")
    return p_statistic(X) / rs


def _log_rising(n: int, s: np.ndarray) -> np.ndarray:
    """log of n (n+1) ... (n+s-1), elementwise in s."""
    return special.gammaln(n + s) - special.gammaln(n)


def log_r_star_general_batch(A, occupations) -> np.ndarray:
    """log R*_S of sqrt(m) A_S for every outcome row, collisions allowed.

    With R_i the squared norm of row i of sqrt(m) A, the statistic is
    prod_i R_i^{s_i} / (n (n+1) ... (n+s_i-1)); it equals R*(sqrt(m) A_S)
    whenever S is collision-free.
    """
    A = as_complex_matrix(A)
    m, n = A.shape
    occ = np.asarray(occupations, dtype=np.int64)
    if occ.ndim == 1:
        occ = occ[None]
    if occ.shape[1] != m:
        raise ValueError(f"outcomes have {occ.shape[1]} modes, A has {m} rows")
    counts = occ.sum(axis=1)
    if np.any(counts != n):
        raise ValueError(f"every outcome must carry n={n} photons")
    with np.errstate(divide="ignore"):
        logR = np.log(m * row_squared_norms(A))
    used = occ > 0
    terms = np.where(used, occ * np.where(used, logR, 0.0) - _log_rising(n, occ), 0.0)
    return terms.sum(axis=1)


def r_star_general(A, S) -> float:
    return float(np.exp(log_r_star_general_batch(A, np.asarray(S)[None])[0]))


# ---------------------------------------------------------------------------
# Row-norm distinguisher
# ---------------------------------------------------------------------------

def wilson_interval(successes: int, total: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if total <= 0:
        raise ValueError("total must be positive")
    p = successes / total
    denom = 1 + z * z / total
    centre = (p + z * z / (2 * total)) / denom
    half = z * math.sqrt(p * (1 - p) / total + z * z / (4 * total * total)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class Fraction:
    """An acceptance fraction with standard error and a 95% interval."""

    value: float
    stderr: float
    ci_low: float
    ci_high: float
    count: int

    def to_dict(self) -> dict:
        return asdict(self)


def _fraction(accepted: np.ndarray) -> Fraction:
    k = int(accepted.size)
    hits = int(np.count_nonzero(accepted))
    p = hits / k
    lo, hi = wilson_interval(hits, k)
    return Fraction(p, math.sqrt(p * (1 - p) / k), lo, hi, k)


def rownorm_distinguisher(A, batch: SampleBatch) -> Fraction:
    """Fraction of outcomes with R*(sqrt(m) A_S) >= 1, Wilson 95% interval."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    return _fraction(log_r_star_general_batch(A, batch.occupations) >= 0.0)


# ---------------------------------------------------------------------------
# Permanent verifier
# ---------------------------------------------------------------------------

@dataclass
class VerifierDecision:
    accept: bool
    log_sum: float
    threshold: float
    k: int

    def to_dict(self) -> dict:
        return {"accept": self.accept, "log_sum": self.log_sum, "threshold": self.threshold, "k": self.k}


def verifier_log_terms(A, batch: SampleBatch) -> np.ndarray:
    """ln |Per(A_S)|^2 for every outcome of the batch."""
    A = as_complex_matrix(A)
    if len(batch) == 0:
        return np.zeros(0)
    subs = A[batch.modes()]
    with np.errstate(divide="ignore"):
        return np.log(np.abs(permanents(subs)) ** 2)


def permanent_verifier(A, batch: SampleBatch) -> VerifierDecision:
    """Accept iff prod_i |Per(A_{S_i})|^2 >= (n!/m^n)^k, decided in log space."""
    A = as_complex_matrix(A)
    m, n = A.shape
    terms = verifier_log_terms(A, batch)
    k = int(terms.size)
    threshold = k * (math.lgamma(n + 1) - n * math.log(m))
    log_sum = float(terms.sum()) if k else 0.0
    return VerifierDecision(bool(log_sum >= threshold), log_sum, threshold, k)


# ---------------------------------------------------------------------------
# Mockup statistics
# ---------------------------------------------------------------------------

@dataclass
class MockupStatistics:
    """Per-outcome values of Per(A#_S), |Det(A_S)|^2 and Pr_B[S]."""

    occupations: np.ndarray
    per_abs2_matrix: np.ndarray
    det_abs2: np.ndarray
    rownorm_prob: np.ndarray

    def csv_rows(self, space) -> list[tuple[int, str, float]]:
        rows = []
        for occ, a, b, c in zip(self.occupations, self.per_abs2_matrix, self.det_abs2, self.rownorm_prob):
            r = space.rank(occ)
            rows += [(r, "per_abs2_matrix", float(a)), (r, "det_abs2", float(b)), (r, "rownorm_prob", float(c))]
        return rows


def mockup_statistics(A, batch: SampleBatch) -> MockupStatistics:
    A = as_complex_matrix(A)
    m, n = A.shape
    subs = A[batch.modes()]
    per_sharp = permanents(np.abs(subs) ** 2).real
    det2 = np.abs(determinants(subs)) ** 2
    occ = batch.occupations.astype(np.int64)
    q = row_squared_norms(A) / n
    with np.errstate(divide="ignore"):
        logq = np.log(q)
    logp = (
        math.lgamma(n + 1)
        + np.where(occ > 0, occ * np.where(occ > 0, logq, 0.0), 0.0).sum(axis=1)
        - special.gammaln(occ + 1).sum(axis=1)
    )
    return MockupStatistics(batch.occupations, per_sharp, det2, np.exp(logp))


# ---------------------------------------------------------------------------
# Gaussian surrogate
# ---------------------------------------------------------------------------

SURROGATE_ARMS = ("boson", "uniform", "fermion", "mockup-classical", "mockup-rownorm")


@dataclass
class SurrogateArm:
    kind: str
    log_r_star: np.ndarray
    weights: np.ndarray
    weight_rule: str  # "exact", "row-norm conditional" or "none"

    def fraction_at_least_one(self) -> Fraction:
        return weighted_fraction(self.log_r_star >= 0.0, self.weights)

    @property
    def effective_size(self) -> float:
        w = self.weights
        return float(w.sum() ** 2 / (w * w).sum())


def weighted_fraction(indicator: np.ndarray, weights: np.ndarray, z: float = 1.959963984540054) -> Fraction:
    """Self-normalized weighted mean of a 0/1 indicator with a delta-method interval."""
    ind = np.asarray(indicator, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    total = w.sum()
    if not total > 0:
        raise NumericalDegeneracyError("weights sum to zero")
    p = float((w * ind).sum() / total)
    se = float(math.sqrt(((w * (ind - p)) ** 2).sum()) / total)
    return Fraction(p, se, max(0.0, p - z * se), min(1.0, p + z * se), int(ind.size))


def surrogate_arm(kind: str, n: int, samples: int, rng: RngLike, *, exact_weight_max_n: int = 12,
                  chunk: int = 4096) -> SurrogateArm:
    """R* values and likelihood weights for one sampler arm under the Gaussian surrogate."""
    if kind not in SURROGATE_ARMS:
        raise ValueError(f"unknown arm {kind!r}")
    gen = as_generator(rng)
    logs, weights = [], []
    permanent_weight = kind in ("boson", "mockup-classical")
    rule = "none" if kind == "uniform" else "exact"
    if permanent_weight and n > exact_weight_max_n:
        rule = "row-norm conditional"
    log_nfact = math.lgamma(n + 1)
    done = 0
    while done < samples:
        b = min(chunk, samples - done)
        X = sample_gaussian_matrix(n, n, gen, size=b)
        lr = log_r_star_batch(X)
        if kind == "uniform":
            w = np.ones(b)
        elif kind == "mockup-rownorm" or rule == "row-norm conditional":
            w = np.exp(lr)
        elif kind == "boson":
            w = np.abs(permanents(X)) ** 2 / math.exp(log_nfact)
        elif kind == "fermion":
            w = np.abs(determinants(X)) ** 2 / math.exp(log_nfact)
        else:
            w = permanents(np.abs(X) ** 2).real / math.exp(log_nfact)
        logs.append(lr)
        weights.append(w)
        done += b
    return SurrogateArm(kind, np.concatenate(logs), np.concatenate(weights), rule)


def gaussian_p_samples(n: int, samples: int, rng: RngLike, chunk: int = 1 << 15) -> np.ndarray:
    """P = |Per(X)|^2/n! for iid complex Gaussian n x n matrices."""
    gen = as_generator(rng)
    out = np.empty(samples)
    for start in range(0, samples, chunk):
        b = min(chunk, samples - start)
        out[start:start + b] = p_statistic_batch(sample_gaussian_matrix(n, n, gen, size=b))
    return out


def gaussian_d_samples(n: int, samples: int, rng: RngLike, chunk: int = 1 << 15) -> np.ndarray:
    """D = |Det(X)|^2/n! for iid complex Gaussian n x n matrices."""
    gen = as_generator(rng)
    out = np.empty(samples)
    for start in range(0, samples, chunk):
        b = min(chunk, samples - start)
        out[start:start + b] = np.abs(determinants(sample_gaussian_matrix(n, n, gen, size=b))) ** 2
    return out / math.factorial(n)


def gaussian_log_r_samples(n: int, samples: int, rng: RngLike, max_entries: int = 1 << 22) -> np.ndarray:
    """ln R = sum of ln(squared row norms) for iid complex Gaussian n x n matrices."""
    gen = as_generator(rng)
    chunk = max(1, max_entries // (n * n))
    out = np.empty(samples)
    for start in range(0, samples, chunk):
        b = min(chunk, samples - start)
        out[start:start + b] = np.log(row_squared_norms(sample_gaussian_matrix(n, n, gen, size=b))).sum(axis=-1)
    return out


def _gaussian_p_and_r(n: int, samples: int, gen: np.random.Generator, chunk: int = 1 << 14):
    P = np.empty(samples)
    R = np.empty(samples)
    for start in range(0, samples, chunk):
        b = min(chunk, samples - start)
        X = sample_gaussian_matrix(n, n, gen, size=b)
        P[start:start + b] = p_statistic_batch(X)
        R[start:start + b] = r_star_batch(X)
    return P, R


def independence_check(n: int, samples: int, rng: RngLike) -> dict:
    """Correlation of Q and R* and the gap E[Q | R* >= 1] - E[Q | R* < 1], with standard errors."""
    P, R = _gaussian_p_and_r(n, samples, as_generator(rng))
    Q = P / R
    corr, _ = sps.pearsonr(Q, R)
    hi = R >= 1.0
    q_hi, q_lo = Q[hi], Q[~hi]
    gap = float(q_hi.mean() - q_lo.mean())
    gap_se = float(math.sqrt(q_hi.var(ddof=1) / q_hi.size + q_lo.var(ddof=1) / q_lo.size))
    return {
        "n": n,
        "samples": samples,
        "correlation": float(corr),
        "correlation_se": 1.0 / math.sqrt(samples),
        "conditional_mean_gap": gap,
        "conditional_mean_gap_se": gap_se,
        "mean_q": float(Q.mean()),
    }


def rownorm_gap_identity(n: int, samples: int, rng: RngLike) -> dict:
    """Compare Pr_H[R* >= 1] - Pr_N[R* >= 1] with (1/2) E_N|R* - 1|.

    H is the Gaussian law reweighted by P, estimated by self-normalized
    importance weights on the same Gaussian draws. The returned standard error
    belongs to the difference of the two sides (delta method).
    """
    P, R = _gaussian_p_and_r(n, samples, as_generator(rng))
    ind = (R >= 1.0).astype(np.float64)
    pbar = P.mean()
    h_frac = float((P * ind).mean() / pbar)
    n_frac = float(ind.mean())
    half_dev = 0.5 * np.abs(R - 1.0)
    lhs = h_frac - n_frac
    rhs = float(half_dev.mean())
    influence = (P * ind - h_frac * P) / pbar - ind - half_dev
    se = float(influence.std(ddof=1) / math.sqrt(samples))
    return {"n": n, "samples": samples, "lhs": lhs, "rhs": rhs, "difference": lhs - rhs, "difference_se": se,
            "h_fraction": h_frac, "n_fraction": n_frac}
