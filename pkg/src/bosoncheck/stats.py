"""Distributional tools: variation distance, KS distances, log-chi^2 cumulants, reference laws."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, optimize, special, stats as sps

from .linalg_core import RngLike, as_generator
from .samplers import ProbabilityTable

__all__ = [
    "EULER_GAMMA",
    "total_variation",
    "product_table",
    "tv_from_uniform_collision_free",
    "ReferenceLaw",
    "ks_distance",
    "ks_two_sample",
    "log_chisq_moments",
    "log_chisq_third_abs_moment",
    "berry_esseen_ratio",
    "lognormal_det_reference",
    "det_log_moments_exact",
    "chisq_product_sample",
    "DistributionSummary",
    "summarize",
    "moment_checks",
    "exponential_half_mean_abs_deviation",
    "exponential_far_from_one_probability",
    "deviation_infima",
    "histogram_density",
]

EULER_GAMMA = float(np.euler_gamma)


# ---------------------------------------------------------------------------
# Variation distance
# ---------------------------------------------------------------------------

def total_variation(p: ProbabilityTable, q: ProbabilityTable) -> float:
    """(1/2) sum_x |p_x - q_x| over a shared outcome space."""
    if p.space != q.space:
        raise ValueError(f"tables live on different spaces: {p.space} vs {q.space}")
    return 0.5 * float(np.abs(p.probs - q.probs).sum())


def product_table(probs: Sequence[float], k: int) -> np.ndarray:
    """Probabilities of the k-fold product distribution, flattened in row-major order."""
    out = np.array([1.0])
    base = np.asarray(probs, dtype=np.float64)
    for _ in range(k):
        out = np.outer(out, base).ravel()
    return out


def tv_from_uniform_collision_free(restricted: ProbabilityTable) -> float:
    """Distance from a full-space law to the uniform law on the collision-free outcomes.

    ``restricted`` holds the law's (unnormalized) probabilities on the
    collision-free space; the mass it leaves on colliding outcomes counts fully.
    """
    if not restricted.space.collision_free:
        raise ValueError("expected a table over the collision-free space")
    u = 1.0 / restricted.space.size
    inside = 0.5 * float(np.abs(restricted.probs - u).sum())
    return inside + 0.5 * max(0.0, 1.0 - restricted.total_mass)


# ---------------------------------------------------------------------------
# Reference laws and KS distances
# ---------------------------------------------------------------------------

_LAW_KINDS = ("standard-normal", "normal", "lognormal", "complex-chisq", "exponential")


@dataclass(frozen=True)
class ReferenceLaw:
    """A continuous law used as a KS reference.

    ``normal``/``lognormal`` take ``(mean, variance)`` of the (log-)normal,
    ``complex-chisq`` takes the degrees of freedom, ``exponential`` the rate.
    """

    kind: str
    params: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in _LAW_KINDS:
            raise ValueError(f"unknown law {self.kind!r}")
        p = self.params
        if self.kind in ("normal", "lognormal") and (len(p) != 2 or not p[1] > 0):
            raise ValueError("normal/lognormal need (mean, variance) with variance > 0")
        if self.kind == "complex-chisq" and (len(p) != 1 or p[0] < 1):
            raise ValueError("complex-chisq needs one degree-of-freedom parameter >= 1")
        if self.kind == "exponential" and (len(p) != 1 or not p[0] > 0):
            raise ValueError("exponential needs a positive rate")

    @property
    def distribution(self):
        p = self.params
        if self.kind == "standard-normal":
            return sps.norm()
        if self.kind == "normal":
            return sps.norm(loc=p[0], scale=math.sqrt(p[1]))
        if self.kind == "lognormal":
            return sps.lognorm(s=math.sqrt(p[1]), scale=math.exp(p[0]))
        if self.kind == "complex-chisq":
            return sps.gamma(a=p[0])
        return sps.expon(scale=1.0 / p[0])

    def cdf(self, x):
        return self.distribution.cdf(x)


def ks_distance(samples, law: ReferenceLaw) -> float:
    """sup over the sample points of |F_empirical(x) - F_law(x)|, F_empirical right-continuous."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1 or x.size < 100:
        raise ValueError("need a 1-D array of at least 100 samples")
    if np.any(np.diff(x) < 0):
        raise ValueError("samples must be sorted ascending")
    ecdf = np.searchsorted(x, x, side="right") / x.size
    return float(np.max(np.abs(ecdf - law.cdf(x))))


def ks_two_sample(a, b) -> float:
    return float(sps.ks_2samp(np.asarray(a), np.asarray(b)).statistic)


# ---------------------------------------------------------------------------
# log of a complex chi^2 variable
# ---------------------------------------------------------------------------

def log_chisq_moments(n: int) -> tuple[float, float, float]:
    """Mean, variance and fourth central moment of ln(|x_1|^2 + ... + |x_n|^2).

    Closed forms from the cumulants kappa_k = polygamma(k-1, n), written with
    partial harmonic and zeta sums.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    j = np.arange(1, n, dtype=np.float64)
    mean = -EULER_GAMMA + float((1.0 / j).sum())
    var = math.pi ** 2 / 6 - float((1.0 / j ** 2).sum())
    fourth = 6 * (math.pi ** 4 / 90 - float((1.0 / j ** 4).sum())) + 3 * var ** 2
    return mean, var, fourth


def _log_chisq_logpdf(y, n):
    return n * y - np.exp(y) - special.gammaln(n)


def log_chisq_third_abs_moment(n: int) -> float:
    """E|l_n - E l_n|^3 by quadrature over the density of l_n."""
    mean, var, _ = log_chisq_moments(n)
    sd = math.sqrt(var)

    def f(y):
        return abs(y - mean) ** 3 * math.exp(_log_chisq_logpdf(y, n))

    lo, hi = mean - 40 * sd, mean + 15 * sd
    left, _ = integrate.quad(f, lo, mean, limit=200, epsabs=0, epsrel=1e-10)
    right, _ = integrate.quad(f, mean, hi, limit=200, epsabs=0, epsrel=1e-10)
    return left + right


def berry_esseen_ratio(n: int) -> float:
    """rho / (sigma^3 sqrt(n)) for a sum of n iid copies of l_n."""
    _, var, _ = log_chisq_moments(n)
    return log_chisq_third_abs_moment(n) / (var ** 1.5 * math.sqrt(n))


def lognormal_det_reference(n: int) -> ReferenceLaw:
    """Limiting lognormal law of |Det(X)|^2, X an n x n complex Gaussian matrix.

    ln|Det|^2 has mean n ln n - n + 1/2 and variance ln n + 1 + gamma up to
    O(1/n) and O(1/n^2) corrections.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    return ReferenceLaw("lognormal", (n * math.log(n) - n + 0.5, math.log(n) + 1 + EULER_GAMMA))


def det_log_moments_exact(n: int) -> tuple[float, float]:
    """Exact mean and variance of ln|Det(X)|^2: sums of digamma/trigamma over 1..n."""
    t = np.arange(1, n + 1, dtype=np.float64)
    return float(special.digamma(t).sum()), float(special.polygamma(1, t).sum())


def chisq_product_sample(n: int, rng: RngLike, size: int | None = None):
    """Product of independent complex chi^2 variables with 1, 2, ..., n degrees of freedom."""
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = as_generator(rng)
    shape = (1 if size is None else size, n)
    draws = gen.standard_gamma(np.arange(1, n + 1, dtype=np.float64), size=shape)
    out = np.exp(np.log(draws).sum(axis=1))
    return float(out[0]) if size is None else out


# ---------------------------------------------------------------------------
# Summaries and moment checks
# ---------------------------------------------------------------------------

@dataclass
class DistributionSummary:
    mean: float
    variance: float
    fourth_central_moment: float
    second_moment: float
    sample_count: int
    mean_se: float
    second_moment_se: float
    flags: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def summarize(samples) -> DistributionSummary:
    x = np.asarray(samples, dtype=np.float64)
    k = x.size
    if k < 1:
        raise ValueError("need at least one sample")
    mean = float(x.mean())
    c = x - mean
    var = float((c ** 2).mean())
    sq = x * x
    return DistributionSummary(
        mean=mean,
        variance=var,
        fourth_central_moment=float((c ** 4).mean()),
        second_moment=float(sq.mean()),
        sample_count=k,
        mean_se=math.sqrt(var / k),
        second_moment_se=float(sq.std() / math.sqrt(k)),
    )


def moment_checks(p_samples, n: int, *, mean_tol: float = 0.03, second_rel_tol: float = 0.15) -> DistributionSummary:
    """Check E[P] = 1 (absolute ``mean_tol``) and E[P^2] = n + 1 (relative ``second_rel_tol``)."""
    x = np.asarray(p_samples, dtype=np.float64)
    if x.size < 10**4:
        raise ValueError("moment checks need at least 10^4 samples")
    s = summarize(x)
    s.flags = {
        "mean_is_one": abs(s.mean - 1.0) <= mean_tol,
        "mean_z": (s.mean - 1.0) / s.mean_se,
        "second_moment_is_n_plus_1": abs(s.second_moment - (n + 1)) <= second_rel_tol * (n + 1),
        "second_moment_z": (s.second_moment - (n + 1)) / s.second_moment_se,
    }
    return s


# ---------------------------------------------------------------------------
# Exponential-mixture deviation bounds
# ---------------------------------------------------------------------------

def exponential_half_mean_abs_deviation(c: float) -> float:
    """(1/2) E|Y - 1| for Y exponential with rate c."""
    return 0.5 - 0.5 / c + 1.0 / (c * math.exp(c))


def exponential_far_from_one_probability(c: float) -> float:
    """Pr[|Y - 1| >= 1/2] for Y exponential with rate c."""
    return 1.0 - (math.exp(-c / 2) - math.exp(-1.5 * c))


def deviation_infima() -> dict:
    """Minima over the rate c of the two exponential deviation functionals."""
    a = optimize.minimize_scalar(exponential_half_mean_abs_deviation, bounds=(0.1, 10), method="bounded",
                                 options={"xatol": 1e-10})
    b = optimize.minimize_scalar(exponential_far_from_one_probability, bounds=(0.1, 10), method="bounded",
                                 options={"xatol": 1e-10})
    return {
        "half_mean_abs_deviation": float(a.fun),
        "half_mean_abs_deviation_rate": float(a.x),
        "far_from_one_probability": float(b.fun),
        "far_from_one_probability_rate": float(b.x),
    }


def histogram_density(samples, bins, lo: float, hi: float, weights=None) -> list[tuple[float, float, float]]:
    """(bin-left, bin-right, density) rows; density is normalized over all samples, not just [lo, hi]."""
    x = np.asarray(samples, dtype=np.float64)
    w = None if weights is None else np.asarray(weights, dtype=np.float64)
    edges = np.linspace(lo, hi, bins + 1) if np.isscalar(bins) else np.asarray(bins, dtype=np.float64)
    counts, edges = np.histogram(x, bins=edges, weights=w)
    total = x.size if w is None else w.sum()
    dens = counts / (total * np.diff(edges))
    return [(float(a), float(b), float(d)) for a, b, d in zip(edges[:-1], edges[1:], dens)]
