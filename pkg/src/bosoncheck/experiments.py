"""Seeded experiments behind the command-line runner.

Each ``cmd_*`` function takes an :class:`ExperimentConfig` and returns an
:class:`ExperimentReport`. Reports contain only seeded quantities, so the same
config always serializes to the same bytes; timing is left to the caller.

Random streams: trial ``t`` draws its interferometer from stream ``(t, 0)``
and arm ``i`` of that trial from ``(t, i + 1)``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import stats as sps

from .errors import ResourceLimitError
from .estimators import (
    Fraction,
    gaussian_d_samples,
    gaussian_p_samples,
    log_r_star_general_batch,
    permanent_verifier,
    rownorm_distinguisher,
    surrogate_arm,
    verifier_log_terms,
    wilson_interval,
)
from .linalg_core import RngStream, determinants, haar_column_orthonormal, load_matrix, sample_gaussian_matrix
from .outcomes import OutcomeSpace
from .samplers import SAMPLER_KINDS, SampleBatch, empirical_table, exact_boson_table, exact_fermion_table, sample_batch
from .stats import (
    ReferenceLaw,
    deviation_infima,
    histogram_density,
    ks_distance,
    lognormal_det_reference,
    total_variation,
    tv_from_uniform_collision_free,
)

__all__ = [
    "COMMANDS",
    "DEFAULTS",
    "TOLERANCES",
    "ExperimentConfig",
    "ExperimentReport",
    "Clause",
    "Statistic",
    "run",
    "cmd_pdf",
    "cmd_deviation",
    "cmd_tv",
    "cmd_distinguish",
    "cmd_verify",
    "cmd_fermion",
    "cmd_sample",
]

DISTINGUISH_ARMS = ("boson", "uniform", "mockup-classical", "mockup-rownorm", "fermion")
_ARM_SAMPLER = {
    "boson": "boson-exact",
    "uniform": "uniform",
    "mockup-classical": "mockup-classical",
    "mockup-rownorm": "mockup-rownorm",
    "fermion": "fermion",
}

DEFAULTS: dict[str, dict] = {
    "pdf": {"n": 6, "samples": 10**5},
    "deviation": {"n": 6, "samples": 10**5},
    "tv": {"n": 3, "m": 40, "trials": 20},
    "distinguish": {"n": 4, "m": 60, "samples": 10**4, "trials": 20},
    "verify": {"n": 4, "m": 60, "k": 30, "trials": 50, "k_sweep": (5, 10, 20, 40)},
    "fermion": {"n": 3, "m": 6, "samples": 10**5, "ks_samples": 10**4, "ks_sizes": (10, 25, 50)},
    "sample": {"n": 3, "m": 8, "samples": 1000, "kind": "boson-exact"},
}

TOLERANCES: dict[str, dict[str, float]] = {
    "pdf": {"mean_tol": 0.03, "ks_max": 0.02, "monotone_alpha": 0.05},
    "deviation": {"half_mean_abs_min": 0.31, "far_prob_min": 0.61, "closed_form_sigmas": 3.0},
    "tv": {"tv_min": 1 / 9, "pass_fraction": 0.9},
    "distinguish": {"gap_min": 0.08, "pass_fraction": 0.9, "blind_sigmas": 4.0},
    "verify": {"boson_accept_min": 0.9, "uniform_accept_max": 0.1, "amplification_drops_max": 0},
    "fermion": {"collisions_max": 0, "tv_max": 0.02, "ks_max": 0.05, "trend_margin": 0.0},
    "sample": {},
}
_SURROGATE_GAP_MIN = 0.10
_SURROGATE_DEFAULT_N = 20


# ---------------------------------------------------------------------------
# Config and report
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    name: str
    seed: int = 0
    n: Optional[int] = None
    m: Optional[int] = None
    samples: Optional[int] = None
    trials: Optional[int] = None
    mode: str = "exact"
    k: Optional[int] = None
    k_sweep: Optional[tuple] = None
    kind: Optional[str] = None
    loss_prob: float = 0.0
    matrix_path: Optional[str] = None
    ks_samples: Optional[int] = None
    ks_sizes: Optional[tuple] = None
    tolerances: dict = field(default_factory=dict)

    def resolved(self) -> "ExperimentConfig":
        """A copy with command defaults filled in and tolerance names checked."""
        if self.name not in DEFAULTS:
            raise ValueError(f"unknown experiment {self.name!r}; expected one of {sorted(DEFAULTS)}")
        if self.mode not in ("exact", "surrogate"):
            raise ValueError("mode must be 'exact' or 'surrogate'")
        values = asdict(self)
        for key, default in DEFAULTS[self.name].items():
            if values.get(key) is None:
                values[key] = default
        if self.name == "distinguish" and self.mode == "surrogate" and self.n is None:
            values["n"] = _SURROGATE_DEFAULT_N
        tol = dict(TOLERANCES[self.name])
        if self.name == "distinguish" and self.mode == "surrogate":
            tol["gap_min"] = _SURROGATE_GAP_MIN
        unknown = set(self.tolerances) - set(tol)
        if unknown:
            raise ValueError(f"unknown tolerance(s) {sorted(unknown)} for {self.name}; known: {sorted(tol)}")
        tol.update({k: float(v) for k, v in self.tolerances.items()})
        values["tolerances"] = tol
        for key in ("k_sweep", "ks_sizes"):
            if values[key] is not None:
                values[key] = tuple(int(v) for v in values[key])
        cfg = ExperimentConfig(**values)
        for key in ("n", "m", "samples", "trials", "k", "ks_samples"):
            v = getattr(cfg, key)
            if v is not None and v < 1:
                raise ValueError(f"{key} must be >= 1, got {v}")
        return cfg

    def stream(self, *ids: int) -> RngStream:
        return RngStream(self.seed, tuple(ids))

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("k_sweep", "ks_sizes"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d


@dataclass
class Statistic:
    name: str
    value: float
    stderr: Optional[float] = None
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None

    @classmethod
    def from_fraction(cls, name: str, f: Fraction) -> "Statistic":
        return cls(name, f.value, f.stderr, f.ci_low, f.ci_high)


@dataclass
class Clause:
    """One pass/fail line; ``claim`` is the tag the acceptance suite looks up."""

    claim: str
    description: str
    value: float
    tolerance: str
    threshold: float
    passed: bool


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    statistics: list[Statistic] = field(default_factory=list)
    clauses: list[Clause] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    artifacts: dict[str, tuple[list[str], list[tuple]]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    def stat(self, name: str) -> Statistic:
        for s in self.statistics:
            if s.name == name:
                return s
        raise KeyError(name)

    def clause(self, claim: str) -> Clause:
        for c in self.clauses:
            if c.claim == claim:
                return c
        raise KeyError(claim)

    def add_stat(self, name: str, value, stderr=None, ci=None) -> Statistic:
        lo, hi = (None, None) if ci is None else (float(ci[0]), float(ci[1]))
        s = Statistic(name, float(value), None if stderr is None else float(stderr), lo, hi)
        self.statistics.append(s)
        return s

    def check(self, claim: str, description: str, value, tolerance: str, ok: bool) -> Clause:
        c = Clause(claim, description, float(value), tolerance, float(self.config.tolerances[tolerance]), bool(ok))
        self.clauses.append(c)
        return c

    def to_dict(self) -> dict:
        return {
            "experiment": self.config.name,
            "config": self.config.to_dict(),
            "statistics": [asdict(s) for s in self.statistics],
            "clauses": [asdict(c) for c in self.clauses],
            "passed": self.passed,
            "notes": list(self.notes),
            "artifacts": sorted(self.artifacts),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["section", "name", "value", "stderr", "ci_low", "ci_high", "tolerance", "threshold", "passed"])
        for s in self.statistics:
            w.writerow(["statistic", s.name, repr(s.value), _fmt(s.stderr), _fmt(s.ci_low), _fmt(s.ci_high),
                        "", "", ""])
        for c in self.clauses:
            w.writerow(["clause", c.claim, repr(c.value), "", "", "", c.tolerance, repr(c.threshold),
                        "pass" if c.passed else "fail"])
        for note in self.notes:
            w.writerow(["note", note, "", "", "", "", "", "", ""])
        return buf.getvalue()

    def artifact_csv(self, name: str) -> str:
        header, rows = self.artifacts[name]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
        return buf.getvalue()

    def summary_lines(self) -> list[str]:
        return [
            f"{'PASS' if c.passed else 'FAIL'} {c.claim}: {c.value:.6g} ({c.tolerance}={c.threshold:.6g})"
            for c in self.clauses
        ]


def _fmt(v) -> str:
    return "" if v is None else repr(v)


def _mean_stat(report: ExperimentReport, name: str, x: np.ndarray) -> Statistic:
    se = x.std(ddof=1) / math.sqrt(x.size)
    m = x.mean()
    return report.add_stat(name, m, se, (m - 1.959963984540054 * se, m + 1.959963984540054 * se))


def _trial_fraction(report: ExperimentReport, name: str, flags: list[bool]) -> float:
    hits, total = int(sum(flags)), len(flags)
    report.add_stat(name, hits / total, None, wilson_interval(hits, total))
    return hits / total


def _monotone_violations(counts: np.ndarray, alpha: float) -> tuple[float, int]:
    """Largest standardized rise between adjacent bins, and how many rises exceed the Bonferroni level.

    Adjacent bin counts are treated as independent Poisson counts; the
    critical value is ``max(2, z_{alpha/(bins-1)})``.
    """
    c = counts.astype(np.float64)
    rise = c[1:] - c[:-1]
    se = np.sqrt(np.maximum(c[1:] + c[:-1], 1.0))
    z = rise / se
    crit = _monotone_critical(c.size, alpha)
    return float(z.max()), int(np.count_nonzero(z > crit))


def _monotone_critical(bins: int, alpha: float) -> float:
    return max(2.0, float(sps.norm.isf(alpha / (bins - 1))))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_pdf(config: ExperimentConfig) -> ExperimentReport:
    """Densities of P = |Per(X)|^2/n! and D = |Det(X)|^2/n! for Gaussian X."""
    cfg = config.resolved()
    if cfg.n > 8:
        raise ResourceLimitError(f"pdf needs n <= 8, got {cfg.n}")
    rep = ExperimentReport(cfg)
    bins, lo, hi = 100, 0.0, 5.0
    alpha = cfg.tolerances["monotone_alpha"]
    crit = _monotone_critical(bins, alpha)
    rep.notes.append(f"monotone check: adjacent-bin rises above {crit:.4f} standard errors count as violations")
    for label, draw, stream in (("p", gaussian_p_samples, 1), ("d", gaussian_d_samples, 2)):
        x = draw(cfg.n, cfg.samples, cfg.stream(0, stream))
        mean = _mean_stat(rep, f"{label}_mean", x)
        rep.check(f"pdf.unit-mean.{label}", f"E[{label.upper()}] = 1", abs(mean.value - 1.0), "mean_tol",
                  abs(mean.value - 1.0) <= cfg.tolerances["mean_tol"])
        counts, _ = np.histogram(x, bins=np.linspace(lo, hi, bins + 1))
        zmax, bad = _monotone_violations(counts, alpha)
        rep.add_stat(f"{label}_max_rise_z", zmax)
        rep.check(f"pdf.monotone.{label}", f"{label.upper()} density nonincreasing up to bin noise", bad,
                  "monotone_alpha", bad == 0)
        rows = histogram_density(x, bins, lo, hi)
        rep.artifacts[f"{label}_density"] = (["bin_left", "bin_right", "density"], rows)
        if cfg.n == 1 and label == "p":
            ks = ks_distance(np.sort(x), ReferenceLaw("exponential", (1.0,)))
            rep.add_stat("p_ks_exponential", ks)
            rep.check("pdf.exponential-n1", "P matches Exponential(1) at n=1", ks, "ks_max",
                      ks <= cfg.tolerances["ks_max"])
    return rep


def cmd_deviation(config: ExperimentConfig) -> ExperimentReport:
    """Spread of P around its mean: (1/2)E|P-1| and Pr[|P-1| >= 1/2]."""
    cfg = config.resolved()
    rep = ExperimentReport(cfg)
    P = gaussian_p_samples(cfg.n, cfg.samples, cfg.stream(0, 1))
    dev = np.abs(P - 1.0)
    half = _mean_stat(rep, "half_mean_abs_deviation", 0.5 * dev)
    far_hits = int(np.count_nonzero(dev >= 0.5))
    far = far_hits / P.size
    far_se = math.sqrt(far * (1 - far) / P.size)
    rep.add_stat("far_from_one_probability", far, far_se, wilson_interval(far_hits, P.size))
    ref = deviation_infima()
    for key, val in ref.items():
        rep.add_stat(f"reference_{key}", val)
    rep.check("deviation.half-mean-abs", "(1/2)E|P-1| above the exponential-mixture infimum", half.value,
              "half_mean_abs_min", half.value >= cfg.tolerances["half_mean_abs_min"])
    rep.check("deviation.far-from-one", "Pr[|P-1| >= 1/2] above the exponential-mixture infimum", far,
              "far_prob_min", far >= cfg.tolerances["far_prob_min"])
    if cfg.n == 1:
        k = cfg.tolerances["closed_form_sigmas"]
        exact_half = math.exp(-1.0)
        exact_far = 1.0 - (math.exp(-0.5) - math.exp(-1.5))
        rep.add_stat("closed_form_half_mean_abs_deviation", exact_half)
        rep.add_stat("closed_form_far_from_one_probability", exact_far)
        z1 = abs(half.value - exact_half) / half.stderr
        z2 = abs(far - exact_far) / far_se
        rep.check("deviation.closed-form-n1.half-mean-abs", "n=1 matches the Exponential(1) closed form", z1,
                  "closed_form_sigmas", z1 <= k)
        rep.check("deviation.closed-form-n1.far-from-one", "n=1 matches the Exponential(1) closed form", z2,
                  "closed_form_sigmas", z2 <= k)
    return rep


def cmd_tv(config: ExperimentConfig) -> ExperimentReport:
    """Exact distance between the boson law and the uniform law on collision-free outcomes."""
    cfg = config.resolved()
    n, m = cfg.n, cfg.m
    if n > 5 or math.comb(m, n) > 10**5:
        raise ResourceLimitError(f"tv needs n <= 5 and C(m, n) <= 10^5, got n={n}, C={math.comb(m, n)}")
    rep = ExperimentReport(cfg)
    space = OutcomeSpace(m, n, collision_free=True)
    alpha = n * n / m
    big_m = m ** n / math.factorial(n)
    rows, flags = [], []
    for t in range(cfg.trials):
        A = haar_column_orthonormal(m, n, cfg.stream(t, 0))
        restricted = exact_boson_table(A, space)
        tv = tv_from_uniform_collision_free(restricted)
        renorm = 0.5 * float(np.abs(restricted.probs / restricted.total_mass - 1.0 / space.size).sum())
        far = float(np.mean(np.abs(big_m * restricted.probs - 1.0) >= 0.5))
        bound = (1 - alpha) / 4 * far - alpha / (2 - 2 * alpha) if alpha < 1 else float("nan")
        flags.append(tv >= cfg.tolerances["tv_min"])
        rows.append((t, tv, renorm, restricted.total_mass, far, bound))
    arr = np.array([r[1:] for r in rows])
    rep.add_stat("tv_mean", arr[:, 0].mean(), arr[:, 0].std(ddof=1) / math.sqrt(len(rows)) if len(rows) > 1 else None)
    rep.add_stat("tv_min", arr[:, 0].min())
    rep.add_stat("tv_renormalized_mean", arr[:, 1].mean())
    rep.add_stat("collision_free_mass_mean", arr[:, 2].mean())
    rep.add_stat("far_fraction_mean", arr[:, 3].mean())
    rep.add_stat("lower_bound_mean", arr[:, 4].mean())
    frac = _trial_fraction(rep, "trials_above_one_ninth", flags)
    rep.check("tv.one-ninth", "fraction of trials with TV >= 1/9", frac, "pass_fraction",
              frac >= cfg.tolerances["pass_fraction"])
    if m < n ** 5.1:
        rep.notes.append(
            f"regime caveat: m={m} is below n^5.1={n ** 5.1:.1f}; the 1/9 line is a reference expectation here, "
            "not a guaranteed bound"
        )
    rep.artifacts["trials"] = (["trial", "tv", "tv_renormalized", "collision_free_mass", "far_fraction",
                                "lower_bound"], rows)
    return rep


def _distinguish_exact(cfg: ExperimentConfig, rep: ExperimentReport) -> dict[str, list[Fraction]]:
    n, m = cfg.n, cfg.m
    if n > 6:
        raise ResourceLimitError(f"exact mode needs n <= 6, got {n}; use --mode surrogate")
    out: dict[str, list[Fraction]] = {a: [] for a in DISTINGUISH_ARMS}
    hist: dict[str, np.ndarray] = {}
    for t in range(cfg.trials):
        A = haar_column_orthonormal(m, n, cfg.stream(t, 0))
        for i, arm in enumerate(DISTINGUISH_ARMS):
            batch = sample_batch(_ARM_SAMPLER[arm], A, cfg.samples, cfg.stream(t, i + 1))
            out[arm].append(rownorm_distinguisher(A, batch))
            if t == 0:
                hist[arm] = np.exp(log_r_star_general_batch(A, batch.occupations))
    rows = []
    for arm in DISTINGUISH_ARMS:
        rows += [(arm, *r) for r in histogram_density(hist[arm], 100, 0.0, 5.0)]
    rep.artifacts["rstar_density"] = (["arm", "bin_left", "bin_right", "density"], rows)
    return out


def _distinguish_surrogate(cfg: ExperimentConfig, rep: ExperimentReport) -> dict[str, list[Fraction]]:
    if cfg.n > 50:
        raise ResourceLimitError(f"surrogate mode needs n <= 50, got {cfg.n}")
    out: dict[str, list[Fraction]] = {a: [] for a in DISTINGUISH_ARMS}
    rules = {}
    rows = []
    for t in range(cfg.trials):
        for i, arm in enumerate(DISTINGUISH_ARMS):
            res = surrogate_arm(arm, cfg.n, cfg.samples, cfg.stream(t, i + 1))
            out[arm].append(res.fraction_at_least_one())
            rules[arm] = res.weight_rule
            if t == 0:
                rows += [(arm, *r) for r in histogram_density(np.exp(res.log_r_star), 100, 0.0, 5.0, res.weights)]
    rep.artifacts["rstar_density"] = (["arm", "bin_left", "bin_right", "density"], rows)
    rep.notes.append("surrogate mode: submatrices replaced by iid complex Gaussian matrices")
    for arm in DISTINGUISH_ARMS:
        rep.notes.append(f"surrogate weight for {arm}: {rules[arm]}")
    return out


def cmd_distinguish(config: ExperimentConfig) -> ExperimentReport:
    """Row-norm acceptance fractions for boson, uniform and mockup arms."""
    cfg = config.resolved()
    rep = ExperimentReport(cfg)
    fr = _distinguish_surrogate(cfg, rep) if cfg.mode == "surrogate" else _distinguish_exact(cfg, rep)
    k_sig = cfg.tolerances["blind_sigmas"]
    for arm in DISTINGUISH_ARMS:
        vals = np.array([f.value for f in fr[arm]])
        ses = np.array([f.stderr for f in fr[arm]])
        rep.add_stat(f"{arm}_fraction_mean", vals.mean(), math.sqrt((ses ** 2).sum()) / vals.size)
    gaps = [b.value - u.value for b, u in zip(fr["boson"], fr["uniform"])]
    rep.add_stat("gap_mean", float(np.mean(gaps)))
    rep.add_stat("gap_min", float(np.min(gaps)))
    frac = _trial_fraction(rep, "gap_pass_fraction", [g >= cfg.tolerances["gap_min"] for g in gaps])
    rep.check("distinguish.rownorm-gap", "fraction of trials with boson-uniform gap >= gap_min", frac,
              "pass_fraction", frac >= cfg.tolerances["pass_fraction"])
    for arm in ("mockup-classical", "mockup-rownorm", "fermion"):
        z = [abs(a.value - b.value) / max(math.hypot(a.stderr, b.stderr), 1e-300)
             for a, b in zip(fr[arm], fr["boson"])]
        rep.add_stat(f"{arm}_max_z_vs_boson", max(z))
        ok = [zi <= k_sig for zi in z]
        f = _trial_fraction(rep, f"{arm}_blind_fraction", ok)
        rep.check(f"distinguish.blindness.{arm}", f"{arm} matches boson within {k_sig:g} combined SE", f,
                  "pass_fraction", f >= cfg.tolerances["pass_fraction"])
    return rep


def cmd_verify(config: ExperimentConfig) -> ExperimentReport:
    """Acceptance rates of the permanent verifier on boson and uniform batches."""
    cfg = config.resolved()
    n, m = cfg.n, cfg.m
    if n > 9:
        raise ResourceLimitError(f"verify needs n <= 9, got {n}")
    rep = ExperimentReport(cfg)
    ks = sorted(set(cfg.k_sweep) | {cfg.k})
    kmax = ks[-1]
    threshold = math.lgamma(n + 1) - n * math.log(m)
    acc = {arm: {k: [] for k in ks} for arm in ("boson", "uniform")}
    decisions = []
    for t in range(cfg.trials):
        A = haar_column_orthonormal(m, n, cfg.stream(t, 0))
        for i, arm in enumerate(("boson", "uniform")):
            kind = "boson-exact" if arm == "boson" else "uniform"
            batch = sample_batch(kind, A, kmax, cfg.stream(t, i + 1), method="sequential")
            terms = verifier_log_terms(A, batch)
            sums = np.cumsum(terms)
            for k in ks:
                acc[arm][k].append(bool(sums[k - 1] >= k * threshold))
            d = permanent_verifier(A, SampleBatch(batch.kind, batch.occupations[:cfg.k]))
            decisions.append((t, arm, json.dumps(d.to_dict(), sort_keys=True)))
    for arm in ("boson", "uniform"):
        for k in ks:
            hits = int(sum(acc[arm][k]))
            rep.add_stat(f"{arm}_acceptance_k{k}", hits / cfg.trials, None, wilson_interval(hits, cfg.trials))
    b = rep.stat(f"boson_acceptance_k{cfg.k}").value
    u = rep.stat(f"uniform_acceptance_k{cfg.k}").value
    rep.check("verify.boson-accept", f"boson batches accepted at k={cfg.k}", b, "boson_accept_min",
              b >= cfg.tolerances["boson_accept_min"])
    rep.check("verify.uniform-reject", f"uniform batches accepted at k={cfg.k}", u, "uniform_accept_max",
              u <= cfg.tolerances["uniform_accept_max"])
    gaps = []
    for k in sorted(cfg.k_sweep):
        g = rep.stat(f"boson_acceptance_k{k}").value - rep.stat(f"uniform_acceptance_k{k}").value
        gaps.append(g)
        rep.add_stat(f"gap_k{k}", g)
    drops = sum(1 for a, b2 in zip(gaps, gaps[1:]) if b2 < a)
    rep.check("verify.amplification", "acceptance gap nondecreasing over the k sweep", drops,
              "amplification_drops_max", drops <= cfg.tolerances["amplification_drops_max"])
    rep.artifacts["decisions"] = (["trial", "arm", "decision"], decisions)
    return rep


def cmd_fermion(config: ExperimentConfig) -> ExperimentReport:
    """Fermion sampler against its exact table, and lognormal convergence of |Det|^2."""
    cfg = config.resolved()
    n, m = cfg.n, cfg.m
    space = OutcomeSpace(m, n, collision_free=True)
    if space.size > 10**6:
        raise ResourceLimitError(f"fermion table needs C(m, n) <= 10^6, got {space.size}")
    rep = ExperimentReport(cfg)
    A = haar_column_orthonormal(m, n, cfg.stream(0, 0))
    batch = sample_batch("fermion", A, cfg.samples, cfg.stream(0, 1))
    collisions = int(np.count_nonzero(batch.occupations.max(axis=1) > 1))
    rep.add_stat("collision_outcomes", collisions)
    rep.check("fermion.pauli", "outcomes with a doubly occupied mode", collisions, "collisions_max",
              collisions <= cfg.tolerances["collisions_max"])
    tv = total_variation(empirical_table(batch, space), exact_fermion_table(A))
    rep.add_stat("sampler_tv", tv)
    rep.check("fermion.sampler-tv", "empirical vs exact determinant table", tv, "tv_max",
              tv <= cfg.tolerances["tv_max"])
    std_normal = ReferenceLaw("standard-normal")
    ks_vals = []
    for j, size in enumerate(cfg.ks_sizes):
        law = lognormal_det_reference(size)
        mu, var = law.params
        logs = _log_abs_det2(size, cfg.ks_samples, cfg.stream(1, j))
        ks = ks_distance(np.sort((logs - mu) / math.sqrt(var)), std_normal)
        ks_vals.append(ks)
        rep.add_stat(f"lognormal_ks_n{size}", ks)
    last = cfg.ks_sizes[-1]
    rep.check("fermion.lognormal-ks", f"standardized ln|Det|^2 vs normal at n={last}", ks_vals[-1], "ks_max",
              ks_vals[-1] <= cfg.tolerances["ks_max"])
    rep.check("fermion.lognormal-trend", f"KS at n={last} below KS at n={cfg.ks_sizes[0]}",
              ks_vals[-1] - ks_vals[0], "trend_margin", ks_vals[-1] - ks_vals[0] < -cfg.tolerances["trend_margin"])
    return rep


def _log_abs_det2(n: int, samples: int, rng: RngStream, max_entries: int = 1 << 22) -> np.ndarray:
    gen = rng.generator()
    chunk = max(1, max_entries // (n * n))
    out = np.empty(samples)
    for start in range(0, samples, chunk):
        b = min(chunk, samples - start)
        out[start:start + b] = np.log(np.abs(determinants(sample_gaussian_matrix(n, n, gen, size=b))) ** 2)
    return out


def cmd_sample(config: ExperimentConfig):
    """Raw sampler batch; returns a ``SampleBatch`` rather than a report."""
    cfg = config.resolved()
    if cfg.kind not in SAMPLER_KINDS:
        raise ValueError(f"unknown sampler kind {cfg.kind!r}; expected one of {SAMPLER_KINDS}")
    if cfg.matrix_path:
        A = load_matrix(cfg.matrix_path)
    else:
        A = haar_column_orthonormal(cfg.m, cfg.n, cfg.stream(0, 0))
    return sample_batch(cfg.kind, A, cfg.samples, cfg.stream(0, 1), loss_prob=cfg.loss_prob)


COMMANDS: dict[str, Callable] = {
    "pdf": cmd_pdf,
    "deviation": cmd_deviation,
    "tv": cmd_tv,
    "distinguish": cmd_distinguish,
    "verify": cmd_verify,
    "fermion": cmd_fermion,
    "sample": cmd_sample,
}


def run(config: ExperimentConfig):
    if config.name not in COMMANDS:
        raise ValueError(f"unknown experiment {config.name!r}; expected one of {sorted(COMMANDS)}")
    return COMMANDS[config.name](config)
