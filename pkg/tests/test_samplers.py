import itertools
import math

import numpy as np
import pytest

from bosoncheck.errors import NumericalDegeneracyError, ResourceLimitError
from bosoncheck.linalg_core import RngStream, haar_column_orthonormal, permanent_naive
from bosoncheck.outcomes import OutcomeSpace
from bosoncheck.samplers import (
    ProbabilityTable,
    SampleBatch,
    empirical_table,
    exact_boson_table,
    exact_fermion_table,
    exact_mockup_classical_table,
    exact_mockup_rownorm_table,
    sample_batch,
    sample_boson_sequential,
    sample_fermion,
    sample_from_table,
    sample_lossy_boson,
    sample_mockup_classical,
    sample_mockup_rownorm,
    sample_uniform,
    uniform_table,
)
from bosoncheck.stats import total_variation


def haar(m, n, seed):
    return haar_column_orthonormal(m, n, RngStream(seed))


def tv_to(batch, table):
    return total_variation(empirical_table(batch, table.space), table)


# -- exact tables ------------------------------------------------------------------

def test_identity_boson_table_is_point_mass():
    t = exact_boson_table(np.eye(3))
    assert t.prob((1, 1, 1)) == pytest.approx(1.0)
    assert t.total_mass == pytest.approx(1.0)


def test_single_photon_table():
    A = haar(2, 2, 1)[:, :1]
    t = exact_boson_table(A)
    assert np.allclose(t.probs, np.abs(A[:, 0]) ** 2)


@pytest.mark.parametrize("m,n", [(6, 2), (8, 2), (10, 3), (12, 3)])
def test_boson_table_normalized(m, n):
    for seed in range(50):
        assert abs(exact_boson_table(haar(m, n, seed)).total_mass - 1.0) <= 1e-9


def test_boson_table_matches_naive_permanents():
    A = haar(4, 3, 2)
    t = exact_boson_table(A)
    for S in t.space.enumerate():
        rows = [i for i, s in enumerate(S) for _ in range(s)]
        expected = abs(permanent_naive(A[rows])) ** 2 / math.prod(math.factorial(s) for s in S)
        assert t.prob(S) == pytest.approx(expected, abs=1e-14)


def test_collision_free_table_is_restriction():
    A = haar(7, 3, 3)
    full = exact_boson_table(A)
    cf = exact_boson_table(A, OutcomeSpace(7, 3, True))
    assert not cf.normalized
    for S in cf.space.enumerate():
        assert cf.prob(S) == pytest.approx(full.prob(S), abs=1e-15)
    assert exact_boson_table(A, OutcomeSpace(7, 3, True), renormalize=True).total_mass == pytest.approx(1.0)


def test_collision_mass_below_birthday_bound():
    for m in (50, 100):
        masses = []
        for seed in range(20):
            cf = exact_boson_table(haar(m, 3, 1000 + seed), OutcomeSpace(m, 3, True))
            masses.append(1.0 - cf.total_mass)
        assert np.mean(masses) < 2 * 9 / m


def test_table_rejects_non_orthonormal():
    with pytest.raises(ValueError):
        exact_boson_table(np.ones((4, 2)))


def test_table_size_guard():
    A = haar(40, 10, 4)
    with pytest.raises(ResourceLimitError):
        exact_boson_table(A)


def test_fermion_table_normalized_and_zero_at_identity():
    A = haar(6, 3, 5)
    t = exact_fermion_table(A)
    assert t.total_mass == pytest.approx(1.0, abs=1e-12)
    assert exact_fermion_table(np.eye(3)).prob((1, 1, 1)) == pytest.approx(1.0)


def test_mockup_tables_normalized():
    A = haar(6, 3, 6)
    assert exact_mockup_classical_table(A).total_mass == pytest.approx(1.0, abs=1e-12)
    assert exact_mockup_rownorm_table(A).total_mass == pytest.approx(1.0, abs=1e-12)


def test_mockup_tables_agree_for_one_photon():
    A = haar(5, 1, 7)
    assert np.allclose(exact_mockup_classical_table(A).probs, exact_mockup_rownorm_table(A).probs)


def test_mockup_classical_is_balls_in_bins():
    # direct convolution: photon j lands in row h with probability |a_hj|^2
    A = haar(4, 3, 8)
    W = np.abs(A) ** 2
    direct = {}
    for h in itertools.product(range(4), repeat=3):
        S = tuple(np.bincount(h, minlength=4))
        direct[S] = direct.get(S, 0.0) + W[h[0], 0] * W[h[1], 1] * W[h[2], 2]
    t = exact_mockup_classical_table(A)
    for S, p in direct.items():
        assert t.prob(S) == pytest.approx(p, abs=1e-14)


def test_table_validation():
    space = OutcomeSpace(3, 1)
    with pytest.raises(ValueError):
        ProbabilityTable(space, [0.5, 0.4, 0.0])
    with pytest.raises(ValueError):
        ProbabilityTable(space, [1.5, -0.5, 0.0])
    c = ProbabilityTable(space, [0.2, 0.3, 0.5]).cumulative
    assert np.all(np.diff(c) >= 0) and c[-1] == 1.0


# -- table sampling ------------------------------------------------------------------

def test_point_mass_table_sampling():
    t = exact_boson_table(np.eye(3))
    batch = sample_from_table(t, 50, RngStream(1))
    assert set(batch.outcomes) == {(1, 1, 1)}


def test_uniform_table_frequencies():
    space = OutcomeSpace(4, 2, True)
    batch = sample_from_table(uniform_table(space), 6 * 10**5, RngStream(2))
    freq = empirical_table(batch, space).probs
    se = math.sqrt((1 / 6) * (5 / 6) / (6 * 10**5))
    assert np.all(np.abs(freq - 1 / 6) <= 5 * se)


def test_boson_table_sampling_tv():
    A = haar(8, 2, 9)
    t = exact_boson_table(A)
    assert tv_to(sample_from_table(t, 10**5, RngStream(3)), t) <= 0.02


# -- sequential boson sampler ------------------------------------------------------

def sequential_law(A):
    """Exact output law of the column-permuted sequential sampler, by enumerating every path."""
    m, n = A.shape
    out = {}
    for alpha in itertools.permutations(range(n)):
        B = A[:, list(alpha)]

        def walk(rows, prob):
            k = len(rows) + 1
            if k > n:
                key = tuple(np.bincount(rows, minlength=m))
                out[key] = out.get(key, 0.0) + prob / math.factorial(n)
                return
            w = np.array([abs(permanent_naive(B[rows + [i], :k])) ** 2 for i in range(m)])
            w /= w.sum()
            for i in range(m):
                if w[i] > 0:
                    walk(rows + [i], prob * w[i])

        walk([], 1.0)
    return out


def test_sequential_law_equals_boson_table():
    A = haar(5, 3, 10)
    law = sequential_law(A)
    t = exact_boson_table(A)
    for S in t.space.enumerate():
        assert law.get(S, 0.0) == pytest.approx(t.prob(S), abs=1e-14)


def test_sequential_sampler_empirical_tv():
    A = haar(5, 3, 11)
    t = exact_boson_table(A)
    batch = sample_batch("boson-exact", A, 30000, RngStream(4), method="sequential")
    assert tv_to(batch, t) <= 0.03


def test_sequential_identity():
    assert sample_boson_sequential(np.eye(4), RngStream(5)) == (1, 1, 1, 1)


# -- fermion sampler -------------------------------------------------------------------

def test_fermion_unitary_always_full():
    U = haar(4, 4, 12)
    gen = RngStream(6).generator()
    assert all(sample_fermion(U, gen) == (1, 1, 1, 1) for _ in range(20))


def test_fermion_sampler_matches_table():
    A = haar(6, 3, 13)
    batch = sample_batch("fermion", A, 10**5, RngStream(7))
    assert int((batch.occupations > 1).sum()) == 0
    assert tv_to(batch, exact_fermion_table(A)) <= 0.02


def test_single_draw_fermion_matches_table():
    A = haar(6, 3, 13)
    gen = RngStream(9).generator()
    batch = SampleBatch("fermion", np.array([sample_fermion(A, gen) for _ in range(20000)]))
    assert tv_to(batch, exact_fermion_table(A)) <= 0.03


def test_fermion_rejects_non_orthonormal():
    A = haar(6, 3, 14) * 1.1
    with pytest.raises(NumericalDegeneracyError):
        sample_fermion(A, RngStream(8))
    with pytest.raises(NumericalDegeneracyError):
        sample_batch("fermion", A, 10, RngStream(8))


# -- mockups and uniform ---------------------------------------------------------------

def test_mockups_on_identity():
    assert sample_mockup_classical(np.eye(3), RngStream(9)) == (1, 1, 1)
    batch = sample_batch("mockup-rownorm", np.eye(3), 2000, RngStream(10))
    assert (batch.occupations.max(axis=1) > 1).any()  # collisions possible


def test_mockup_single_photon_probability():
    A = haar(2, 1, 15)
    batch = sample_batch("mockup-classical", A, 10**5, RngStream(11))
    p = batch.occupations[:, 0].mean()
    assert abs(p - abs(A[0, 0]) ** 2) <= 5 * math.sqrt(0.25 / 10**5)


def test_mockup_samplers_match_tables():
    A = haar(6, 2, 16)
    b1 = sample_batch("mockup-classical", A, 10**5, RngStream(12))
    b2 = sample_batch("mockup-rownorm", A, 10**5, RngStream(13))
    assert tv_to(b1, exact_mockup_classical_table(A)) <= 0.02
    assert tv_to(b2, exact_mockup_rownorm_table(A)) <= 0.02


def test_mockup_rejects_bad_columns():
    with pytest.raises(ValueError):
        sample_mockup_rownorm(np.ones((3, 1)), RngStream(0))


def test_single_draw_helpers_agree_with_kinds():
    A = haar(6, 2, 17)
    for S in (sample_mockup_classical(A, RngStream(1)), sample_mockup_rownorm(A, RngStream(1)),
              sample_uniform(OutcomeSpace(6, 2, True), RngStream(1))):
        assert len(S) == 6 and sum(S) == 2


@pytest.mark.parametrize("space", [OutcomeSpace(4, 2, True), OutcomeSpace(2, 2), OutcomeSpace(5, 1, True)])
def test_uniform_sampler(space):
    k = 6 * 10**5
    batch = sample_batch("uniform", np.eye(space.m)[:, :space.n], k, RngStream(14), space=space)
    freq = empirical_table(batch, space).probs
    p = 1 / space.size
    assert np.all(np.abs(freq - p) <= 5 * math.sqrt(p * (1 - p) / k))


@pytest.mark.parametrize("cf", [True, False])
def test_uniform_sampler_large_space(cf):
    # above the lookup-table size; check membership and the mode marginal E[s_i] = n/m
    m, n, k = 200, 4, 20000
    space = OutcomeSpace(m, n, cf)
    assert space.size > 10**6
    batch = sample_batch("uniform", haar(m, n, 18), k, RngStream(15), space=space)
    assert all(space.contains(S) for S in batch.outcomes[:500])
    occ = batch.occupations.sum(axis=0) / k
    assert abs(occ.mean() - n / m) < 1e-12
    assert np.abs(occ - n / m).max() <= 5 * math.sqrt(2 * n / m / k)
    if not cf:
        # Pr[S has a collision] = 1 - C(m, n) / C(m+n-1, n)
        p = 1 - math.comb(m, n) / space.size
        f = (batch.occupations.max(axis=1) > 1).mean()
        assert abs(f - p) <= 5 * math.sqrt(p * (1 - p) / k)


def test_uniform_sampler_huge_space():
    space = OutcomeSpace(2000, 20, True)
    batch = sample_batch("uniform", haar(2000, 20, 19), 50, RngStream(16))
    assert all(space.contains(S) for S in batch.outcomes)


# -- lossy sampler ------------------------------------------------------------------------

def test_lossless_is_boson():
    A = haar(5, 3, 19)
    batch = sample_batch("lossy-boson", A, 20000, RngStream(16), loss_prob=0.0)
    assert tv_to(batch, exact_boson_table(A)) <= 0.04


def test_total_loss_is_empty():
    A = haar(5, 3, 20)
    assert sample_lossy_boson(A, 1.0, RngStream(17)) == (0,) * 5


def test_loss_count_is_binomial():
    A = haar(6, 4, 21)
    gen = RngStream(18).generator()
    kept = np.array([sum(sample_lossy_boson(A, 0.5, gen)) for _ in range(10**5)])
    assert abs(kept.mean() - 2.0) <= 3 * math.sqrt(1.0 / 10**5)


def test_lossy_rejects_bad_probability():
    with pytest.raises(ValueError):
        sample_lossy_boson(haar(4, 2, 22), 1.5, RngStream(0))


# -- batches ------------------------------------------------------------------------------

def test_batch_determinism_and_jsonl(tmp_path):
    A = haar(6, 3, 23)
    for kind in ("boson-exact", "fermion", "mockup-classical", "mockup-rownorm", "uniform", "lossy-boson"):
        a = sample_batch(kind, A, 40, RngStream(3, (1,)), loss_prob=0.3)
        b = sample_batch(kind, A, 40, RngStream(3, (1,)), loss_prob=0.3)
        assert a.to_jsonl() == b.to_jsonl()
        path = tmp_path / f"{kind}.jsonl"
        a.write_jsonl(path)
        c = SampleBatch.read_jsonl(path)
        assert np.array_equal(c.occupations, a.occupations)
        assert (c.kind, c.seed, c.stream, c.matrix_hash) == (kind, 3, (1,), a.matrix_hash)


def test_batch_outcomes_in_space():
    A = haar(6, 3, 24)
    full, cf = OutcomeSpace(6, 3), OutcomeSpace(6, 3, True)
    for kind in ("boson-exact", "mockup-classical", "mockup-rownorm"):
        assert all(full.contains(S) for S in sample_batch(kind, A, 200, RngStream(1)).outcomes)
    for kind in ("fermion", "uniform"):
        assert all(cf.contains(S) for S in sample_batch(kind, A, 200, RngStream(1)).outcomes)


def test_unknown_kind():
    with pytest.raises(ValueError):
        sample_batch("nope", np.eye(2), 1, RngStream(0))
