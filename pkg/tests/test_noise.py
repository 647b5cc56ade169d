import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import levy_alt_second_moment
from stochetd import (IndexOutOfRange, InvalidConfig, InvalidFactor, coarsen_paths,
                      generate_paths, levy_area, nested_stratonovich_oracle)
from stochetd.noise import (BrownianPaths, coarsen_increments, dump_paths, insertion_sum,
                            load_paths, rank3_parts, rank3_table, symmetric_part)

# 99% two-sided chi-square band for the sample variance of 10^4 standard
# normals, (chi2.ppf(0.005, 9999) / 9999, chi2.ppf(0.995, 9999) / 9999),
# computed once with scipy.stats and frozen here.
CHI2_LO, CHI2_HI = 0.9639462142755889, 1.036805164356189


def test_deterministic_regeneration():
    a = generate_paths(7, 3, 2, 100, 0.01)
    b = generate_paths(7, 3, 2, 100, 0.01)
    assert np.array_equal(a.increments, b.increments)
    c = generate_paths(7, 4, 2, 100, 0.01)
    assert not np.array_equal(a.increments, c.increments)


def test_variance_chi_square():
    dt = 1e-3
    p = generate_paths(2024, 0, 1, 10_000, dt)
    z = p.increments[0] / math.sqrt(dt)
    assert CHI2_LO <= z.var(ddof=1) <= CHI2_HI


def test_independent_substreams_uncorrelated():
    a = generate_paths(1, 0, 1, 10_000, 1.0).increments[0]
    b = generate_paths(1, 1, 1, 10_000, 1.0).increments[0]
    # |corr| below 3 standard errors of zero
    assert abs(np.corrcoef(a, b)[0, 1]) < 3 / math.sqrt(10_000)


@pytest.mark.parametrize("args", [(0, 1, 0, 0.1), (0, 1, 10, 0.0), (0, 1, 10, -1.0)])
def test_generate_rejects_bad_config(args):
    seed, m, n, dt = args
    with pytest.raises(InvalidConfig):
        generate_paths(seed, 0, m, n, dt)


def test_coarsen_example():
    p = BrownianPaths(np.array([[1.0, 2.0, 3.0, 4.0]]), 0.5)
    c = coarsen_paths(p, 2)
    assert c.increments.tolist() == [[3.0, 7.0]]
    assert c.dt_fine == 1.0
    assert coarsen_paths(p, 1) is p
    with pytest.raises(InvalidFactor):
        coarsen_paths(p, 3)


def test_coarsen_associative():
    p = generate_paths(5, 0, 3, 64, 1 / 64)
    a = coarsen_paths(coarsen_paths(p, 2), 2).increments
    b = coarsen_paths(p, 4).increments
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-15)


def test_coupling_invariant_large():
    n = 2**20
    p = generate_paths(9, 0, 1, n, 1.0 / n)
    W = p.endpoint()
    for f in (2, 16, 1024, n):
        Wc = coarsen_paths(p, f).endpoint()
        assert np.all(np.abs(Wc - W) <= 1e-12 * max(np.abs(W).max(), 1.0))


def test_coarsen_increments_batched():
    inc = np.arange(24, dtype=float).reshape(2, 3, 4)
    out = coarsen_increments(inc, 2)
    assert out.shape == (2, 3, 2)
    assert out[1, 2, 1] == inc[1, 2, 2] + inc[1, 2, 3]


def test_oracle_time_integral():
    p = generate_paths(0, 0, 2, 1000, 0.001)
    assert nested_stratonovich_oracle(p, [0]) == pytest.approx(1.0, rel=1e-14)


def test_oracle_j11_chain_rule():
    p = generate_paths(0, 0, 1, 4096, 1 / 4096)
    W = p.endpoint()[0]
    # midpoint sums telescope, so J_11 = W^2 / 2 up to round-off
    assert nested_stratonovich_oracle(p, [1, 1]) == pytest.approx(W**2 / 2, abs=1e-12)


def test_oracle_index_errors():
    p = generate_paths(0, 0, 2, 10, 0.1)
    for idx in ([3], [], [1, 1, 1, 1], [-1]):
        with pytest.raises(IndexOutOfRange):
            nested_stratonovich_oracle(p, idx)
    with pytest.raises(IndexOutOfRange):
        levy_area(p, 0, 1)


def test_levy_area_antisymmetric():
    p = generate_paths(3, 0, 2, 512, 1 / 512)
    assert levy_area(p, 1, 1) == 0.0
    assert levy_area(p, 1, 2) == -levy_area(p, 2, 1)


def test_levy_moment_oracle_matches_discrete_formula():
    # second moment of the midpoint sums approaches the continuum value
    assert levy_alt_second_moment(1.0, 10**9) == pytest.approx(levy_alt_second_moment(1.0), rel=1e-8)


def test_levy_area_moments():
    T, n, n_paths = 1.0, 64, 4000
    vals = np.array([levy_area(generate_paths(77, k, 2, n, T / n), 1, 2) for k in range(n_paths)])
    se_mean = vals.std(ddof=1) / math.sqrt(n_paths)
    assert abs(vals.mean()) < 3 * se_mean
    sq = vals**2
    se_sq = sq.std(ddof=1) / math.sqrt(n_paths)
    assert abs(sq.mean() - levy_alt_second_moment(T, n)) < 3 * se_sq
    # and J_12 - J_21 itself has second moment T^2, i.e. four times Alt^2
    assert abs(4 * sq.mean() - T**2) < 3 * 4 * se_sq + T / n


def _paths(n, seed=0, k=0):
    return generate_paths(seed, k, 3, n, 1.0 / n)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=1, max_size=2), st.integers(0, 3),
       st.integers(0, 10_000))
def test_shuffle_identity_property(idx, extra, seed):
    n = 4096
    p = _paths(n, seed)
    lhs = nested_stratonovich_oracle(p, idx) * nested_stratonovich_oracle(p, [extra])
    rhs = insertion_sum(p, idx, extra)
    # quadrature tolerance: one unit of the O(dt^(1/2)) scaling
    assert abs(lhs - rhs) <= math.sqrt(1.0 / n)


def test_shuffle_single_pair_exact():
    # for one level the midpoint product rule telescopes exactly
    p = _paths(2048)
    j1 = nested_stratonovich_oracle(p, [1])
    j2 = nested_stratonovich_oracle(p, [2])
    assert insertion_sum(p, [1], 2) == pytest.approx(j1 * j2, abs=1e-13)


def test_shuffle_residual_shrinks_with_refinement():
    def rms(n):
        r = []
        for k in range(20):
            p = _paths(n, 4, k)
            lhs = nested_stratonovich_oracle(p, [1, 2]) * nested_stratonovich_oracle(p, [3])
            r.append(lhs - insertion_sum(p, [1, 2], 3))
        return math.sqrt(np.mean(np.square(r)))

    # quartering dt_fine must at least halve the RMS residual (O(dt^(1/2)))
    assert rms(4096) <= 0.5 * rms(1024)


@pytest.mark.parametrize("idx", [(1, 2), (2, 2), (1, 2, 3), (1, 1, 2), (0, 1, 2)])
def test_symmetric_part_identity(idx):
    n = 4096
    tol = math.sqrt(1.0 / n)
    for k in range(10):
        p = _paths(n, 8, k)
        prod = np.prod([nested_stratonovich_oracle(p, [j]) for j in idx]) / math.factorial(len(idx))
        assert abs(symmetric_part(p, idx) - prod) <= tol


@settings(max_examples=30, deadline=None)
@given(st.permutations([1, 2, 3]), st.integers(0, 1000))
def test_rank3_recomposition(perm, seed):
    i, j, k = perm
    p = _paths(256, seed)
    table = rank3_table(p, i, j, k)
    parts = rank3_parts(table, i, j, k)
    total = parts["sym"] + parts["alt"] + parts["n1"] + parts["n2"]
    assert abs(total - table[i, j, k]) <= 1e-13
    swapped = rank3_parts(table, i, k, j)
    assert abs(parts["n1"] + swapped["n1"]) <= 1e-13
    swapped = rank3_parts(table, j, i, k)
    assert abs(parts["n2"] + swapped["n2"]) <= 1e-13


def test_dump_roundtrip(tmp_path):
    p = generate_paths(123, 5, 2, 17, 0.125)
    f = tmp_path / "p.bpth"
    dump_paths(p, f)
    raw = f.read_bytes()
    assert raw[:4] == b"BPTH"
    q = load_paths(f)
    assert np.array_equal(q.increments, p.increments)
    assert (q.dt_fine, q.seed, q.path_index) == (0.125, 123, 5)


def test_load_rejects_bad_magic(tmp_path):
    f = tmp_path / "bad"
    f.write_bytes(b"XXXX" + bytes(40))
    with pytest.raises(InvalidConfig):
        load_paths(f)
