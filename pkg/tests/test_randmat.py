"""GUE sampling, eigensolvers, minor processes and local statistics."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, optimize

from randhive.errors import ParameterError, RangeError, StatisticsError
from randhive.randmat import (
    MinorProcess,
    bulk_gaps,
    classical_location,
    eigenvalues_hermitian,
    extract_patch,
    householder_tridiagonalize,
    interlacing_gap_array,
    minor_process,
    normalized_gaps,
    rigidity_report,
    sample_gue,
    semicircle_cdf,
    semicircle_density,
)


def test_sample_1x1_is_real_with_unit_variance():
    x = np.array([sample_gue(1, 1.0, seed=3, index=k).entries[0, 0] for k in range(4000)])
    assert np.all(np.isreal(x))
    assert abs(x.var() - 1.0) < 3 * math.sqrt(2.0 / x.size) * 1.5


def test_offdiagonal_second_moment_n2():
    x = np.array([sample_gue(2, 1.0, seed=0, index=k).entries[0, 1] for k in range(20000)])
    m2 = np.abs(x) ** 2
    assert abs(m2.mean() - 2.0) < 3 * m2.std() / math.sqrt(m2.size)


def test_sampling_is_deterministic_and_hermitian():
    a = sample_gue(7, 0.5, seed=11, index=2).entries
    b = sample_gue(7, 0.5, seed=11, index=2).entries
    assert np.array_equal(a, b)
    assert np.allclose(a, a.conj().T)
    assert np.all(np.imag(np.diag(a)) == 0)


def test_leading_block_matches_full_matrix():
    full = sample_gue(9, 1.0, seed=4, index=1).entries
    part = sample_gue(9, 1.0, seed=4, index=1, size=5).entries
    assert np.array_equal(full[:5, :5], part)


@pytest.mark.parametrize("bad", [dict(n=0), dict(n=3, variance_param=0.0), dict(n=3, variance_param=-1.0)])
def test_sample_rejects_bad_parameters(bad):
    with pytest.raises(ParameterError):
        sample_gue(**bad)


@pytest.mark.parametrize("method", ["lapack", "householder"])
def test_eigenvalues_small_cases(method):
    assert np.allclose(eigenvalues_hermitian(np.diag([3.0, 1.0, 2.0]), method), [3, 2, 1])
    assert np.allclose(eigenvalues_hermitian(np.array([[0.0, 1.0], [1.0, 0.0]]), method), [1, -1])


def test_householder_matches_characteristic_polynomial():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    a = a + a.conj().T
    roots = np.sort(np.real(np.roots(np.poly(a))))[::-1]
    assert np.allclose(eigenvalues_hermitian(a, "householder"), roots, atol=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(0, 10_000))
def test_householder_trace_norm_and_residuals(n, seed):
    a = sample_gue(n, 1.0, seed=seed).entries
    w, v = eigenvalues_hermitian(a, "householder", vectors=True)
    scale = max(1.0, float(np.linalg.norm(a, 2)))
    assert np.all(np.diff(w) <= 1e-12)
    assert abs(w.sum() - np.trace(a).real) <= 1e-8 * n * scale
    assert abs(np.sum(w**2) - np.linalg.norm(a) ** 2) <= 1e-8 * n * scale**2
    assert np.max(np.linalg.norm(a @ v - v * w, axis=0)) <= 1e-8 * scale


def test_tridiagonal_form_is_similar():
    a = sample_gue(8, 1.0, seed=1).entries
    d, e, q = householder_tridiagonalize(a, want_q=True)
    t = np.diag(d) + np.diag(e, 1) + np.diag(e, -1)
    assert np.allclose(q.conj().T @ a @ q, t, atol=1e-10)


def test_minor_process_2x2_interlaces():
    m = sample_gue(2, 1.0, seed=2)
    p = minor_process(m)
    a = m.entries[0, 0].real
    assert p.rows[1][0] == pytest.approx(a)
    assert p.rows[2][1] <= a <= p.rows[2][0]


def test_minor_process_n10_all_interlacing_inequalities():
    p = minor_process(sample_gue(10, 1.0, seed=3))
    count = 0
    for k in range(1, 10):
        for j in range(1, k + 1):
            assert p.entry(j, k + 1) + 1e-8 >= p.entry(j, k) >= p.entry(j + 1, k + 1) - 1e-8
            count += 1
    assert count == 45
    assert p.interlacing_violations() == []


def test_minor_process_json_roundtrip():
    p = minor_process(sample_gue(4, 1.0, seed=8))
    q = MinorProcess.from_json(p.to_json(seed=8))
    assert all(np.array_equal(p.rows[k], q.rows[k]) for k in p.rows)


def test_semicircle_density_values():
    assert semicircle_density(0.0) == pytest.approx(1 / math.pi)
    assert semicircle_density(2.0) == 0.0
    assert semicircle_density(3.0) == 0.0


def test_semicircle_cdf_matches_quadrature():
    for u in (-1.5, -0.3, 0.0, 0.7, 1.9):
        val, _ = integrate.quad(semicircle_density, -2, u)
        assert semicircle_cdf(u) == pytest.approx(val, abs=1e-10)


def test_classical_locations():
    assert classical_location(50, 100) == pytest.approx(0.0, abs=1e-10)
    assert classical_location(100, 100) == 2.0
    # independent inversion: quadrature CDF and a bracketing root finder
    root = optimize.brentq(lambda u: integrate.quad(semicircle_density, -2, u)[0] - 0.25, -2, 2, xtol=1e-14)
    assert classical_location(25, 100) == pytest.approx(root, abs=1e-8)


def test_normalized_gaps_hand_example():
    # top row (5, 1, -3), next row (2, -2); entry scale 1, n = 3, index 1 is outside the default bulk
    p = MinorProcess(3, {2: np.array([2.0, -2.0]), 3: np.array([5.0, 1.0, -3.0])}, 1.0)
    g, gt = normalized_gaps(p, 2, bulk=0.0)
    c = math.sqrt(3) * semicircle_density(classical_location(2, 3))
    assert g == pytest.approx(c * 4.0)
    assert gt == pytest.approx(c * 3.0)
    with pytest.raises(RangeError):
        normalized_gaps(p, 3, bulk=0.0)


def test_interlacing_gap_is_below_gap():
    for t in range(200):
        p = minor_process(sample_gue(50, 1.0, seed=9, index=t, size=50), levels=(49, 50))
        idx, g, gt = bulk_gaps(p)
        assert np.all(gt > 0) and np.all(gt < g)


def test_patch_m0_and_interlacing():
    p = minor_process(sample_gue(40, 1.0, seed=1))
    assert extract_patch(p, (0.4, 0.6), 40, 0).values.shape == (1, 1)
    assert extract_patch(p, (0.4, 0.6), 40, 0).values[0, 0] == 0.0
    patch = extract_patch(p, (0.4, 0.7), 40, 3)
    assert patch.values[3, 3] == 0.0
    assert np.all(interlacing_gap_array(patch) >= -1e-8)
    with pytest.raises(RangeError):
        extract_patch(p, (0.05, 0.99), 40, 3)


def test_gap_array_hand_cases():
    assert np.all(interlacing_gap_array(np.full((3, 3), 2.0)) == 0)
    v = np.array([[1.0, 2.0], [0.0, 1.5]])
    gaps = interlacing_gap_array(v)
    assert gaps[0, 0, 0] == pytest.approx(1.0 - 1.5)
    assert gaps[1, 0, 0] == pytest.approx(2.0 - 1.0)


def test_rigidity_report():
    same = [np.arange(5.0)] * 40
    rep = rigidity_report(same)
    assert np.all(rep["max_deviation"] == 0) and rep["flagged"] == []
    shifted = [np.arange(5.0)] * 39 + [np.arange(5.0) + np.array([0, 0, 50.0, 0, 0])]
    assert 3 in rigidity_report(shifted)["flagged"]
    with pytest.raises(StatisticsError):
        rigidity_report(same[:5])


def test_rigidity_bulk_smaller_than_edge():
    spectra = [eigenvalues_hermitian(sample_gue(100, 1.0, seed=2, index=t)) for t in range(60)]
    std = rigidity_report(spectra)["std"]
    assert std[45:55].mean() < std[:3].mean() and std[45:55].mean() < std[-3:].mean()


def test_patch_marginals_stabilize():
    # W1 between the centred patch marginals at l and 2l shrinks as l grows
    def marginal(n, trials):
        vals = []
        for t in range(trials):
            p = minor_process(sample_gue(n, 1.0, seed=5, index=t, size=n), levels=range(n // 2 - 2, n // 2 + 3))
            vals.append(extract_patch(p, (0.25, 0.5), n, 2).values[3, 3])
        return np.sort(vals)

    a, b, c = marginal(20, 200), marginal(40, 200), marginal(80, 200)
    assert np.mean(np.abs(b - c)) < np.mean(np.abs(a - b)) + 0.1


def _block_sum_ratios(seed, trials, n=128, ms=(4, 16, 64)):
    sums = {m: [] for m in ms}
    for t in range(trials):
        p = minor_process(sample_gue(n, 1.0, seed=seed, index=t), levels=(n - 1, n))
        gt = p.rows[n][:-1] - p.rows[n - 1]
        for m in ms:
            sums[m].append(gt[n // 2 - m // 2 : n // 2 - m // 2 + m].sum())
    return [np.var(sums[m], ddof=1) / m for m in ms]


@pytest.mark.xfail(reason="var/m is flat within noise for m <= 64 at n = 128; see decisions ledger", strict=False)
def test_interlacing_sum_variance_is_sublinear():
    r = _block_sum_ratios(seed=0, trials=1000)
    assert r[0] > r[1] > r[2]


def test_interlacing_sum_variance_at_most_linear():
    r = _block_sum_ratios(seed=1, trials=400)
    assert r[2] <= 1.2 * r[0]
