"""Dyadic GOOD/BAD decomposition of Lipschitz functions."""

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from randhive.errors import ParameterError, ValidationError
from randhive.qdiff import (
    C_HAT,
    CZResult,
    DyadicCube,
    SampledFunction,
    best_l2_linear,
    calibrate_c_hat,
    cz_decompose,
    precondition_product,
    random_lipschitz,
    verify_cz,
)
from randhive.randmat import rng_for

ROOT = DyadicCube(0, (0, 0))
LOWERED = dict(eps=0.3, eta=0.05, k=6, c_sharp=1e-3)


def test_cube_relations():
    q = DyadicCube(2, (1, 3))
    assert q.side == 0.25 and q.volume == 0.0625 and q.lower == (0.25, 0.75)
    for c in q.children():
        assert c.parent() == q and q.contains(c) and not c.contains(q)
    assert ROOT.parent() is None
    assert sum(c.volume for c in q.children()) == q.volume


@settings(max_examples=40, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(-3, 3))
def test_affine_fit_is_exact_and_shift_covariant(c0, cx, cy, shift):
    F = SampledFunction.from_callable(lambda x, y: c0 + cx * x + cy * y, 3)
    for q in (ROOT, DyadicCube(2, (1, 2))):
        assert np.allclose(best_l2_linear(F, q), (c0, cx, cy), atol=1e-10)
    G = SampledFunction(F.values + shift)
    a, b = best_l2_linear(F, ROOT), best_l2_linear(G, ROOT)
    assert b[0] - a[0] == pytest.approx(shift, abs=1e-10)
    assert b[1:] == pytest.approx(a[1:], abs=1e-10)


def test_fit_of_square_matches_continuum_limit():
    # continuum least squares of x^2 on [0, 1] is x - 1/6
    F = SampledFunction.from_callable(lambda x, y: x**2, 8)
    c0, cx, cy = best_l2_linear(F, ROOT)
    assert c0 == pytest.approx(-1 / 6, abs=1e-3)
    assert cx == pytest.approx(1.0, abs=1e-3)
    assert cy == pytest.approx(0.0, abs=1e-9)


def test_fit_needs_enough_samples():
    F = SampledFunction(np.ones((2, 2)))
    with pytest.raises(ParameterError):
        best_l2_linear(F, DyadicCube(1, (0, 0)))
    with pytest.raises(ParameterError):
        SampledFunction(np.ones((3, 3)))


@pytest.mark.parametrize("fn", [lambda x, y: 0 * x, lambda x, y: 0.3 * x - 0.5 * y + 2])
def test_flat_functions_give_one_good_cube(fn):
    r = cz_decompose(fn, 0.9, 0.25, 7)
    assert len(r.good) == 1 and r.good[0][0] == ROOT and not r.bad
    assert verify_cz(fn, r)["ok"]


def test_precondition_and_lipschitz_errors():
    with pytest.raises(ParameterError, match="0.00081"):
        cz_decompose(lambda x, y: 0 * x, 0.3, 0.1, 1)
    assert precondition_product(0.9, 0.25, 7) == pytest.approx(0.9**4 * 0.25 * 7)
    with pytest.raises(ValidationError):
        cz_decompose(lambda x, y: 3 * x, 0.9, 0.25, 7)


def test_random_fields_default_parameters():
    rng = rng_for(0, 21)
    for _ in range(100):
        f = random_lipschitz(rng)
        rep = verify_cz(f, cz_decompose(f, 0.9, 0.25, 7))
        assert rep["ok"] and rep["partition_exact"]


def test_random_fields_lowered_constant_keep_sup_bound():
    rng = rng_for(1, 21)
    some_bad = 0
    for _ in range(60):
        f = random_lipschitz(rng)
        r = cz_decompose(f, **LOWERED)
        rep = verify_cz(f, r)
        assert not rep["sup_violations"]
        assert rep["partition_exact"] and rep["bad_at_level_k"]
        some_bad += bool(r.bad)
    assert some_bad > 0


def test_cantor_distance_field():
    rng = rng_for(2, 21)
    for _ in range(10):
        f = random_lipschitz(rng, "distance")
        r = cz_decompose(f, 0.9, 0.25, 7)
        assert verify_cz(f, r)["ok"]


def _with_bad_cubes():
    rng = rng_for(3, 21)
    while True:
        f = random_lipschitz(rng, "cones")
        r = cz_decompose(f, **LOWERED)
        if r.bad:
            return f, r


def test_relabelled_bad_cube_is_reported():
    f, r = _with_bad_cubes()
    F = SampledFunction.from_callable(f, r.params["k"])
    worst = max(r.bad, key=lambda q: np.max(np.abs(F.block(q)[2] - np.mean(F.block(q)[2]))))
    forged = CZResult(r.good + [(worst, (0.0, 0.0, 0.0))], [q for q in r.bad if q != worst], r.params)
    rep = verify_cz(F, forged)
    assert rep["sup_violations"] and not rep["ok"]
    dup = CZResult(r.good + [r.good[0]], r.bad, r.params)
    assert not verify_cz(F, dup)["partition_exact"]


def test_partition_volume_and_determinism():
    f, r = _with_bad_cubes()
    vol = sum(q.volume for q, _ in r.good) + r.bad_volume
    assert vol == 1.0
    again = cz_decompose(f, **LOWERED)
    assert again.to_json() == r.to_json()
    json.loads(r.to_json())


def test_scaling_covariance():
    rng = rng_for(4, 21)
    for _ in range(10):
        f = random_lipschitz(rng)
        r = cz_decompose(f, **LOWERED)
        half = DyadicCube(1, (0, 0))
        g = lambda x, y, f=f: f(2 * x, 2 * y) / 2
        s = cz_decompose(g, LOWERED["eps"], LOWERED["eta"], LOWERED["k"] + 1, LOWERED["c_sharp"], root=half)
        assert [(q.level + 1, q.index) for q, _ in r.good] == [(q.level, q.index) for q, _ in s.good]
        assert [(q.level + 1, q.index) for q in r.bad] == [(q.level, q.index) for q in s.bad]


def test_calibration_subset_is_consistent():
    c, worst = calibrate_c_hat(corpus=300, seed=5)
    assert c <= worst < 2 * c
    assert c >= C_HAT


def test_random_lipschitz_bound():
    rng = rng_for(6, 21)
    for _ in range(50):
        F = SampledFunction.from_callable(random_lipschitz(rng), 6)
        assert F.lipschitz_violation() == 0
