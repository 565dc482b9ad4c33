import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import any_model, path_model
from liouville_lab.config import Tolerances
from liouville_lab.form import DirichletFormModel, apply_generator, lp_norm
from liouville_lab.semigroup import (ReducibleModelError, ergodic_limit, evolve, harmonic_kernel,
                                     interpolation_exponents, semigroup, structure_flags)

seeds = st.integers(0, 10_000)


def two_disjoint_edges():
    kernel = {(0, 1): .5, (1, 0): .5, (2, 3): .5, (3, 2): .5}
    return DirichletFormModel.from_kernel(np.ones(4), kernel)


def test_two_point_closed_form():
    T = semigroup(path_model(2))
    out = evolve(T, 1.0, [1.0, 0.0])
    e = math.exp(-2.0)
    assert out == pytest.approx([0.5 + e / 2, 0.5 - e / 2], abs=1e-12)
    assert T.spectral_gap() == pytest.approx(2.0)


def test_time_zero_and_negative_time():
    T = semigroup(path_model(4))
    f = np.array([1.0, -2.0, 3.0, 0.5])
    assert np.array_equal(evolve(T, 0.0, f), f)
    with pytest.raises(ValueError):
        evolve(T, -1.0, f)


def test_two_point_ergodic_limit():
    rep = ergodic_limit(path_model(2), [1.0, 0.0], 2.0)
    assert rep.ground_state == pytest.approx(1 / math.sqrt(2))
    assert rep.limit == pytest.approx([0.5, 0.5])
    assert rep.distances[-1] < 1e-3
    assert np.all(np.diff(rep.distances) <= 1e-15)


def test_constant_is_invariant():
    T = semigroup(path_model(6))
    f = np.full(6, 3.25)
    for t in (0.3, 1.0, 50.0):
        assert evolve(T, t, f) == pytest.approx(f, abs=1e-12)


def test_mean_zero_decay_rate():
    model = path_model(7)
    T = semigroup(model)
    f = np.arange(7.0) - 3.0
    gap = T.spectral_gap()
    for t in (0.5, 2.0, 5.0):
        assert lp_norm(evolve(T, t, f), model.m, 2) <= math.exp(-gap * t) * lp_norm(f, model.m, 2) + 1e-12


def test_structure_flags():
    flags = structure_flags(path_model(5))
    assert flags.irreducible and flags.conservative and flags.mass == 5.0
    split = structure_flags(two_disjoint_edges())
    assert not split.irreducible and split.components == 2 and split.conservative


def test_harmonic_kernel_dimensions():
    v = harmonic_kernel(path_model(5))
    assert v.shape == (5, 1)
    assert np.allclose(v[:, 0], 1.0)
    two = harmonic_kernel(two_disjoint_edges())
    assert two.shape[1] == 2
    model = two_disjoint_edges()
    for col in two.T:
        assert np.max(np.abs(apply_generator(model, col))) <= 1e-10


def test_reducible_model_rejected():
    with pytest.raises(ReducibleModelError):
        ergodic_limit(two_disjoint_edges(), np.ones(4), 2.0)


@pytest.mark.parametrize("p", [1.0, 0.5, math.inf])
def test_p_range(p):
    with pytest.raises(ValueError):
        ergodic_limit(path_model(3), [1.0, 0.0, 0.0], p)


def test_absorbing_branch_limit_zero():
    model = path_model(8)
    rep = ergodic_limit(model, np.ones(8), 2.0, absorbing=np.arange(1, 7), times=[0.0, 10.0, 100.0])
    assert rep.emulated and rep.ground_state == 0.0
    assert np.all(rep.limit == 0.0)
    assert rep.distances[-1] < 1e-6 * rep.distances[0]


def test_sparse_path_matches_dense():
    model = any_model(4)
    f = np.random.default_rng(0).normal(size=model.n)
    dense = evolve(semigroup(model), 0.7, f)
    sparse = evolve(semigroup(model, Tolerances(dense_limit=2)), 0.7, f)
    assert sparse == pytest.approx(dense, abs=1e-10)


@pytest.mark.parametrize("p, expected", [(4.0, (math.inf, 0.5)), (1.5, (1.0, 2 / 3)), (2.0, (math.inf, 1.0))])
def test_interpolation_exponents(p, expected):
    r, theta = interpolation_exponents(p)
    assert r == expected[0] and theta == pytest.approx(expected[1])


@given(seeds, st.floats(0.0, 5.0))
def test_contraction_positivity_and_mass(seed, t):
    model = any_model(seed)
    rng = np.random.default_rng(seed)
    f = rng.normal(size=model.n)
    T = semigroup(model)
    ft = evolve(T, t, f)
    for p in (1.0, 2.0, math.inf):
        assert lp_norm(ft, model.m, p) <= lp_norm(f, model.m, p) * (1 + 1e-9) + 1e-12
    g = np.abs(f)
    assert evolve(T, t, g).min() >= -1e-10
    assert np.sum(model.m * ft) == pytest.approx(np.sum(model.m * f), abs=1e-9 * (1 + np.abs(f).sum()))


@given(seeds, st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_semigroup_law(seed, t, s):
    model = any_model(seed)
    f = np.random.default_rng(seed).normal(size=model.n)
    T = semigroup(model)
    assert evolve(T, t + s, f) == pytest.approx(evolve(T, t, evolve(T, s, f)), abs=1e-10)


@given(seeds)
def test_eigenvectors_m_orthonormal(seed):
    model = any_model(seed)
    T = semigroup(model)
    G = T.eigenvectors.T @ (model.m[:, None] * T.eigenvectors)
    assert np.allclose(G, np.eye(model.n), atol=1e-10)
    assert T.eigenvalues[0] == pytest.approx(0.0, abs=1e-10)


@given(seeds, st.floats(1.1, 6.0))
def test_ergodic_limit_is_mean(seed, p):
    model = any_model(seed)
    f = np.random.default_rng(seed).uniform(0, 2, model.n)
    rep = ergodic_limit(model, f, p)
    assert rep.limit == pytest.approx(np.sum(model.m * f) / model.mass)
    assert rep.ground_state == pytest.approx(1 / math.sqrt(model.mass))
