import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import any_model, labels_1d, mixed_model, z_segment
from liouville_lab.families import FamilySpec, generate_family
from liouville_lab.form import DirichletFormModel, ModelError, StateSpace
from liouville_lab.metric import (adapted_lengths, cutoff_profile, cutoff_report, intrinsic_certificate,
                                  intrinsic_metric, path_metric_and_balls)
from oracles import SQRT2, line_ball_count

seeds = st.integers(0, 10_000)


def test_segment_lengths_and_jump_size():
    model = z_segment(10)
    metric = intrinsic_metric(model)
    assert metric.shrink == 0
    assert np.allclose(metric.jump_lengths, 1 / SQRT2)
    assert metric.jump_size == pytest.approx(1 / SQRT2)
    assert metric.dist == pytest.approx(np.abs(labels_1d(model)) / SQRT2)


def test_segment_cutoff_values():
    model = z_segment(10)
    metric = intrinsic_metric(model)
    eta = cutoff_profile(metric, SQRT2, 2 * SQRT2).values
    by_label = dict(zip(labels_1d(model).tolist(), eta.tolist()))
    for k in (3, -3):
        assert by_label[k] == pytest.approx(0.5, abs=1e-12)
    for k in (2, -2, 0):
        assert by_label[k] == 1.0
    for k in (4, -4, 7):
        assert by_label[k] == 0.0


def test_cutoff_edge_cases():
    metric = intrinsic_metric(z_segment(5))
    eta = cutoff_profile(metric, 0.0, 1.0).values
    assert eta[metric.base] == 1.0
    big = cutoff_profile(metric, 1.0, metric.diameter_from_base + 2.0).values
    assert np.all(big[metric.ball(1.0)] == 1.0) and np.all(big > 0)
    with pytest.raises(ValueError):
        cutoff_profile(metric, 2.0, 2.0)
    with pytest.raises(ValueError):
        cutoff_profile(metric, -1.0, 2.0)


def test_balls_are_closed_and_empty_below_zero():
    metric = intrinsic_metric(z_segment(5))
    assert metric.ball(1 / SQRT2).sum() == 3
    assert metric.ball(-0.1).sum() == 0
    _, balls = path_metric_and_balls(z_segment(5), adapted_lengths(z_segment(5)), radii=[0.0, 2 * SQRT2])
    assert balls[0.0].sum() == 1 and balls[2 * SQRT2].sum() == 9


@pytest.mark.parametrize("r", [0.0, 0.5, 1 / SQRT2, 1.0, 3.3, 7.0])
def test_line_ball_counts(r):
    metric = intrinsic_metric(z_segment(20))
    assert metric.ball(r).sum() == line_ball_count(r)


def test_disconnected_metric_is_rejected():
    model = DirichletFormModel(StateSpace(3), np.ones(3), [[0, 1]], [0.5])
    with pytest.raises(ModelError, match="disconnected"):
        intrinsic_metric(model)


def test_override_must_hit_an_edge():
    model = DirichletFormModel(StateSpace(3), np.ones(3), [[0, 1], [1, 2]], [0.5, 0.5],
                               length_overrides=((0, 2, 1.0),))
    with pytest.raises(ModelError, match="non-edge"):
        adapted_lengths(model)


def test_bad_override_triggers_shrink():
    base = z_segment(4)
    model = DirichletFormModel(base.space, base.m, base.edges, base.jump,
                               length_overrides=((0, 1, 3.0),))
    metric = intrinsic_metric(model)
    assert metric.shrink >= 2
    assert intrinsic_certificate(model, metric).passed


def test_mixed_model_metric_has_both_reaches():
    model = mixed_model(7, 15)
    metric = intrinsic_metric(model)
    assert metric.local_reach > 0 and metric.jump_size > 0
    assert np.all(metric.m_local + metric.m_jump <= model.m * (1 + 1e-12))


@given(seeds)
def test_intrinsic_certificate_random(seed):
    model = any_model(seed)
    metric = intrinsic_metric(model, seed=seed)
    rep = intrinsic_certificate(model, metric, seed=seed + 1)
    assert rep.passed and rep.split_ok and rep.lipschitz_ok


@given(seeds, st.floats(0.05, 0.95), st.floats(0.05, 1.0))
def test_cutoff_estimates_random(seed, frac, scale):
    model = any_model(seed)
    metric = intrinsic_metric(model, seed=seed)
    R = scale * metric.diameter_from_base + 1e-3
    r = frac * R
    f = np.random.default_rng(seed).normal(size=model.n)
    rep = cutoff_report(model, metric, cutoff_profile(metric, r, R), f)
    assert rep.passed, rep


@given(seeds)
def test_distance_functions_are_lipschitz(seed):
    model = any_model(seed)
    metric = intrinsic_metric(model, seed=seed)
    rng = np.random.default_rng(seed)
    A = rng.choice(model.n, size=int(rng.integers(1, model.n + 1)), replace=False)
    rho_a = metric.distances_from(A)
    full = np.array([metric.distances_from([x]) for x in range(model.n)])
    assert np.all(np.abs(rho_a[:, None] - rho_a[None, :]) <= full + 1e-12)


@pytest.mark.parametrize("spec", [FamilySpec("z2", (4,)), FamilySpec("regular-tree", (4,), branching=3),
                                  FamilySpec("z3", (2,), weights="random", seed=3)])
def test_family_metrics_certify(spec):
    model = generate_family(spec)[0]
    metric = intrinsic_metric(model)
    assert intrinsic_certificate(model, metric).passed
    assert math.isfinite(metric.jump_size)
