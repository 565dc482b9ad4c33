import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from conftest import any_model, path_model, z_segment
from liouville_lab.families import FamilySpec, generate_family, random_model
from liouville_lab.form import DirichletFormModel, ModelError
from liouville_lab.harmonic import classify_harmonicity
from liouville_lab.metric import intrinsic_metric
from liouville_lab.recurrence import (GrowthCurve, ResistanceCurve, divergence_verdict, excessive_check,
                                      recurrence_test, resistance_curve, resistance_verdict, volume_curve)

seeds = st.integers(0, 10_000)
RADII = np.geomspace(1.0, 1000.0, 80)


def test_segment_ball_counts():
    model = z_segment(30)
    metric = intrinsic_metric(model)
    radii = [0.0, 0.5, 0.7, 1.0, 3.3, 10.0, 20.0]
    vol = volume_curve(model, metric, radii)
    assert vol.values.tolist() == [oracles.line_ball_count(r) for r in radii]
    assert vol.values[0] == 1.0


def test_z2_ball_counts_and_exponent():
    model = generate_family(FamilySpec("z2", (40,)))[0]
    metric = intrinsic_metric(model)
    radii = np.geomspace(0.5, 19.9, 40)
    vol = volume_curve(model, metric, radii)
    expected = [oracles.lattice_ball_count(2, math.floor(2 * r + 1e-9)) for r in radii]
    assert vol.values.tolist() == expected
    top = radii >= radii[-1] / 10
    alpha = np.polyfit(np.log(radii[top]), np.log(vol.values[top]), 1)[0]
    assert alpha == pytest.approx(2.0, abs=0.05)


def test_volume_beyond_coverage():
    model = z_segment(10)
    metric = intrinsic_metric(model)
    with pytest.raises(ValueError, match="beyond family coverage"):
        volume_curve(model, metric, [1.0, 10 / math.sqrt(2)])


@pytest.mark.parametrize("power, outcome", [(1.0, "diverges"), (3.0, "converges"), (2.0, "diverges")])
def test_divergence_verdict_powers(power, outcome):
    verdict = divergence_verdict(GrowthCurve(RADII, 3.0 * RADII ** power))
    assert verdict.outcome == outcome
    assert verdict.exponent == pytest.approx(power, abs=1e-9)
    if power == 2.0:
        assert verdict.log_slope == pytest.approx(1 / 3, rel=1e-2)


def test_divergence_verdict_needs_two_decades():
    r = np.geomspace(1.0, 50.0, 40)
    assert divergence_verdict(GrowthCurve(r, r)).outcome == "inconclusive"
    assert divergence_verdict(GrowthCurve(RADII, RADII), r0=20.0).outcome == "inconclusive"


def test_growth_curve_validation():
    with pytest.raises(ValueError):
        GrowthCurve([1.0, 1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        GrowthCurve([1.0, 2.0], [1.0])


def test_segment_resistance():
    model = z_segment(40)
    curve = resistance_curve(model, np.arange(1, 41))
    expected = [oracles.segment_resistance(n) for n in range(1, 41)]
    assert curve.values == pytest.approx(expected, rel=1e-10)
    assert resistance_verdict(curve).outcome == "divergent"
    with pytest.raises(ValueError):
        resistance_curve(model, [41])
    with pytest.raises(ValueError):
        resistance_curve(model, [0])


def test_resistance_disconnected():
    kernel = {(0, 1): .5, (1, 0): .5, (2, 3): .5, (3, 2): .5}
    with pytest.raises(ModelError):
        resistance_curve(DirichletFormModel.from_kernel(np.ones(4), kernel), [1])


def test_resistance_verdict_shapes():
    n = np.arange(1, 201)
    assert resistance_verdict(ResistanceCurve(n, 2.0 - 1.0 / n)).outcome == "bounded"
    assert resistance_verdict(ResistanceCurve(n, np.log(n) + 1.0)).outcome == "divergent"
    assert resistance_verdict(ResistanceCurve(n, np.sqrt(n))).outcome == "divergent"
    assert resistance_verdict(ResistanceCurve(np.array([1]), np.array([1.0]))).outcome == "inconclusive"


def test_recurrence_report_z1():
    model = z_segment(60)
    rep = recurrence_test(model, intrinsic_metric(model))
    assert rep.volume_verdict.outcome == "diverges"
    assert rep.resistance_verdict.outcome == "divergent"
    assert rep.implication_ok and rep.recurrent
    assert rep.summary == "volume: diverges; resistance: divergent"


@given(seeds)
def test_resistance_monotone_in_level(seed):
    model = random_model(40, 3.0, seed)
    curve = resistance_curve(model, np.arange(1, 4))
    assert np.all(np.diff(curve.values) >= -1e-12)


@given(seeds)
def test_rayleigh_monotonicity(seed):
    """Lowering conductances on a fixed support graph never lowers R_eff."""
    rng = np.random.default_rng(seed)
    model = random_model(30, 4.0, seed)
    weaker = model.jump * rng.uniform(0.1, 1.0, model.jump.size)
    thinned = DirichletFormModel(model.space, model.m, model.edges, weaker)
    full = resistance_curve(model, [1, 2, 3]).values
    thin = resistance_curve(thinned, [1, 2, 3]).values
    assert np.all(thin >= full * (1 - 1e-12))


def test_excessive_examples():
    model = path_model(11)
    h = np.minimum(np.arange(11), 5) / 5.0
    rep = excessive_check(model, h)
    assert rep.values[5] == pytest.approx(0.2)
    assert rep.pointwise[5] and not rep.pointwise[0]
    assert not rep.excessive
    assert excessive_check(model, np.full(11, 0.3)).excessive
    with pytest.raises(ValueError):
        excessive_check(model, h - 1.0)


@given(seeds)
def test_excessive_agrees_with_superharmonic(seed):
    model = any_model(seed)
    rng = np.random.default_rng(seed)
    h = rng.uniform(0.0, 1.0, model.n) ** 3
    rep = excessive_check(model, h)
    kind = classify_harmonicity(model, h).classification
    assert rep.excessive == (kind in ("harmonic", "superharmonic"))
    assert rep.complement_subharmonic == rep.excessive
