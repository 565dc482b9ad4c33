import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from conftest import labels_1d, mixed_model, path_model, z_segment
from liouville_lab.families import FamilySpec, generate_family
from liouville_lab.form import gamma_pairing
from liouville_lab.harmonic import solve_dirichlet
from liouville_lab.liouville import (NotSubharmonicError, caccioppoli_sides, certified_constant, karp_run,
                                     key_constant, key_estimate_sides, safe_radius, squared_estimate_sides,
                                     vanishing_energy_check, weighted_energy, yau_run)
from liouville_lab.metric import cutoff_profile, intrinsic_metric
from oracles import SQRT2

seeds = st.integers(0, 10_000)

# f = |k| on {-10..10}, (r, R) = (sqrt 2, 2 sqrt 2), n = 100, phi = cutoff(r, R)
FROZEN = {
    2.0: dict(key=(5.5, 6.0), cacc=(5.0, 432.0), sq=(30.25, 1512.0)),
    1.5: dict(key=(4.260901398860128, 6.87831517751085), cacc=(3.991563831562721, 870.5574219184564),
              sq=(18.155280730808194, 1968.2444930035044)),
    3.0: dict(key=(10.75, 19.0), cacc=(9.0, 1792.0), sq=(115.5625, 15680.0)),
}


@pytest.fixture(scope="module")
def segment():
    model = z_segment(10)
    metric = intrinsic_metric(model)
    k = labels_1d(model)
    return model, metric, k


@pytest.mark.parametrize("p", sorted(FROZEN))
def test_frozen_segment_values(segment, p):
    model, metric, k = segment
    f = np.abs(k).astype(float)
    r, R = SQRT2, 2 * SQRT2
    phi = cutoff_profile(metric, r, R).values
    key = key_estimate_sides(model, metric, f, phi, p, n=100)
    cac = caccioppoli_sides(model, metric, f, p, r, R)
    sq = squared_estimate_sides(model, metric, f, p, r, R)
    exp = FROZEN[p]
    assert (key.lhs, key.rhs) == pytest.approx(exp["key"], rel=1e-12)
    assert (cac.lhs, cac.rhs) == pytest.approx(exp["cacc"], rel=1e-12)
    assert (sq.lhs, sq.rhs) == pytest.approx(exp["sq"], rel=1e-12)
    assert key.passed and cac.passed and sq.passed


@given(st.floats(0.1, 5.0), st.floats(0.0, 3.0), st.sampled_from([1.2, 1.5, 2.0, 2.5, 4.0]),
       st.integers(1, 4), st.integers(1, 5))
def test_oracle_agreement(a, b, p, r_steps, gap):
    N = 12
    model = z_segment(N)
    metric = intrinsic_metric(model)
    k = labels_1d(model)
    f = a * np.abs(k) + b
    fd = {int(x): float(v) for x, v in zip(k, f)}
    r, R = r_steps / SQRT2 + 0.1, (r_steps + gap) / SQRT2 + 0.1
    phi = cutoff_profile(metric, r, R).values
    phid = {x: oracles.cutoff(x, r, R) for x in fd}
    n = 3.0 * a + b
    key = key_estimate_sides(model, metric, f, phi, p, n=n)
    assert (key.lhs, key.rhs) == pytest.approx(oracles.key_sides(N, fd, phid, p, n), rel=1e-10, abs=1e-12)
    cac = caccioppoli_sides(model, metric, f, p, r, R)
    assert (cac.lhs, cac.rhs) == pytest.approx(oracles.caccioppoli_sides(N, fd, p, r, R), rel=1e-10)
    sq = squared_estimate_sides(model, metric, f, p, r, R)
    assert (sq.lhs, sq.rhs) == pytest.approx(oracles.squared_sides(N, fd, p, r, R), rel=1e-10)


def test_constants():
    assert key_constant(2.0) == 2.0 and key_constant(1.5) == 4.0 and key_constant(3.0) == 2.0
    assert certified_constant(2.0) == 8.0 and certified_constant(1.5) == 32.0


def test_p2_product_rule_identity(segment):
    model, metric, k = segment
    f = np.abs(k).astype(float)
    phi = cutoff_profile(metric, 1.0, 4.0).values
    cert = key_estimate_sides(model, metric, f, phi, 2.0)
    c = cert.context
    total = c["lhs_local"] + c["lhs_jump"] + 2 * (c["cross_local"] + c["cross_jump"]) + c["third_jump"]
    assert gamma_pairing(model, f, phi * phi * f) == pytest.approx(total, rel=1e-12)


def test_constant_function_gives_zero(segment):
    model, metric, _ = segment
    f = np.full(model.n, 3.0)
    phi = cutoff_profile(metric, 1.0, 3.0).values
    assert key_estimate_sides(model, metric, f, phi, 2.0).lhs == 0.0
    cac = caccioppoli_sides(model, metric, f, 1.5, 1.0, 3.0)
    assert cac.lhs == 0.0 and cac.passed


def test_input_errors(segment):
    model, metric, k = segment
    f = np.abs(k).astype(float)
    phi = np.zeros(model.n)
    for p in (1.0, 0.5, math.inf):
        with pytest.raises(ValueError):
            key_estimate_sides(model, metric, f, phi, p)
    with pytest.raises(ValueError):
        caccioppoli_sides(model, metric, f - 1.0, 2.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        caccioppoli_sides(model, metric, f, 2.0, 2.0, 2.0)
    with pytest.raises(ValueError):
        squared_estimate_sides(model, metric, f, 2.0, 3.0, 1.0)
    with pytest.raises(ValueError):
        karp_run(model, metric, f, 2.0, 3.9 * metric.reach)


def test_subharmonic_gate(segment):
    model, metric, k = segment
    f = 2.0 ** -np.abs(k)
    phi = cutoff_profile(metric, 0.5, 2.0).values
    with pytest.raises(NotSubharmonicError):
        key_estimate_sides(model, metric, f, phi, 2.0)
    with pytest.raises(NotSubharmonicError):
        caccioppoli_sides(model, metric, f, 2.0, 1.0, 2.0)
    assert key_estimate_sides(model, metric, f, phi, 2.0, gate=False).lhs > 0


def test_caccioppoli_lhs_monotone_in_r(segment):
    model, metric, k = segment
    f = np.abs(k).astype(float) + 1.0
    lhs = [caccioppoli_sides(model, metric, f, 2.0, r, 6.0).lhs for r in np.linspace(0.2, 5.5, 20)]
    assert np.all(np.diff(lhs) >= 0)


def test_degenerate_power_convention():
    model = path_model(3)
    f = np.array([0.0, 0.0, 1.0])
    assert weighted_energy(model, f, 1.5) == pytest.approx(1.0)
    assert weighted_energy(model, f, 3.0) == pytest.approx(1.0)


def test_vanishing_lemma():
    model = mixed_model(3)
    const = vanishing_energy_check(model, np.full(model.n, 2.0), 1.5)
    assert const.lhs == 0.0 and const.variance == pytest.approx(0.0, abs=1e-20) and const.implication_holds
    f = np.linspace(0.0, 1.0, model.n)
    other = vanishing_energy_check(model, f, 2.5)
    assert other.lhs > 0 and other.implication_holds


def _subharmonic_instance(seed):
    """Mixed model and ``f >= 0`` with ``Lf = -g <= 0`` off the frontier."""
    rng = np.random.default_rng(seed)
    model = mixed_model(seed, int(rng.integers(14, 30)))
    metric = intrinsic_metric(model)
    fr = np.asarray(model.space.frontier)
    g = rng.uniform(0.0, 1.0, model.n) * (rng.uniform(size=model.n) < 0.5)
    v = solve_dirichlet(model, fr, rng.uniform(0, 1, fr.size), source=-g)
    f = v - v.min() + float(rng.uniform(0.0, 0.5))
    return rng, model, metric, f


@given(seeds, st.sampled_from([1.2, 1.5, 2.0, 3.0, 4.0]))
def test_certificates_hold_on_mixed_models(seed, p):
    rng, model, metric, f = _subharmonic_instance(seed)
    top = safe_radius(model, metric) - 2.02 * metric.reach
    if top <= 0:
        return
    R = float(rng.uniform(0.3, 1.0)) * top
    r = float(rng.uniform(0.05, 0.95)) * R
    phi = cutoff_profile(metric, r, R).values
    assert key_estimate_sides(model, metric, f, phi, p).passed
    assert caccioppoli_sides(model, metric, f, p, r, R).passed
    assert squared_estimate_sides(model, metric, f, p, r, R).passed


def test_karp_constant_and_inconclusive():
    model = z_segment(200)
    metric = intrinsic_metric(model)
    R = 4 * metric.reach
    const = karp_run(model, metric, np.ones(model.n), 2.0, R)
    assert const.verdict == "constant" and const.all_passed
    k = labels_1d(model)
    grow = karp_run(model, metric, np.abs(k).astype(float), 2.0, R)
    assert grow.verdict == "inconclusive" and grow.all_passed
    assert grow.proxy.outcome == "converges"
    assert grow.partial_sum <= grow.partial_bound


def _z1_family(radii=(10, 20, 40)):
    return generate_family(FamilySpec("z1", radii))


def test_yau_verdicts():
    fam = _z1_family()
    ks = [labels_1d(m) for m in fam]
    const = yau_run(fam, [np.full(k.size, 2.0) for k in ks], 2.0)
    assert const.verdict == "constant"
    grow = yau_run(fam, [np.abs(k).astype(float) for k in ks], 3.0)
    assert grow.verdict == "inconclusive" and grow.reason.startswith("hypothesis violated")
    assert grow.case == "d" and grow.norm_exponent > 3
    bump = yau_run(fam, [2.0 ** -np.abs(k) for k in ks], 1.5)
    assert bump.verdict == "rejected" and bump.case == "a"


def test_yau_requires_nesting():
    fam = _z1_family((10, 20))[::-1]
    with pytest.raises(ValueError):
        yau_run(fam, [np.ones(m.n) for m in fam], 2.0)
    fam = _z1_family((10, 20))
    with pytest.raises(ValueError):
        yau_run(fam, [np.ones(fam[0].n), np.full(fam[1].n, 2.0)], 2.0)
