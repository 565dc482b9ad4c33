"""The acceptance batteries behind ``verify-all``.

Each ``criterion_N`` returns a :class:`CriterionResult` whose ``rows`` become a
TSV report. Reports contain no timings, so equal seeds give byte-identical
files.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .config import Tolerances, get_tolerances, passes
from .families import FamilySpec, generate_family, random_model
from .form import lp_norm, restrict
from .harmonic import gamma_vanishing_liouville, solve_dirichlet
from .liouville import (caccioppoli_sides, certified_constant, karp_run, key_estimate_sides,
                        m_variance, safe_radius, squared_estimate_sides, weighted_energy)
from .metric import cutoff_profile, cutoff_report, intrinsic_certificate, intrinsic_metric
from .modelio import dumps_model, loads_model
from .recurrence import hop_distances, recurrence_test
from .semigroup import ergodic_limit, harmonic_kernel

BATTERY_PS = (1.2, 1.5, 2.0, 3.0, 4.0)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    columns: list[str] = field(default_factory=list)
    rows: list[list] = field(default_factory=list)

    def line(self) -> str:
        return f"criterion {self.number:2d} [{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"

    def tsv(self) -> str:
        out = ["\t".join(self.columns)]
        for row in self.rows:
            out.append("\t".join(_cell(v) for v in row))
        return "\n".join(out) + "\n"


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


# --------------------------------------------------------------------------
# instance battery shared by criteria 1 to 3


@dataclass
class BatteryInstance:
    index: int
    family: str
    model: object
    metric: object
    f: np.ndarray
    kind: str
    p: float
    r: float
    R: float


def _battery_models():
    out = []
    for name, spec in (("z1", FamilySpec("z1", (40,))), ("z2", FamilySpec("z2", (12,))),
                       ("tree", FamilySpec("regular-tree", (9,), branching=2))):
        for weights in ("unit", "random"):
            spec_w = FamilySpec(spec.kind, spec.radii, weights=weights, seed=11,
                                branching=spec.branching)
            model = generate_family(spec_w)[0]
            metric = intrinsic_metric(model)
            out.append((f"{name}/{weights}", model, metric))
    return out


def _coordinate(model, name):
    if name.startswith("tree"):
        return hop_distances(model).astype(float)
    return np.abs(np.array(model.space.labels)[:, 0]).astype(float)


def _dirichlet_solution(model, rng):
    frontier = np.asarray(model.space.frontier)
    g = np.where(rng.random(model.n) < 0.3, rng.exponential(1.0, model.n), 0.0)
    g[frontier] = 0.0
    f = solve_dirichlet(model, frontier, rng.uniform(0.0, 1.0, frontier.size), source=-g)
    return f - f.min()


def battery(seed: int = 0, count: int = 500) -> list[BatteryInstance]:
    """Random instances over z1/z2/tree with ``p`` cycling through ``BATTERY_PS``.

    ``f`` is ``|coordinate|`` (depth on the tree), a nonnegative solution of
    ``Lf = -g`` with ``g >= 0``, or a clipped cone in the metric. Unit-weight
    models use all kinds; random weights only the Dirichlet solutions, which
    stay subharmonic under any weights. Cut-off radii keep ``R + 2 reach``
    below the frontier distance.
    """
    rng = np.random.default_rng(seed)
    models = _battery_models()
    out = []
    for k in range(count):
        name, model, metric = models[k % len(models)]
        p = BATTERY_PS[k % len(BATTERY_PS)]
        kinds = ("coordinate", "dirichlet", "cone-max", "cone-shift") if name.endswith("unit") else ("dirichlet",)
        kind = kinds[int(rng.integers(len(kinds)))]
        rho = metric.dist
        top = safe_radius(model, metric) - 2.02 * metric.reach
        if kind == "coordinate":
            f = _coordinate(model, name)
        elif kind == "dirichlet":
            f = _dirichlet_solution(model, rng) + (0.0 if rng.random() < 0.3 else rng.uniform(0, 1))
        elif kind == "cone-max":
            f = np.maximum(rho, rng.uniform(0, top / 2))
        else:
            f = np.maximum(rho - rng.uniform(0, top / 2), 0.0)
        f = f * float(rng.choice([0.1, 1.0, 10.0]))
        R = float(rng.uniform(0.25, 1.0) * top)
        r = float(rng.uniform(0.05, 0.95) * R)
        out.append(BatteryInstance(k, name, model, metric, f, kind, p, r, R))
    return out


def _battery_rows(instances, which, tol):
    rows, ok, needed = [], True, {}
    for inst in instances:
        if which == "key":
            phi = cutoff_profile(inst.metric, inst.r, inst.R).values
            cert = key_estimate_sides(inst.model, inst.metric, inst.f, phi, inst.p, tol=tol)
        elif which == "caccioppoli":
            cert = caccioppoli_sides(inst.model, inst.metric, inst.f, inst.p, inst.r, inst.R, tol=tol)
            emp = cert.context["empirical_constant"]
            needed[inst.p] = max(needed.get(inst.p, 0.0), emp if math.isfinite(emp) else 0.0)
        else:
            cert = squared_estimate_sides(inst.model, inst.metric, inst.f, inst.p, inst.r, inst.R, tol=tol)
        ok &= cert.passed
        rows.append([inst.index, inst.family, inst.kind, inst.p, inst.r, inst.R,
                     cert.lhs, cert.rhs, cert.constant, cert.passed])
    return rows, ok, needed


_BATTERY_COLUMNS = ["instance", "family", "f", "p", "r", "R", "lhs", "rhs", "constant", "pass"]


def criterion_1(instances, tol=None) -> CriterionResult:
    tol = tol or get_tolerances()
    rows, ok, _ = _battery_rows(instances, "key", tol)
    return CriterionResult(1, "key estimate", ok, f"{sum(r[-1] for r in rows)}/{len(rows)} certificates pass",
                           _BATTERY_COLUMNS, rows)


def criterion_2(instances, tol=None) -> CriterionResult:
    tol = tol or get_tolerances()
    rows, ok, needed = _battery_rows(instances, "caccioppoli", tol)
    consts = "; ".join(f"p={p:g}: needed {needed[p]:.4g} vs certified {certified_constant(p):g}"
                       for p in sorted(needed))
    res = CriterionResult(2, "caccioppoli", ok,
                          f"{sum(r[-1] for r in rows)}/{len(rows)} certificates pass; {consts}",
                          _BATTERY_COLUMNS, rows)
    return res


def criterion_3(instances, tol=None) -> CriterionResult:
    tol = tol or get_tolerances()
    rows, ok, _ = _battery_rows(instances, "squared", tol)
    return CriterionResult(3, "squared estimate", ok,
                           f"{sum(r[-1] for r in rows)}/{len(rows)} certificates pass",
                           _BATTERY_COLUMNS, rows)


def empirical_constants(instances, tol=None) -> dict[float, float]:
    """Smallest Caccioppoli constant valid on every instance, per ``p``."""
    return _battery_rows(instances, "caccioppoli", tol or get_tolerances())[2]


# --------------------------------------------------------------------------
# semigroup and kernel criteria


def _random_models(seed: int, count: int):
    rng = np.random.default_rng(seed)
    return [random_model(int(rng.integers(5, 80)), float(rng.uniform(2.0, 5.0)), int(rng.integers(2 ** 31)))
            for _ in range(count)]


def criterion_4(seed: int = 0, tol=None) -> CriterionResult:
    tol = tol or get_tolerances()
    rng = np.random.default_rng(seed + 4)
    rows, ok = [], True
    for k, model in enumerate(_random_models(seed + 4, 50)):
        f = rng.uniform(-1.0, 1.0, model.n) + rng.uniform(-1.0, 1.0)
        for p in (1.5, 2.0, 4.0):
            rep0 = ergodic_limit(model, f, p, times=[0.0], tol=tol)
            gap = rep0.gap
            rep = ergodic_limit(model, f, p, times=[1.0 / gap, 10.0 / gap], tol=tol)
            norm = lp_norm(f, model.m, p)
            mean = float(np.sum(model.m * f) / model.mass)
            limit_ok = np.allclose(rep.limit, mean, rtol=1e-12, atol=1e-12)
            for t, d in zip(rep.times, rep.distances):
                bound = 2.0 * norm * math.exp(-gap * t)
                good = passes(d, bound, tol) and limit_ok
                if t * gap > 5:
                    good &= d <= 1e-3 * norm
                ok &= good
                rows.append([k, model.n, p, gap, t, d, bound, norm, good])
    return CriterionResult(4, "ergodic limit", ok, f"{sum(r[-1] for r in rows)}/{len(rows)} checks pass",
                           ["model", "n", "p", "gap", "t", "distance", "bound", "norm_f", "pass"], rows)


def _family_models():
    specs = [FamilySpec("z1", (12,)), FamilySpec("z2", (4,)), FamilySpec("z3", (2,)),
             FamilySpec("regular-tree", (4,), branching=3),
             FamilySpec("mesh1d", (20,), weights="random", seed=5),
             FamilySpec("z2", (5,), weights="random", seed=9)]
    return [(f"{s.kind}/{s.weights}", generate_family(s)[0]) for s in specs]


def criterion_5(seed: int = 0, tol=None) -> CriterionResult:
    tol = tol or get_tolerances()
    models = [(f"random-{k}", m) for k, m in enumerate(_random_models(seed + 5, 50))] + _family_models()
    rows, ok = [], True
    for name, model in models:
        basis = harmonic_kernel(model, tol)
        dim = basis.shape[1]
        v = basis[:, 0]
        cov = float(np.std(v) / abs(np.mean(v))) if dim == 1 else math.inf
        good = dim == 1 and cov <= 1e-10
        ok &= good
        rows.append([name, model.n, dim, cov, good])
    return CriterionResult(5, "basic liouville", ok, f"{sum(r[-1] for r in rows)}/{len(rows)} models have a constant kernel",
                           ["model", "n", "dimension", "coefficient_of_variation", "pass"], rows)


def criterion_6(seed: int = 0, tol=None) -> CriterionResult:
    tol = tol or get_tolerances()
    rng = np.random.default_rng(seed + 6)
    models = _random_models(seed + 6, 90)
    models += [generate_family(FamilySpec("mesh1d", (int(rng.integers(3, 30)),), weights="random",
                                          seed=int(rng.integers(2 ** 31))))[0] for _ in range(10)]
    rows, ok = [], True
    for k, model in enumerate(models):
        p = float(rng.choice(BATTERY_PS))
        c = float(rng.uniform(0.1, 10.0))
        f = np.full(model.n, c)
        lhs = weighted_energy(model, f, p)
        gv = gamma_vanishing_liouville(model, f, tol)
        var = m_variance(model, f)
        good = lhs <= 1e-12 and var <= 1e-10 * c * c and gv.constant is True
        ok &= good
        rows.append([k, "constant", p, lhs, gv.total, var, good])
        g = rng.uniform(0.0, 2.0, model.n)
        g[int(rng.integers(model.n))] += 1.0
        lhs = weighted_energy(model, g, p)
        gv = gamma_vanishing_liouville(model, g, tol)
        good = lhs > 0 and gv.constant is False
        ok &= good
        rows.append([k, "nonconstant", p, lhs, gv.total, m_variance(model, g), good])
    return CriterionResult(6, "gamma-vanishing liouville", ok,
                           f"{sum(r[-1] for r in rows)}/{len(rows)} checks pass",
                           ["model", "f", "p", "weighted_energy", "gamma_total", "variance", "pass"], rows)


# --------------------------------------------------------------------------
# Karp, recurrence, metric, persistence


def karp_instances(seed: int = 0, count: int = 12):
    """``f = 1 + h`` on z1 with ``Lh = -g``, ``g >= 0``, ``h = 0`` at the ends."""
    rng = np.random.default_rng(seed + 7)
    model = generate_family(FamilySpec("z1", (400,)))[0]
    metric = intrinsic_metric(model)
    ends = np.asarray(model.space.frontier)
    x = np.array(model.space.labels)[:, 0]
    out = []
    for k in range(count):
        width = int(rng.integers(1, 30))
        centre = int(rng.integers(-20, 21))
        g = np.where(np.abs(x - centre) <= width, rng.uniform(0.0, 1.0, model.n), 0.0)
        g[ends] = 0.0
        h = solve_dirichlet(model, ends, np.zeros(ends.size), source=-g)
        h *= 0.9 * float(rng.uniform(0.1, 1.0)) / abs(h.min())
        p = float(rng.choice([1.5, 2.0, 3.0]))
        R = 4 * metric.reach * float(rng.uniform(1.0, 3.0))
        out.append((k, model, metric, 1.0 + h, p, R))
    return out


def criterion_7(seed: int = 0, tol=None) -> CriterionResult:
    tol = tol or get_tolerances()
    rows, ok, used = [], True, 0
    for k, model, metric, f, p, R in karp_instances(seed):
        run = karp_run(model, metric, f, p, R, tol=tol)
        if not run.Q[0] > 0:
            continue
        used += 1
        for cert in run.telescoping:
            if cert.name != "karp-telescoping":
                continue
            ok &= cert.passed
            rows.append([k, p, R, int(cert.context["n"]), cert.context["R_n"], cert.context["v_n"],
                         cert.context["Q_prev"], cert.context["Q_n"], cert.lhs, cert.rhs, cert.passed])
    ok &= used > 0 and len(rows) > 0
    return CriterionResult(7, "karp telescoping", ok,
                           f"{sum(r[-1] for r in rows)}/{len(rows)} steps pass over {used} instances with Q_1 > 0",
                           ["instance", "p", "R", "n", "R_n", "v_n", "Q_prev", "Q_n", "lhs", "rhs", "pass"], rows)


def criterion_8(tol=None) -> CriterionResult:
    tol = tol or get_tolerances()
    rows, ok, notes = [], True, []
    for name, radius, expect in (("z1", 200, ("diverges", "divergent")),
                                 ("z2", 60, ("diverges", "divergent")),
                                 ("z3", 20, ("converges", "bounded"))):
        model = generate_family(FamilySpec(name, (radius,)))[0]
        metric = intrinsic_metric(model, max_singletons=16, n_random=4)
        rep = recurrence_test(model, metric, tol=tol)
        good = (rep.volume_verdict.outcome, rep.resistance_verdict.outcome) == expect and rep.implication_ok
        if name == "z1":
            exact = np.max(np.abs(rep.resistance.values - rep.resistance.levels / 2.0))
            good &= exact <= 1e-10
            notes.append(f"z1 max |R_eff - n/2| = {exact:.2e}")
        if name == "z2":
            good &= rep.volume_verdict.reason.startswith("logarithmic")
            good &= rep.resistance_verdict.log_slope > 0 and rep.resistance_verdict.log_residual < tol.log_fit_residual
        ok &= good
        notes.append(f"{name} {rep.summary}")
        rv = rep.resistance_verdict
        rows.append([name, model.n, rep.volume_verdict.outcome, rep.volume_verdict.exponent,
                     rv.outcome, rv.tail_increase, rv.log_slope, rv.log_residual,
                     float(rep.resistance.values[-1]), rep.implication_ok, good])
    return CriterionResult(8, "recurrence cross-validation", ok, "; ".join(notes),
                           ["family", "n", "volume", "exponent", "resistance", "tail_increase",
                            "log_slope", "log_residual", "R_eff_max", "implication_ok", "pass"], rows)


def criterion_9(seed: int = 0, tol=None) -> CriterionResult:
    tol = tol or get_tolerances()
    rng = np.random.default_rng(seed + 9)
    specs = [FamilySpec("z1", (30,)), FamilySpec("z2", (8,)), FamilySpec("z3", (4,)),
             FamilySpec("z2", (6,), weights="random", seed=1),
             FamilySpec("regular-tree", (6,), branching=2), FamilySpec("regular-tree", (4,), branching=3),
             FamilySpec("random-weighted", (3, 6), n=150, degree=3.0, seed=2),
             FamilySpec("mesh1d", (30,)), FamilySpec("mesh1d", (25,), weights="random", seed=4)]
    rows, ok = [], True
    for spec in specs:
        for model in generate_family(spec):
            metric = intrinsic_metric(model)
            rep = intrinsic_certificate(model, metric, seed=seed, tol=tol)
            ok &= rep.passed
            name = f"{spec.kind}/{spec.weights}/{model.n}"
            rows.append([name, "intrinsic", metric.shrink, "", "", rep.worst_local, rep.worst_jump, rep.passed])
            top = metric.diameter_from_base
            for _ in range(5):
                R = float(rng.uniform(0.1, 1.0) * top)
                r = float(rng.uniform(0.0, 0.95) * R)
                f = rng.normal(size=model.n)
                cr = cutoff_report(model, metric, cutoff_profile(metric, r, R), f, tol)
                ok &= cr.passed
                rows.append([name, "cutoff", metric.shrink, r, R, cr.worst_local, cr.worst_jump, cr.passed])
    return CriterionResult(9, "cut-off and intrinsic certificates", ok,
                           f"{sum(r[-1] for r in rows)}/{len(rows)} certificates pass",
                           ["model", "check", "shrink", "r", "R", "worst_local", "worst_jump", "pass"], rows)


def random_models_for_roundtrip(seed: int, count: int = 100):
    rng = np.random.default_rng(seed + 10)
    out = []
    for k in range(count):
        kind = k % 4
        s = int(rng.integers(2 ** 31))
        if kind == 0:
            out.append(random_model(int(rng.integers(2, 60)), float(rng.uniform(1.0, 5.0)), s))
        elif kind == 1:
            out.append(generate_family(FamilySpec("mesh1d", (int(rng.integers(2, 20)),), weights="random", seed=s))[0])
        elif kind == 2:
            out.append(generate_family(FamilySpec("z2", (int(rng.integers(1, 5)),), weights="random", seed=s))[0])
        else:
            base = random_model(int(rng.integers(3, 40)), 3.0, s)
            keep = np.flatnonzero(rng.random(base.n) < 0.7)
            keep = np.union1d(keep, [0])
            out.append(restrict(base, keep))
    return out


def criterion_10(seed: int = 0, tol=None) -> CriterionResult:
    rows, ok = [], True
    for k, model in enumerate(random_models_for_roundtrip(seed)):
        text = dumps_model(model)
        back = loads_model(text)
        good = back == model and dumps_model(back) == text
        ok &= good
        rows.append([k, model.n, model.edges.shape[0], model.local is not None, good])
    spec = FamilySpec("random-weighted", (2, 4), n=80, seed=seed)
    a = "".join(dumps_model(m) for m in generate_family(spec))
    b = "".join(dumps_model(m) for m in generate_family(spec))
    ok &= a == b
    rows.append(["regeneration", "", "", "", a == b])
    return CriterionResult(10, "persistence and determinism", ok,
                           f"{sum(r[-1] for r in rows)}/{len(rows)} round trips exact",
                           ["model", "n", "edges", "local", "pass"], rows)


# --------------------------------------------------------------------------


def run_all(seed: int = 7, out_dir: str | os.PathLike | None = None, tol: Tolerances | None = None,
            only=None, log=None) -> list[CriterionResult]:
    """Run every criterion; write ``criterion_NN.tsv`` and ``summary.tsv`` when asked."""
    tol = tol or get_tolerances()
    wanted = set(only) if only else set(range(1, 11))
    results = []
    instances = battery(seed) if wanted & {1, 2, 3} else None
    table = {
        1: lambda: criterion_1(instances, tol), 2: lambda: criterion_2(instances, tol),
        3: lambda: criterion_3(instances, tol), 4: lambda: criterion_4(seed, tol),
        5: lambda: criterion_5(seed, tol), 6: lambda: criterion_6(seed, tol),
        7: lambda: criterion_7(seed, tol), 8: lambda: criterion_8(tol),
        9: lambda: criterion_9(seed, tol), 10: lambda: criterion_10(seed, tol),
    }
    for k in sorted(wanted):
        res = table[k]()
        results.append(res)
        if log is not None:
            log(res.line())
        if out_dir is not None:
            _write(out_dir, f"criterion_{k:02d}.tsv", res.tsv())
    if out_dir is not None:
        summary = ["criterion\tname\tpass\tdetail"]
        summary += [f"{r.number}\t{r.name}\t{_cell(r.passed)}\t{r.detail}" for r in results]
        _write(out_dir, "summary.tsv", "\n".join(summary) + "\n")
    return results


def _write(out_dir, name, text):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
