"""Experiment configuration, dispatch and report writing."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .config import Tolerances, get_tolerances
from .families import FamilySpec, generate_family
from .form import DirichletFormModel, lp_norm
from .harmonic import classify_harmonicity, solve_dirichlet
from .liouville import (InequalityCertificate, caccioppoli_sides, karp_run, key_estimate_sides,
                        safe_radius, squared_estimate_sides, yau_run)
from .metric import cutoff_profile, intrinsic_certificate, intrinsic_metric
from .modelio import load_index_set, load_model, load_vector, save_model, save_vector
from .recurrence import recurrence_test
from .semigroup import ergodic_limit, evolve, semigroup

OPERATIONS = ("generate", "semigroup", "harmonic", "liouville", "recurrence")
LIOUVILLE_MODES = ("key", "caccioppoli", "squared", "karp", "yau")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    operation: str
    out_dir: str
    model: str | None = None
    family: str | None = None
    radii: tuple[int, ...] = ()
    f: str | None = None
    f_kind: str | None = None
    boundary: str | None = None
    mode: str | None = None
    ps: tuple[float, ...] = (2.0,)
    r: float | None = None
    R: float | None = None
    times: tuple[float, ...] = ()
    weights: str = "unit"
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    dump_metric: bool = False

    def validate(self) -> None:
        if self.operation not in OPERATIONS:
            raise ConfigError(f"unknown operation '{self.operation}'")
        for p in self.ps:
            if not 1.0 < p < math.inf:
                raise ConfigError(f"precondition p in (1, inf) violated: p={p:g}")
        if self.operation in ("semigroup", "harmonic") and self.model is None:
            raise ConfigError(f"{self.operation} needs --model")
        if self.operation in ("generate", "recurrence") and self.family is None:
            raise ConfigError(f"{self.operation} needs --family")
        if self.operation == "harmonic" and self.boundary is None:
            raise ConfigError("harmonic needs --boundary")
        if self.operation == "liouville":
            if self.mode not in LIOUVILLE_MODES:
                raise ConfigError(f"liouville --mode must be one of {', '.join(LIOUVILLE_MODES)}")
            if (self.model is None) == (self.family is None):
                raise ConfigError("liouville needs exactly one of --model and --family")
            if self.model is not None and self.f is None:
                raise ConfigError("liouville --model needs --f")
        if self.r is not None and self.R is not None and not 0 < self.r < self.R:
            raise ConfigError(f"precondition 0 < r < R violated: r={self.r:g}, R={self.R:g}")
        if any(t < 0 for t in self.times):
            raise ConfigError("times must be nonnegative")


@dataclass
class ExperimentResult:
    exit_code: int
    files: list[str]
    summary: list[str]
    certificates: int = 0
    failures: int = 0


class _Writer:
    def __init__(self, out_dir):
        self.out_dir = out_dir
        self.files: list[str] = []
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name):
        p = os.path.join(self.out_dir, name)
        self.files.append(p)
        return p

    def text(self, name, text):
        with open(self.path(name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)

    def table(self, name, columns, rows):
        lines = ["\t".join(columns)] + ["\t".join(_fmt(v) for v in row) for row in rows]
        self.text(name, "\n".join(lines) + "\n")

    def curve(self, name, xs, ys):
        self.text(name, "".join(f"{_fmt(x)} {_fmt(y)}\n" for x, y in zip(xs, ys)))


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return "" if v is None else str(v)


_CERT_COLUMNS = ["name", "p", "r", "R", "n", "lhs", "rhs", "constant", "slack", "pass"]


def _cert_row(c: InequalityCertificate):
    ctx = c.context
    return [c.name, ctx.get("p"), ctx.get("r"), ctx.get("R", ctx.get("R_n")), ctx.get("n"),
            c.lhs, c.rhs, c.constant, c.slack, c.passed]


def run_experiment(config: ExperimentConfig, log=print) -> ExperimentResult:
    """Validate, dispatch, write reports. Exit code 0 iff every certificate passed."""
    config.validate()
    tol = get_tolerances().with_overrides(**config.tolerances) if config.tolerances else get_tolerances()
    w = _Writer(config.out_dir)
    state = {"certs": 0, "fails": 0, "summary": []}
    handler = {"generate": _generate, "semigroup": _semigroup, "harmonic": _harmonic,
               "liouville": _liouville, "recurrence": _recurrence}[config.operation]
    try:
        handler(config, tol, w, state)
    finally:
        lines = ["operation\tcertificates\tfailed"]
        lines.append(f"{config.operation}\t{state['certs']}\t{state['fails']}")
        lines += state["summary"]
        w.text("summary.tsv", "\n".join(lines) + "\n")
    for line in state["summary"]:
        log(line)
    code = 0 if state["fails"] == 0 else 1
    return ExperimentResult(code, w.files, state["summary"], state["certs"], state["fails"])


def _count(state, ok: bool):
    state["certs"] += 1
    state["fails"] += 0 if ok else 1


def _family(config) -> list[DirichletFormModel]:
    radii = config.radii or (10,)
    return generate_family(FamilySpec.parse(config.family, radii, weights=config.weights, seed=config.seed))


def _generate(config, tol, w, state):
    kind = config.family.replace(":", "-").replace("/", "_")
    for model in _family(config):
        name = f"{kind}_{model.n}.model"
        save_model(model, w.path(name))
        state["summary"].append(f"wrote {name}")


def _semigroup(config, tol, w, state):
    model = load_model(config.model)
    f = load_vector(config.f, model.n) if config.f else np.random.default_rng(config.seed).uniform(0, 1, model.n)
    rows = []
    for p in config.ps:
        rep = ergodic_limit(model, f, p, times=config.times or None, tol=tol)
        T = semigroup(model, tol)
        norm = lp_norm(f, model.m, p)
        for t, d in zip(rep.times, rep.distances):
            contr = lp_norm(evolve(T, t, f), model.m, p)
            ok = contr <= norm * (1 + tol.inequality) + tol.absolute
            _count(state, ok)
            rows.append([p, t, d, contr, norm, rep.gap, ok])
        w.curve(f"semigroup_p{p:g}.dat", rep.times, rep.distances)
        state["summary"].append(f"p={p:g}: limit {rep.limit[0]:.12g}, ground state {rep.ground_state:.12g}, "
                                f"gap {rep.gap:.6g}")
    w.table("semigroup.tsv", ["p", "t", "distance_to_limit", "norm_T_t_f", "norm_f", "gap", "pass"], rows)


def _harmonic(config, tol, w, state):
    model = load_model(config.model)
    idx, vals = load_index_set(config.boundary)
    f = solve_dirichlet(model, idx, vals, tol=tol)
    save_vector(f, w.path("solution.vec"))
    interior = np.ones(model.n, dtype=bool)
    interior[idx] = False
    rep = classify_harmonicity(model, f, interior, tol)
    ok = rep.classification == "harmonic" and vals.min() - 1e-12 <= f.min() and f.max() <= vals.max() + 1e-12
    _count(state, ok)
    w.table("harmonic.tsv", ["point", "value", "Lf", "interior"],
            [[k, f[k], rep.values[k], bool(interior[k])] for k in range(model.n)])
    state["summary"].append(f"classification: {rep.classification}; max principle: {ok}")


def _f_for(model, metric, kind, rng):
    if kind in (None, "coordinate"):
        if model.space.labels is not None and len(model.space.labels[0]) > 0 and model.local is None:
            return np.abs(np.array(model.space.labels)[:, 0]).astype(float)
        return metric.dist.copy()
    if kind == "constant":
        return np.ones(model.n)
    if kind == "distance":
        return metric.dist.copy()
    if kind == "dirichlet":
        fr = np.asarray(model.space.frontier)
        g = np.where(rng.random(model.n) < 0.3, rng.exponential(1.0, model.n), 0.0)
        g[fr] = 0.0
        f = solve_dirichlet(model, fr, rng.uniform(0, 1, fr.size), source=-g)
        return f - f.min()
    raise ConfigError(f"unknown --f-kind '{kind}'")


def _liouville(config, tol, w, state):
    rng = np.random.default_rng(config.seed)
    if config.model is not None:
        family = [load_model(config.model)]
        metrics = [intrinsic_metric(family[0], seed=config.seed, max_singletons=256, tol=tol)]
        fs = [load_vector(config.f, family[0].n)]
    else:
        family = _family(config)
        metrics = [intrinsic_metric(m, seed=config.seed, max_singletons=256, tol=tol) for m in family]
        fs = [_f_for(m, me, config.f_kind, np.random.default_rng(config.seed)) for m, me in zip(family, metrics)]
    model, metric, f = family[-1], metrics[-1], fs[-1]
    if config.dump_metric:
        w.text("intrinsic.tsv", intrinsic_certificate(model, metric, seed=config.seed, tol=tol).tsv())
    rows = []
    if config.mode in ("key", "caccioppoli", "squared"):
        limit = safe_radius(model, metric)
        top = (limit - 2.02 * metric.reach) if math.isfinite(limit) else metric.diameter_from_base
        if config.r is not None and config.R is not None:
            grid = [(config.r, config.R)]
        else:
            Rs = top * np.array([0.25, 0.5, 0.75, 1.0])
            grid = [(float(R * a), float(R)) for R in Rs for a in (0.25, 0.5, 0.75)]
        for p in config.ps:
            for r, R in grid:
                if config.mode == "key":
                    phi = cutoff_profile(metric, r, R).values
                    c = key_estimate_sides(model, metric, f, phi, p, tol=tol)
                    c.context.update(r=r, R=R)
                elif config.mode == "caccioppoli":
                    c = caccioppoli_sides(model, metric, f, p, r, R, tol=tol)
                else:
                    c = squared_estimate_sides(model, metric, f, p, r, R, tol=tol)
                _count(state, c.passed)
                rows.append(_cert_row(c))
        w.table(f"{config.mode}.tsv", _CERT_COLUMNS, rows)
        state["summary"].append(f"{config.mode}: {state['certs'] - state['fails']}/{state['certs']} pass")
    elif config.mode == "karp":
        for p in config.ps:
            R = config.R if config.R is not None else 4 * metric.reach
            run = karp_run(model, metric, f, p, R, tol=tol)
            for c in run.squared_rows + run.telescoping:
                _count(state, c.passed)
                rows.append(_cert_row(c))
            w.curve(f"karp_Q_p{p:g}.dat", run.radii, run.Q)
            state["summary"].append(f"karp p={p:g}: verdict {run.verdict} ({run.reason})")
        w.table("karp.tsv", _CERT_COLUMNS, rows)
    else:
        for p in config.ps:
            rep = yau_run(family, fs, p, metrics=metrics, tol=tol)
            for c in rep.certificates:
                _count(state, c.passed)
                rows.append(_cert_row(c))
            if rep.lhs:
                w.curve(f"yau_lhs_p{p:g}.dat", list(rep.lhs), list(rep.lhs.values()))
            state["summary"].append(f"yau p={p:g}: verdict {rep.verdict} ({rep.reason}); case {rep.case}")
        w.table("yau.tsv", _CERT_COLUMNS, rows)


def _recurrence(config, tol, w, state):
    model = _family(config)[-1]
    metric = intrinsic_metric(model, seed=config.seed, max_singletons=16, n_random=4, tol=tol)
    rep = recurrence_test(model, metric, tol=tol)
    vol = rep.volume
    w.table("volume.tsv", ["radius", "m_ball", "partial_integral"],
            list(zip(vol.radii, vol.values, vol.partial_integrals())))
    w.table("resistance.tsv", ["level", "R_eff"], list(zip(rep.resistance.levels, rep.resistance.values)))
    w.curve("volume.dat", vol.radii, vol.values)
    w.curve("partial_integral.dat", vol.radii, vol.partial_integrals())
    w.curve("resistance.dat", rep.resistance.levels, rep.resistance.values)
    vv, rv = rep.volume_verdict, rep.resistance_verdict
    w.table("verdicts.tsv", ["test", "outcome", "exponent_or_increase", "residual", "reason"],
            [["volume", vv.outcome, vv.exponent, vv.residual, vv.reason],
             ["resistance", rv.outcome, rv.tail_increase, rv.log_residual, rv.reason]])
    _count(state, rep.implication_ok)
    state["summary"].append(rep.summary)
