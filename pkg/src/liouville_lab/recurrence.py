"""Volume-growth recurrence test, effective resistance and excessive functions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import shortest_path

from .config import Tolerances, get_tolerances
from .form import DirichletFormModel, ModelError, apply_generator, stiffness_matrix
from .harmonic import classify_harmonicity


@dataclass
class GrowthCurve:
    radii: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.radii = np.asarray(self.radii, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.radii.shape != self.values.shape:
            raise ValueError("radii and values differ in length")
        if np.any(np.diff(self.radii) <= 0):
            raise ValueError("radii must be strictly increasing")

    def partial_integrals(self) -> np.ndarray:
        """Trapezoid partial integrals of ``r / g(r)``."""
        r, g = self.radii, self.values
        with np.errstate(divide="ignore"):
            h = np.where(g > 0, r / g, np.inf)
        steps = 0.5 * (h[1:] + h[:-1]) * np.diff(r)
        return np.concatenate([[0.0], np.cumsum(steps)])

    def tsv(self) -> str:
        lines = ["radius\tvalue\tpartial_integral"]
        lines += [f"{r:.17g}\t{g:.17g}\t{i:.17g}"
                  for r, g, i in zip(self.radii, self.values, self.partial_integrals())]
        return "\n".join(lines) + "\n"


@dataclass
class Verdict:
    outcome: str                   # diverges | converges | inconclusive
    exponent: float | None
    residual: float | None
    r0: float
    reason: str = ""
    log_slope: float | None = None
    partial_integrals: np.ndarray | None = None


def _fit(x, y):
    """Least-squares line; returns (slope, intercept, rms residual)."""
    coef = np.polyfit(x, y, 1)
    res = y - np.polyval(coef, x)
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(res ** 2)))


def divergence_verdict(curve: GrowthCurve, r0: float | None = None, critical: float = 2.0,
                       tol: Tolerances | None = None) -> Verdict:
    """Decide whether ``int^inf r / g(r) dr`` diverges from the top decade of data.

    ``g ~ r^alpha`` is fitted on ``[r_max / 10, r_max]``. Inside the band
    ``|alpha - critical| <= exponent_band`` the partial integral is fitted
    against ``a + b ln r``; a good fit with ``b > 0`` means a logarithmically
    divergent integral.
    """
    tol = tol or get_tolerances()
    r, g = curve.radii, curve.values
    r0 = float(r[0]) if r0 is None else float(r0)
    partial = curve.partial_integrals()
    keep = r >= r0
    if not keep.any() or r[-1] / max(r0, 1e-300) < 100.0:
        return Verdict("inconclusive", None, None, r0, "fewer than 2 decades of radii above r0",
                       partial_integrals=partial)
    top = keep & (r >= r[-1] / 10.0) & (g > 0)
    if top.sum() < 3:
        return Verdict("inconclusive", None, None, r0, "too few samples in the top decade",
                       partial_integrals=partial)
    alpha, _, res = _fit(np.log(r[top]), np.log(g[top]))
    band = tol.exponent_band
    if alpha < critical - band:
        return Verdict("diverges", alpha, res, r0, f"exponent {alpha:.4f} < {critical - band:g}",
                       partial_integrals=partial)
    if alpha > critical + band:
        return Verdict("converges", alpha, res, r0, f"exponent {alpha:.4f} > {critical + band:g}",
                       partial_integrals=partial)
    # log detection on the partial integral, anchored at the first top sample
    I = partial[top]
    b, _, lres = _fit(np.log(r[top]), I)
    rise = b * math.log(r[top][-1] / r[top][0])
    rel = lres / rise if rise > 0 else math.inf
    if b > 0 and rel < tol.log_fit_residual:
        return Verdict("diverges", alpha, rel, r0, "logarithmic growth of the partial integral",
                       log_slope=b, partial_integrals=partial)
    return Verdict("inconclusive", alpha, res, r0, f"exponent {alpha:.4f} within the critical band",
                   log_slope=b, partial_integrals=partial)


# --------------------------------------------------------------------------
# volume


def volume_curve(model: DirichletFormModel, metric, radii) -> GrowthCurve:
    """``m(B_r)`` on a truncation, for radii the truncation fully covers.

    Balls must stay off the frontier so the masses equal those of the
    untruncated space.
    """
    radii = np.asarray(radii, dtype=float)
    fr = np.asarray(model.space.frontier, dtype=np.int64)
    cover = float(metric.dist[fr].min()) if fr.size else math.inf
    # same guard as MetricField.ball
    if radii.size and radii.max() >= cover - 1e-12 * max(1.0, cover):
        raise ValueError(f"radius {radii.max():.6g} beyond family coverage {cover:.6g}")
    masses = np.array([float(model.m[metric.ball(r)].sum()) for r in radii])
    return GrowthCurve(radii, masses)


def coverage_radius(model: DirichletFormModel, metric) -> float:
    fr = np.asarray(model.space.frontier, dtype=np.int64)
    return float(metric.dist[fr].min()) if fr.size else float(metric.dist.max())


# --------------------------------------------------------------------------
# effective resistance


@dataclass
class ResistanceCurve:
    levels: np.ndarray
    values: np.ndarray

    def tsv(self) -> str:
        lines = ["level\tR_eff"]
        lines += [f"{n}\t{v:.17g}" for n, v in zip(self.levels, self.values)]
        return "\n".join(lines) + "\n"


def hop_distances(model: DirichletFormModel, base: int | None = None) -> np.ndarray:
    o = model.base if base is None else int(base)
    d = shortest_path(model.support_graph, directed=False, unweighted=True, indices=o)
    return np.asarray(d)


def resistance_curve(model: DirichletFormModel, levels, base: int | None = None) -> ResistanceCurve:
    """``R_eff(o, {hop >= n})`` for each level ``n >= 1``.

    The potential is 1 at ``o``, 0 from hop distance ``n`` on, harmonic in
    between; ``R_eff = 1 / E(f)``. Levels must stay inside the truncation.
    """
    if not model.is_connected:
        raise ModelError("support graph is disconnected")
    o = model.base if base is None else int(base)
    hop = hop_distances(model, o)
    fr = np.asarray(model.space.frontier, dtype=np.int64)
    cover = float(hop[fr].min()) if fr.size else float(hop.max())
    K = sp.csr_matrix(stiffness_matrix(model))
    values = []
    levels = np.asarray(levels, dtype=np.int64)
    for n in levels:
        if n < 1:
            raise ValueError("levels start at 1")
        if n > cover:
            raise ValueError(f"level {n} beyond family coverage {cover:g}")
        inner = np.flatnonzero((hop < n) & (np.arange(model.n) != o))
        if inner.size == 0:
            energy = float(K[o, o])
        else:
            Kuu = sp.csc_matrix(K[inner][:, inner])
            rhs = -np.asarray(K[inner][:, [o]].toarray()).ravel()
            u = spla.splu(Kuu).solve(rhs)
            energy = float(K[o, o] + (K[[o]][:, inner] @ u)[0])
        values.append(1.0 / energy)
    return ResistanceCurve(levels, np.array(values))


@dataclass
class ResistanceVerdict:
    outcome: str                   # bounded | divergent | inconclusive
    tail_increase: float           # relative increase over the final tenth of levels
    power_slope: float | None
    power_residual: float | None
    log_slope: float | None
    log_residual: float | None
    reason: str = ""


def resistance_verdict(curve: ResistanceCurve, tol: Tolerances | None = None) -> ResistanceVerdict:
    """``bounded`` if the last tenth of the level range adds under 1 percent.

    Otherwise ``divergent`` when a positive-slope power fit (log R vs log n)
    or log fit (R vs ln n) over the top decade has relative residual below
    the threshold.
    """
    tol = tol or get_tolerances()
    n = curve.levels.astype(float)
    R = curve.values
    nmax = n[-1]
    prev = np.flatnonzero(n <= 0.9 * nmax)
    if prev.size == 0:
        return ResistanceVerdict("inconclusive", math.nan, None, None, None, None, "too few levels")
    inc = float((R[-1] - R[prev[-1]]) / R[-1])
    top = n >= nmax / 10.0
    ps = pr = ls = lr = None
    if top.sum() >= 3:
        ps, _, pr = _fit(np.log(n[top]), np.log(R[top]))
        ls, _, lres = _fit(np.log(n[top]), R[top])
        lr = lres / float(np.mean(np.abs(R[top])))
    if inc < tol.bounded_increase:
        return ResistanceVerdict("bounded", inc, ps, pr, ls, lr, "final-tenth increase below threshold")
    if ps is not None and ((ps > 0 and pr < tol.log_fit_residual) or (ls > 0 and lr < tol.log_fit_residual)):
        return ResistanceVerdict("divergent", inc, ps, pr, ls, lr, "positive-slope growth fit")
    return ResistanceVerdict("inconclusive", inc, ps, pr, ls, lr, "no fit qualifies")


# --------------------------------------------------------------------------
# excessive functions


@dataclass
class ExcessiveReport:
    excessive: bool
    values: np.ndarray             # (Lh)(x)
    pointwise: np.ndarray          # (Lh)(x) >= -threshold
    complement_subharmonic: bool | None   # 1 - h subharmonic, when ||h||_inf <= 1


def excessive_check(model: DirichletFormModel, h, tol: Tolerances | None = None) -> ExcessiveReport:
    """``h >= 0`` is excessive when ``E(h, phi) >= 0`` for every ``phi >= 0``."""
    tol = tol or get_tolerances()
    h = np.asarray(h, dtype=float)
    if np.any(h < 0):
        raise ValueError("h must be nonnegative")
    lh = apply_generator(model, h)
    thr = tol.harmonic * max(1.0, float(np.max(np.abs(h))))
    point = lh >= -thr
    comp = None
    if float(h.max()) <= 1.0:
        comp = classify_harmonicity(model, 1.0 - h, tol=tol).subharmonic
    return ExcessiveReport(bool(point.all()), lh, point, comp)


# --------------------------------------------------------------------------
# joint test


@dataclass
class RecurrenceReport:
    volume: GrowthCurve
    volume_verdict: Verdict
    resistance: ResistanceCurve
    resistance_verdict: ResistanceVerdict
    implication_ok: bool
    extra: dict = field(default_factory=dict)

    @property
    def summary(self) -> str:
        return (f"volume: {self.volume_verdict.outcome}; "
                f"resistance: {self.resistance_verdict.outcome}")

    @property
    def recurrent(self) -> bool:
        return self.resistance_verdict.outcome == "divergent"


def default_radii(metric, top: float, count: int = 64) -> np.ndarray:
    pos = metric.dist[metric.dist > 0]
    lo = min(float(pos.min()) / 2, top / 100.0)
    return np.geomspace(lo, top, count)


def recurrence_test(model: DirichletFormModel, metric, radii=None, levels=None,
                    tol: Tolerances | None = None) -> RecurrenceReport:
    """Volume verdict and resistance verdict; only ``diverges => divergent`` is asserted."""
    tol = tol or get_tolerances()
    if radii is None:
        radii = default_radii(metric, coverage_radius(model, metric) * (1 - 1e-9))
    vol = volume_curve(model, metric, radii)
    vv = divergence_verdict(vol, tol=tol)
    if levels is None:
        hop = hop_distances(model)
        fr = np.asarray(model.space.frontier, dtype=np.int64)
        nmax = int(hop[fr].min()) if fr.size else int(hop.max())
        levels = np.arange(1, nmax + 1)
    res = resistance_curve(model, levels)
    rv = resistance_verdict(res, tol)
    ok = not (vv.outcome == "diverges" and rv.outcome != "divergent")
    return RecurrenceReport(vol, vv, res, rv, ok)
