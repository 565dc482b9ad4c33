"""Certificates for the Caccioppoli-type inequalities and the Yau/Karp arguments.

Conventions
-----------
* Jump integrals run over ordered pairs ``(x, y)`` with weight ``J(x, y)``.
* ``(f(x) v f(y))^{p-2}`` with ``f(x) = f(y) = 0`` contributes 0 for every
  ``p``; it always multiplies ``(f(x) - f(y))^2 = 0`` there.
* Strongly local terms are exact integrals over mesh cells, with ``f`` and the
  test function interpolated linearly on each cell (the P1 reading of the
  discretized local energy). Nodal subharmonicity is then weak
  subharmonicity against every nonnegative test function, since ``f'`` is
  constant per cell.

Constants
---------
``key_constant(p) = 2 / ((p - 1) ^ 1)`` is the constant of the key estimate.
Running the Caccioppoli proof with Young parameter ``eps = 1 / (2 C)`` gives

    C_cert = 2 C^2 = 8 / ((p - 1) ^ 1)^2,

valid for the Caccioppoli bound and for the squared estimate, since
``Gamma^(c)(eta) + 2 Gamma^(j)(eta)`` integrates ``f^p`` against at most
``2 m / (R - r)^2`` on the ring.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from .config import Tolerances, get_tolerances, passes
from .families import check_nested
from .form import DirichletFormModel, lp_norm
from .harmonic import classify_harmonicity
from .metric import MetricField, cutoff_profile
from .recurrence import GrowthCurve, Verdict, divergence_verdict


class NotSubharmonicError(ValueError):
    """The function fails the subharmonicity gate on the region a proof needs."""


def key_constant(p: float) -> float:
    return 2.0 / min(p - 1.0, 1.0)


def certified_constant(p: float) -> float:
    return 2.0 * key_constant(p) ** 2


@dataclass
class InequalityCertificate:
    name: str
    lhs: float
    rhs: float
    constant: float
    passed: bool
    context: dict = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    def row(self) -> dict:
        out = {"name": self.name, "lhs": self.lhs, "rhs": self.rhs,
               "constant": self.constant, "slack": self.slack, "pass": self.passed}
        out.update(self.context)
        return out


def _certificate(name, lhs, rhs, constant, tol, **context) -> InequalityCertificate:
    context = {k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in context.items()}
    return InequalityCertificate(name, float(lhs), float(rhs), float(constant),
                                 bool(passes(lhs, rhs, tol)), context)


def _check_inputs(f, p):
    if not (1.0 < p < math.inf):
        raise ValueError(f"p must lie in (1, inf), got p={p}")
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise ValueError("f must be nonnegative")
    return f


def _gate(model, f, region, tol, what):
    report = classify_harmonicity(model, f, region, tol)
    if not report.subharmonic:
        raise NotSubharmonicError(f"f is not subharmonic on the region required by {what} "
                                  f"(worst |Lf| = {report.worst_violation:.3g})")


def _max_power(a, b, expo, factor):
    """``max(a, b)^expo``, with 0 where the base vanishes against a zero factor."""
    base = np.maximum(a, b)
    out = np.zeros_like(base)
    nz = base > 0
    out[nz] = base[nz] ** expo
    if expo < 0 and np.any(~nz & (factor != 0)):
        raise ValueError("0^(p-2) met against a nonzero factor")
    return out


# --------------------------------------------------------------------------
# cellwise integrals for the strongly local part

_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _power_poly_integral(u0, u1, alpha, tpoly: Polynomial, lo=0.0, hi=math.inf) -> float:
    """``int_0^1 1[lo <= u(t) < hi] u(t)^alpha P(t) dt`` with ``u`` linear."""
    du = u1 - u0
    if du == 0:
        if not (lo <= u0 < hi):
            return 0.0
        if u0 == 0:
            return 0.0 if alpha > 0 else math.nan
        return u0 ** alpha * float(tpoly.integ()(1.0) - tpoly.integ()(0.0))
    ta, tb = sorted(((lo - u0) / du, (hi - u0) / du if math.isfinite(hi) else math.copysign(math.inf, du)))
    ta, tb = max(ta, 0.0), min(tb, 1.0)
    if tb <= ta:
        return 0.0
    if abs(du) >= 1e-3 * max(abs(u0), abs(u1)):
        upoly = tpoly(Polynomial([-u0 / du, 1.0 / du]))
        ua, ub = u0 + ta * du, u0 + tb * du
        total = 0.0
        for k, c in enumerate(upoly.coef):
            e = alpha + k + 1.0
            total += c * (ub ** e - ua ** e) / e
        return total / du
    t = 0.5 * (tb - ta) * _GL_X + 0.5 * (ta + tb)
    u = u0 + t * du
    return float(0.5 * (tb - ta) * np.sum(_GL_W * u ** alpha * tpoly(t)))


def _local_cells(model):
    loc = model.local
    k = np.arange(loc.cells)
    return k, loc.weights


def _local_energy_term(model, f, weight, p, cells=None, cap=math.inf) -> float:
    """``sum_cells w (df)^2 int 1[f < cap] f^{p-2} weight^2 dt`` (weight P1)."""
    if model.local is None:
        return 0.0
    k, w = _local_cells(model)
    total = 0.0
    for c in (k if cells is None else np.flatnonzero(cells)):
        u0, u1 = f[c], f[c + 1]
        if u0 == u1:
            continue
        q = Polynomial([weight[c], weight[c + 1] - weight[c]])
        total += w[c] * (u1 - u0) ** 2 * _power_poly_integral(u0, u1, p - 2.0, q * q, 0.0, cap)
    return total


def _local_cross_term(model, f, phi, p, cap) -> float:
    """``int f_cap^{p-1} phi dGamma^(c)(f, phi)`` cellwise."""
    if model.local is None:
        return 0.0
    k, w = _local_cells(model)
    total = 0.0
    for c in k:
        u0, u1 = f[c], f[c + 1]
        dphi = phi[c + 1] - phi[c]
        if u0 == u1 or dphi == 0:
            continue
        q = Polynomial([phi[c], dphi])
        inner = _power_poly_integral(u0, u1, p - 1.0, q, 0.0, cap)
        if math.isfinite(cap):
            inner += cap ** (p - 1.0) * _power_poly_integral(u0, u1, 0.0, q, cap, math.inf)
        total += w[c] * (u1 - u0) * dphi * inner
    return total


def _cells_within(model, mask):
    k = np.arange(model.local.cells)
    return mask[k] & mask[k + 1]


def _jump_energy_term(model, f, weight_y, p, pair_mask=None) -> float:
    x, y, w = model.ordered_pairs
    d = f[x] - f[y]
    coef = w * weight_y[y] * d * d
    if pair_mask is not None:
        coef = np.where(pair_mask, coef, 0.0)
    return float(np.sum(_max_power(f[x], f[y], p - 2.0, coef) * coef))


# --------------------------------------------------------------------------
# certificates


def key_estimate_sides(model: DirichletFormModel, metric: MetricField | None, f, phi, p: float,
                       n: float | None = None, gate: bool = True,
                       tol: Tolerances | None = None) -> InequalityCertificate:
    """Both sides of the key estimate with ``f_n = f ^ n``, ``A_n = {f < n}``.

    The test function ``phi`` is any vector; subharmonicity is required on its
    support and the support's neighbours.
    """
    tol = tol or get_tolerances()
    f = _check_inputs(f, p)
    phi = np.asarray(phi, dtype=float)
    if n is None:
        n = math.ceil(float(f.max())) + 1.0
    if gate:
        _gate(model, f, model.neighbours(np.flatnonzero(phi != 0)), tol, "the key estimate")
    C = key_constant(p)
    fn = np.minimum(f, n)
    ones = np.ones(model.n)
    lhs_jump = _jump_energy_term(model, fn, phi * phi / ones, p)
    lhs_local = _local_energy_term(model, f, phi, p, cap=n)
    x, y, w = model.ordered_pairs
    cross_jump = float(np.sum(w * fn[x] ** (p - 1.0) * phi[y] * (f[x] - f[y]) * (phi[x] - phi[y])))
    cross_local = _local_cross_term(model, f, phi, p, n)
    third = float(np.sum(w * fn[x] ** (p - 1.0) * (f[x] - f[y]) * (phi[x] - phi[y]) ** 2))
    lhs = lhs_local + lhs_jump
    rhs = -C * (cross_local + cross_jump)
    return _certificate("key", lhs, rhs, C, tol, p=p, n=float(n), lhs_local=lhs_local,
                        lhs_jump=lhs_jump, cross_local=cross_local, cross_jump=cross_jump,
                        third_jump=third)


def _ring_norm(model, metric, f, p, r, R):
    ring = metric.ring(r, R, metric.reach)
    return float(np.sum(model.m[ring] * f[ring] ** p)), ring


def caccioppoli_sides(model: DirichletFormModel, metric: MetricField, f, p: float,
                      r: float, R: float, constant: float | None = None,
                      gate: bool = True, tol: Tolerances | None = None) -> InequalityCertificate:
    """Caccioppoli bound on ``B_r`` by the ``L^p`` mass on the ring.

    The ring is ``B_{R+w} minus B_{r-w}`` with ``w`` the metric reach (the
    jump size for pure-jump models).
    """
    tol = tol or get_tolerances()
    f = _check_inputs(f, p)
    if not 0 < r < R:
        raise ValueError(f"need 0 < r < R, got r={r}, R={R}")
    if gate:
        _gate(model, f, model.neighbours(metric.ball(R)), tol, "the Caccioppoli inequality")
    C = certified_constant(p) if constant is None else float(constant)
    inner = metric.ball(r)
    lhs_jump = _jump_energy_term(model, f, inner.astype(float), p)
    lhs_local = 0.0
    if model.local is not None:
        lhs_local = _local_energy_term(model, f, np.ones(model.n), p, cells=_cells_within(model, inner))
    lhs = lhs_local + lhs_jump
    norm, _ = _ring_norm(model, metric, f, p, r, R)
    rhs = C / (R - r) ** 2 * norm
    empirical = lhs * (R - r) ** 2 / norm if norm > 0 else (0.0 if lhs == 0 else math.inf)
    return _certificate("caccioppoli", lhs, rhs, C, tol, p=p, r=r, R=R, s=metric.reach,
                        ring_norm=norm, empirical_constant=empirical)


def squared_estimate_sides(model: DirichletFormModel, metric: MetricField, f, p: float,
                           r: float, R: float, constant: float | None = None,
                           gate: bool = True, tol: Tolerances | None = None) -> InequalityCertificate:
    """``(eta-weighted energy)^2 <= C/(R-r)^2 ||f 1_ring||_p^p * (annulus energy)``."""
    tol = tol or get_tolerances()
    f = _check_inputs(f, p)
    if not 0 < r < R:
        raise ValueError(f"need 0 < r < R, got r={r}, R={R}")
    if gate:
        _gate(model, f, model.neighbours(metric.ball(R)), tol, "the squared estimate")
    C = certified_constant(p) if constant is None else float(constant)
    eta = cutoff_profile(metric, r, R).values
    s = metric.reach
    inner = _jump_energy_term(model, f, eta * eta, p) + _local_energy_term(model, f, eta, p)
    big, small = metric.ball(R + s), metric.ball(r - s)
    x, y, _ = model.ordered_pairs
    pairs = big[x] & big[y] & ~(small[x] & small[y])
    ann = _jump_energy_term(model, f, eta * eta, p, pair_mask=pairs)
    if model.local is not None:
        inr, outR = metric.ball(r), ~metric.ball(R)
        k = np.arange(model.local.cells)
        cells = ~(inr[k] & inr[k + 1]) & ~(outR[k] & outR[k + 1])
        ann += _local_energy_term(model, f, eta, p, cells=cells)
    norm, _ = _ring_norm(model, metric, f, p, r, R)
    q = max(p, 2 * p - 2)
    return _certificate("squared", inner ** 2, C / (R - r) ** 2 * norm * ann, C, tol,
                        p=p, r=r, R=R, s=s, q=q, inner=inner, annulus=ann, ring_norm=norm)


# --------------------------------------------------------------------------
# vanishing weighted energy forces constancy


@dataclass
class VanishingCheck:
    lhs: float
    variance: float
    connected: bool
    implication_holds: bool


def weighted_energy(model: DirichletFormModel, f, p: float) -> float:
    """``int f^{p-2} dGamma^(c)(f) + sum (f(x) v f(y))^{p-2} (f(x)-f(y))^2 J``."""
    f = _check_inputs(f, p)
    return _jump_energy_term(model, f, np.ones(model.n), p) + _local_energy_term(
        model, f, np.ones(model.n), p)


def m_variance(model: DirichletFormModel, f) -> float:
    f = np.asarray(f, dtype=float)
    mean = float(np.sum(model.m * f) / model.mass)
    return float(np.sum(model.m * (f - mean) ** 2) / model.mass)


def vanishing_energy_check(model: DirichletFormModel, f, p: float, lhs_tol: float = 1e-12,
                           var_tol: float = 1e-10) -> VanishingCheck:
    """If the weighted energy is below ``lhs_tol`` the variance must be tiny."""
    f = np.asarray(f, dtype=float)
    lhs = weighted_energy(model, f, p)
    var = m_variance(model, f)
    scale = max(1.0, float(np.max(np.abs(f)))) ** 2
    connected = model.is_connected
    holds = (not connected) or lhs > lhs_tol or var <= var_tol * scale
    return VanishingCheck(lhs, var, connected, holds)


# --------------------------------------------------------------------------
# Karp


@dataclass
class KarpSequence:
    R: float
    s: float
    p: float
    constant: float
    radii: list[float]
    v: list[float]
    Q: list[float]
    squared_rows: list[InequalityCertificate]
    telescoping: list[InequalityCertificate]
    partial_sum: float
    partial_bound: float
    proxy: Verdict | None
    verdict: str
    reason: str

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.squared_rows) and all(c.passed for c in self.telescoping)


def safe_radius(model: DirichletFormModel, metric: MetricField) -> float:
    """Distance from the base point to the truncation frontier (inf if none)."""
    fr = np.asarray(model.space.frontier, dtype=np.int64)
    return float(metric.dist[fr].min()) if fr.size else math.inf


def lp_growth_curve(model: DirichletFormModel, metric: MetricField, f, p: float,
                    radii) -> GrowthCurve:
    f = np.asarray(f, dtype=float)
    vals = [float(np.sum(model.m[metric.ball(r)] * f[metric.ball(r)] ** p)) for r in radii]
    return GrowthCurve(np.asarray(radii, dtype=float), np.asarray(vals))


def _default_radii(metric, top, count=48):
    pos = metric.dist[metric.dist > 0]
    lo = float(pos.min()) / 4 if pos.size else 1e-3
    if not top > lo:
        return np.array([top])
    return np.geomspace(lo, top, count)


def karp_run(model: DirichletFormModel, metric: MetricField, f, p: float, R: float,
             max_levels: int | None = None, gate: bool = True,
             tol: Tolerances | None = None) -> KarpSequence:
    """Dyadic radii ``R_n = 2^n R``, ``Q_n``, ``v_n`` and the telescoping bound."""
    tol = tol or get_tolerances()
    f = _check_inputs(f, p)
    s = metric.reach
    if R < 4 * s:
        raise ValueError(f"Karp's argument needs R >= 4s = {4 * s:.6g}, got R={R}")
    if R <= 0:
        raise ValueError("R must be positive")
    limit = safe_radius(model, metric)
    diam = metric.diameter_from_base
    levels = []
    n = 1
    while True:
        Rn = R * 2 ** n
        if math.isfinite(limit):
            if Rn + s >= limit:
                break
        elif R * 2 ** (n - 1) > diam:
            break
        levels.append(n)
        if max_levels is not None and len(levels) >= max_levels:
            break
        n += 1
    if not levels:
        raise ValueError("truncation too small for R_1 = 2R")
    Rs = [R * 2 ** k for k in range(0, levels[-1] + 1)]
    if gate:
        _gate(model, f, model.neighbours(metric.ball(Rs[-1])), tol, "Karp's argument")
    C = certified_constant(p)
    x, y, _ = model.ordered_pairs
    Q, v, sq_rows = [], [], []
    for k in levels:
        Rn, Rp = Rs[k], Rs[k - 1]
        eta = cutoff_profile(metric, Rp + s, Rn - s).values
        ball = metric.ball(Rn)
        q = _jump_energy_term(model, f, eta * eta, p, pair_mask=ball[x] & ball[y])
        if model.local is not None:
            q += _local_energy_term(model, f, eta, p, cells=_cells_within(model, ball))
        Q.append(q)
        ring = ball & ~metric.ball(Rp)
        v.append(float(np.sum(model.m[ring] * f[ring] ** p)))
        sq_rows.append(squared_estimate_sides(model, metric, f, p, Rp + s, Rn - s, C,
                                              gate=False, tol=tol))
    tele = []
    partial = 0.0
    for i in range(1, len(levels)):
        n_ = levels[i]
        Rn, q_prev, q_now, vn = Rs[n_], Q[i - 1], Q[i], v[i]
        step = _certificate("karp-step", q_now ** 2, 16 * C * vn / Rn ** 2 * (q_now - q_prev), C, tol,
                            n=n_, R_n=Rn, v_n=vn, Q_prev=q_prev, Q_n=q_now)
        tele.append(step)
        if q_prev > 0 and vn > 0:
            lhs = Rn ** 2 / vn
            rhs = 16 * C * (1.0 / q_prev - 1.0 / q_now)
            tele.append(_certificate("karp-telescoping", lhs, rhs, C, tol, n=n_, R_n=Rn,
                                     v_n=vn, Q_prev=q_prev, Q_n=q_now))
            partial += lhs
    bound = 16 * C / Q[0] if Q[0] > 0 else math.inf
    top = min(limit - s, diam) if math.isfinite(limit) else diam
    proxy = divergence_verdict(lp_growth_curve(model, metric, f, p, _default_radii(metric, top)),
                               tol=tol)
    scale = max(1.0, float(f.max())) ** max(p, 2.0)
    q_zero = max(Q) <= tol.absolute * scale
    certs_ok = all(c.passed for c in sq_rows) and all(c.passed for c in tele)
    if not certs_ok:
        verdict, reason = "violation", "a certificate failed"
    elif proxy.outcome == "diverges" and q_zero:
        var = m_variance(model, np.where(metric.ball(Rs[-1]), f, f[model.base]))
        verdict = "constant" if var <= tol.kernel * scale else "violation"
        reason = "Q_n vanish and the growth integral diverges"
    elif proxy.outcome == "diverges":
        verdict = "inconclusive"
        reason = ("Q_1 > 0 although the growth integral diverges: the telescoped sum stays "
                  "below 16C/Q_1 at this truncation depth")
    else:
        verdict, reason = "inconclusive", f"growth integral proxy: {proxy.outcome} ({proxy.reason})"
    return KarpSequence(R, s, p, C, Rs[1:], v, Q, sq_rows, tele, partial, bound, proxy,
                        verdict, reason)


# --------------------------------------------------------------------------
# Yau


@dataclass
class YauReport:
    verdict: str                 # constant | inconclusive | rejected | violation
    reason: str
    case: str
    lhs: dict                    # r -> Caccioppoli left side
    bounds: dict                 # r -> smallest certified right side over R
    norm_curve: GrowthCurve | None
    norm_exponent: float | None
    certificates: list[InequalityCertificate]


def yau_run(family, f_family, p: float, metrics=None, r_grid=None,
            tol: Tolerances | None = None) -> YauReport:
    """Let ``R`` grow, then ``r``, in the Caccioppoli bound on a nested family."""
    from .metric import intrinsic_metric

    tol = tol or get_tolerances()
    if not 1.0 < p < math.inf:
        raise ValueError(f"p must lie in (1, inf), got p={p}")
    check_nested(family)
    fs = [np.asarray(f, dtype=float) for f in f_family]
    for a, b, fa, fb in zip(family, family[1:], fs, fs[1:]):
        idx = {lab: k for k, lab in enumerate(b.space.labels)}
        pos = np.array([idx[lab] for lab in a.space.labels])
        if not np.allclose(fa, fb[pos], rtol=1e-12, atol=1e-12):
            raise ValueError("f is not consistent across truncations")
    case = "a" if p <= 2 else "d"
    for model, f in zip(family, fs):
        if np.any(f < 0):
            return YauReport("rejected", "f is negative somewhere", case, {}, {}, None, None, [])
        interior = np.ones(model.n, dtype=bool)
        interior[list(model.space.frontier)] = False
        if not classify_harmonicity(model, f, interior, tol).subharmonic:
            return YauReport("rejected", "f is not subharmonic on the truncation interior",
                             case, {}, {}, None, None, [])
    model, f = family[-1], fs[-1]
    metric = metrics[-1] if metrics is not None else intrinsic_metric(model)
    s = metric.reach
    limit = safe_radius(model, metric)
    top = (limit if math.isfinite(limit) else metric.diameter_from_base) - s
    if r_grid is None:
        pos = metric.dist[metric.dist > 0]
        r_grid = np.geomspace(float(pos.min()), max(top / 4, float(pos.min()) * 1.01), 8)
    C = certified_constant(p)
    lhs, bounds, certs = {}, {}, []
    for r in r_grid:
        best = math.inf
        for frac in (0.25, 0.5, 0.75, 1.0):
            R = r + frac * (top - s - r)
            if R <= r:
                continue
            cert = caccioppoli_sides(model, metric, f, p, float(r), float(R), C, gate=False, tol=tol)
            certs.append(cert)
            best = min(best, cert.rhs)
            lhs[float(r)] = cert.lhs
        bounds[float(r)] = best
    curve = lp_growth_curve(model, metric, f, p, _default_radii(metric, top))
    exponent = _top_decade_exponent(curve)
    scale = max(1.0, float(f.max())) ** max(p, 2.0)
    lhs_max = max(lhs.values()) if lhs else 0.0
    if not all(c.passed for c in certs):
        return YauReport("violation", "a Caccioppoli certificate failed", case, lhs, bounds,
                         curve, exponent, certs)
    if lhs_max <= tol.absolute * scale:
        var = m_variance(model, f)
        verdict = "constant" if var <= tol.kernel * scale else "violation"
        return YauReport(verdict, "Caccioppoli left side vanishes for every r", case, lhs,
                         bounds, curve, exponent, certs)
    if exponent is not None and exponent > tol.exponent_band:
        return YauReport("inconclusive",
                         f"hypothesis violated: ||f 1_B_r||_p^p grows like r^{exponent:.3f}",
                         case, lhs, bounds, curve, exponent, certs)
    return YauReport("inconclusive", "left side did not vanish at this truncation depth",
                     case, lhs, bounds, curve, exponent, certs)


def _top_decade_exponent(curve: GrowthCurve) -> float | None:
    r, g = curve.radii, curve.values
    sel = (r >= r[-1] / 10) & (g > 0)
    if sel.sum() < 3:
        return None
    return float(np.polyfit(np.log(r[sel]), np.log(g[sel]), 1)[0])


def lp_norm_on(model, f, p, mask) -> float:
    return lp_norm(np.asarray(f)[mask], model.m[mask], p)
