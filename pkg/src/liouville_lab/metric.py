"""Adapted path metrics, intrinsic certificates, jump size and cut-offs."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from .config import Tolerances, get_tolerances
from .form import DirichletFormModel, ModelError, gamma_measures, gamma_pairing_measures


@dataclass(frozen=True, eq=False)
class MetricField:
    """Edge lengths, the induced path metric and the measure split.

    ``m_local + m_jump <= m`` is the split used by the intrinsic certificate;
    both are the length-induced bounds on the energy measures of 1-Lipschitz
    functions.
    """

    base: int
    jump_lengths: np.ndarray
    mesh_lengths: np.ndarray | None
    m_local: np.ndarray
    m_jump: np.ndarray
    graph: sp.csr_matrix
    shrink: int = 0
    dist: np.ndarray | None = None
    jump_size: float | None = None
    local_reach: float = 0.0

    @property
    def reach(self) -> float:
        """Largest distance bridged by one step of either part of the form."""
        return max(self.jump_size or 0.0, self.local_reach)

    def distances_from(self, sources) -> np.ndarray:
        """``rho_A = min_{a in A} rho(a, .)``."""
        sources = np.atleast_1d(np.asarray(sources, dtype=np.int64))
        if sources.size == 0:
            raise ValueError("distance to the empty set is undefined")
        d = dijkstra(self.graph, directed=False, indices=sources, min_only=True)
        return np.asarray(d, dtype=float)

    def ball(self, r: float) -> np.ndarray:
        """Closed ball ``B_r`` about the base point; empty for ``r < 0``."""
        if self.dist is None:
            raise ValueError("metric has no distances; use path_metric_and_balls")
        if r < 0:
            return np.zeros(self.dist.size, dtype=bool)
        return self.dist <= r + 1e-12 * max(1.0, abs(r))

    def ring(self, r: float, R: float, width: float | None = None) -> np.ndarray:
        """``B_{R+w} minus B_{r-w}`` with ``w`` the reach by default."""
        w = self.reach if width is None else width
        return self.ball(R + w) & ~self.ball(r - w)

    @property
    def diameter_from_base(self) -> float:
        return float(self.dist.max())


def jump_degree(model: DirichletFormModel) -> np.ndarray:
    """``Deg(x) = (2 / m(x)) sum_y J(x, y)``."""
    x, _, w = model.ordered_pairs
    return 2.0 * np.bincount(x, weights=w, minlength=model.n) / model.m


def _mesh_density(model: DirichletFormModel) -> np.ndarray:
    loc = model.local
    if loc.density is not None:
        return np.asarray(loc.density)
    m = model.m[: loc.cells + 1]
    return np.minimum(m[:-1], m[1:]) / loc.widths


def _length_graph(n, pairs_i, pairs_j, lengths) -> sp.csr_matrix:
    lo = np.minimum(pairs_i, pairs_j)
    hi = np.maximum(pairs_i, pairs_j)
    order = np.lexsort((lengths, hi, lo))
    lo, hi, lengths = lo[order], hi[order], lengths[order]
    first = np.ones(lo.size, dtype=bool)
    first[1:] = (np.diff(lo) != 0) | (np.diff(hi) != 0)
    lo, hi, lengths = lo[first], hi[first], lengths[first]
    g = sp.coo_matrix((np.concatenate([lengths, lengths]),
                       (np.concatenate([lo, hi]), np.concatenate([hi, lo]))), shape=(n, n))
    return g.tocsr()


def adapted_lengths(model: DirichletFormModel, shrink: int = 0) -> MetricField:
    """Candidate lengths, divided by ``2**shrink``.

    Jump edge: ``min(Deg(x)^{-1/2}, Deg(y)^{-1/2})``. Mesh cell:
    ``dx * sqrt(density / a)``. Overrides from the model replace the rule.
    """
    if not model.is_connected:
        raise ModelError("support graph is disconnected; the path metric would be infinite")
    scale = 0.5 ** shrink
    deg = jump_degree(model)
    i, j = model.edges[:, 0], model.edges[:, 1]
    with np.errstate(divide="ignore"):
        inv = np.where(deg > 0, 1.0 / np.sqrt(deg), np.inf)
    jl = np.minimum(inv[i], inv[j])
    overrides = {(a, b): L for a, b, L in model.length_overrides}
    used = set()
    if overrides:
        for e, (a, b) in enumerate(zip(i.tolist(), j.tolist())):
            if (a, b) in overrides:
                jl[e] = overrides[(a, b)]
                used.add((a, b))
    jl = jl * scale
    ml = None
    pi, pj, pl = [i], [j], [jl]
    m_local = np.zeros(model.n)
    if model.local is not None:
        loc = model.local
        k = np.arange(loc.cells)
        ml = loc.widths * np.sqrt(_mesh_density(model) / loc.conductances)
        for c in range(loc.cells):
            if (c, c + 1) in overrides:
                ml[c] = overrides[(c, c + 1)]
                used.add((c, c + 1))
        ml = ml * scale
        share = 0.5 * loc.weights * ml ** 2
        np.add.at(m_local, k, share)
        np.add.at(m_local, k + 1, share)
        pi.append(k)
        pj.append(k + 1)
        pl.append(ml)
    stray = set(overrides) - used
    if stray:
        raise ModelError(f"length override for a non-edge pair {sorted(stray)[0]}")
    x, y, w = model.ordered_pairs
    jl2 = np.concatenate([jl, jl])
    m_jump = np.bincount(x, weights=w * jl2 ** 2, minlength=model.n)
    graph = _length_graph(model.n, np.concatenate(pi), np.concatenate(pj), np.concatenate(pl))
    return MetricField(model.base, jl, ml, m_local, m_jump, graph, shrink)


def _max_pair_distance(metric: MetricField, a: np.ndarray, b: np.ndarray,
                       lengths: np.ndarray) -> float:
    """``max rho(a_e, b_e)``; edges are scanned by decreasing length, since rho <= length."""
    best = 0.0
    for e in np.argsort(-lengths, kind="stable"):
        if lengths[e] <= best:
            break
        d = dijkstra(metric.graph, directed=False, indices=int(a[e]), limit=float(lengths[e]) * 1.000001)
        best = max(best, float(min(d[int(b[e])], lengths[e])))
    return best


def jump_size(model: DirichletFormModel, metric: MetricField) -> float:
    """``s = max rho(x, y)`` over pairs with ``J(x, y) > 0``; 0 without jumps."""
    if model.edges.shape[0] == 0:
        return 0.0
    return _max_pair_distance(metric, model.edges[:, 0], model.edges[:, 1], metric.jump_lengths)


def local_reach(model: DirichletFormModel, metric: MetricField) -> float:
    """Largest metric length of a mesh cell (0 for pure-jump models)."""
    if model.local is None:
        return 0.0
    k = np.arange(model.local.cells)
    return _max_pair_distance(metric, k, k + 1, metric.mesh_lengths)


def path_metric_and_balls(model: DirichletFormModel, metric: MetricField,
                          radii=(), base: int | None = None):
    """Distances ``rho(o, .)`` and closed balls for each requested radius.

    Returns ``(metric_with_distances, {r: mask})``.
    """
    o = model.base if base is None else int(base)
    dist = np.asarray(dijkstra(metric.graph, directed=False, indices=o), dtype=float)
    if not np.all(np.isfinite(dist)):
        raise ModelError("support graph is disconnected; the path metric would be infinite")
    out = dataclasses.replace(metric, base=o, dist=dist)
    out = dataclasses.replace(out, jump_size=jump_size(model, out), local_reach=local_reach(model, out))
    return out, {r: out.ball(r) for r in radii}


# --------------------------------------------------------------------------
# intrinsic certificate


@dataclass
class IntrinsicReport:
    passed: bool
    split_ok: bool
    lipschitz_ok: bool
    worst_local: float  # max over sets and points of Gamma^(c)(rho_A) - m^(c)
    worst_jump: float
    sets_checked: int
    rows: list[tuple[int, int, float, float]]

    def tsv(self) -> str:
        lines = ["set\tsize\tlocal_excess\tjump_excess"]
        lines += [f"{a}\t{b}\t{c:.17g}\t{d:.17g}" for a, b, c, d in self.rows]
        return "\n".join(lines) + "\n"


def split_ok(model: DirichletFormModel, metric: MetricField, tol: Tolerances | None = None) -> bool:
    tol = tol or get_tolerances()
    return bool(np.all(metric.m_local + metric.m_jump <= model.m * (1 + tol.inequality) + tol.absolute))


def intrinsic_certificate(model: DirichletFormModel, metric: MetricField, seed: int = 0,
                          n_random: int = 32, tol: Tolerances | None = None,
                          max_singletons: int | None = None) -> IntrinsicReport:
    """Check ``Gamma^(c)(rho_A) <= m^(c)`` and ``Gamma^(j)(rho_A) <= m^(j)`` pointwise.

    Sets ``A``: every singleton (or the first ``max_singletons`` of a random
    permutation) plus ``n_random`` random nonempty subsets.
    """
    tol = tol or get_tolerances()
    rng = np.random.default_rng(seed)
    n = model.n
    sets: list[np.ndarray] = []
    singles = np.arange(n) if max_singletons is None or max_singletons >= n else \
        rng.permutation(n)[:max_singletons]
    sets += [np.array([k]) for k in singles]
    for _ in range(n_random):
        size = int(rng.integers(1, n + 1))
        sets.append(np.sort(rng.choice(n, size=size, replace=False)))
    rows = []
    worst_c = worst_j = -np.inf
    lip = True
    slack_c = metric.m_local * tol.inequality + tol.absolute
    slack_j = metric.m_jump * tol.inequality + tol.absolute
    i, j = model.edges[:, 0], model.edges[:, 1]
    for sid, A in enumerate(sets):
        rho_a = metric.distances_from(A)
        gc, gj = gamma_measures(model, rho_a)
        ec = float(np.max(gc - metric.m_local - slack_c))
        ej = float(np.max(gj - metric.m_jump - slack_j))
        worst_c, worst_j = max(worst_c, ec), max(worst_j, ej)
        rows.append((sid, int(A.size), ec, ej))
        if i.size:
            jump_ok = np.abs(rho_a[i] - rho_a[j]) <= metric.jump_lengths * (1 + tol.inequality) + tol.absolute
            lip &= bool(np.all(jump_ok))
    ok_split = split_ok(model, metric, tol)
    passed = ok_split and lip and worst_c <= 0 and worst_j <= 0
    return IntrinsicReport(passed, ok_split, lip, worst_c, worst_j, len(sets), rows)


def intrinsic_metric(model: DirichletFormModel, seed: int = 0, n_random: int = 32,
                     tol: Tolerances | None = None, max_shrink: int = 60,
                     max_singletons: int | None = None) -> MetricField:
    """Adapted lengths, shrunk by powers of two until certified, with distances."""
    tol = tol or get_tolerances()
    for shrink in range(max_shrink + 1):
        metric = adapted_lengths(model, shrink)
        if not split_ok(model, metric, tol):
            continue
        metric, _ = path_metric_and_balls(model, metric)
        report = intrinsic_certificate(model, metric, seed, n_random, tol, max_singletons)
        if report.passed:
            return metric
    raise ModelError("no power-of-two shrink of the adapted lengths is intrinsic")


# --------------------------------------------------------------------------
# cut-off functions


@dataclass(frozen=True, eq=False)
class CutoffProfile:
    r: float
    R: float
    values: np.ndarray


def cutoff_profile(metric: MetricField, r: float, R: float) -> CutoffProfile:
    """``eta(x) = 1 ^ ((R - rho(x, o)) / (R - r))_+``."""
    if not 0 <= r < R:
        raise ValueError(f"cut-off needs 0 <= r < R, got r={r}, R={R}")
    if metric.dist is None:
        raise ValueError("metric has no distances")
    eta = np.clip((R - metric.dist) / (R - r), 0.0, 1.0)
    eta[metric.ball(r)] = 1.0
    outer = metric.dist >= R - 1e-12 * max(1.0, R)
    eta[outer] = 0.0
    return CutoffProfile(float(r), float(R), eta)


@dataclass
class CutoffReport:
    passed: bool
    bounds_ok: bool
    lipschitz_ok: bool
    local_ok: bool
    jump_ok: bool
    localization_ok: bool
    worst_local: float
    worst_jump: float


def cutoff_report(model: DirichletFormModel, metric: MetricField, profile: CutoffProfile,
                  f=None, tol: Tolerances | None = None) -> CutoffReport:
    """Pointwise energy-measure bounds for the cut-off and its localization.

    Local bound is checked on ``B_{R+h} minus B_{r-h}`` with ``h`` the mesh
    reach (a discretized mesh cell straddles the ball boundary); for
    pure-jump models ``h = 0``. Jump bound uses the jump size ``s``.
    """
    tol = tol or get_tolerances()
    r, R, eta = profile.r, profile.R, profile.values
    s, h = metric.jump_size or 0.0, metric.local_reach
    w = (R - r) ** -2
    bounds = bool(np.all((eta >= 0) & (eta <= 1)) and np.all(eta[metric.ball(r)] == 1)
                  and np.all(eta[~metric.ball(R)] == 0))
    i, j = model.edges[:, 0], model.edges[:, 1]
    lip = bool(np.all(np.abs(eta[i] - eta[j]) <= metric.jump_lengths / (R - r) * (1 + tol.inequality) + tol.absolute))
    if model.local is not None:
        k = np.arange(model.local.cells)
        lip &= bool(np.all(np.abs(eta[k] - eta[k + 1]) <= metric.mesh_lengths / (R - r) * (1 + tol.inequality) + tol.absolute))
    gc, gj = gamma_measures(model, eta)
    ring_c = metric.ring(r, R, h)
    ring_j = metric.ring(r, R, s)
    bound_c = w * ring_c * metric.m_local
    bound_j = w * ring_j * metric.m_jump
    ec = float(np.max(gc - bound_c * (1 + tol.inequality) - tol.absolute))
    ej = float(np.max(gj - bound_j * (1 + tol.inequality) - tol.absolute))
    loc_ok = True
    if f is not None:
        f = np.asarray(f, dtype=float)
        pc, pj = gamma_pairing_measures(model, f, eta)
        scale = float(np.sum(np.abs(pc)) + np.sum(np.abs(pj))) + 1.0
        loc_ok &= abs(pc.sum() - pc[ring_c].sum()) <= tol.equality * scale * 10
        # jump pairing over U_{r,R}: both endpoints in the ring
        x, y, wj = model.ordered_pairs
        terms = wj * (f[x] - f[y]) * (eta[x] - eta[y])
        inside = ring_j[x] & ring_j[y]
        loc_ok &= abs(terms.sum() - terms[inside].sum()) <= tol.equality * scale * 10
    passed = bounds and lip and ec <= 0 and ej <= 0 and loc_ok
    return CutoffReport(passed, bounds, lip, ec <= 0, ej <= 0, bool(loc_ok), ec, ej)
