"""Weakly (sub)harmonic functions on finite models.

On a finite model ``int dGamma(f, phi) = <Lf, phi>_m`` for every ``phi``, so
weak subharmonicity against nonnegative test functions supported in a set is
the pointwise condition ``Lf <= 0`` on that set.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .config import Tolerances, get_tolerances
from .form import DirichletFormModel, ModelError, apply_generator, as_mask, gamma_measures, stiffness_matrix


def solve_dirichlet(model: DirichletFormModel, boundary, values, source=None,
                    tol: Tolerances | None = None) -> np.ndarray:
    """Extension of ``values`` on ``boundary`` with ``Lf = source`` inside.

    ``source`` defaults to zero (the harmonic extension, i.e. the energy
    minimizer). The reduced system on interior unknowns is symmetric positive
    definite; the solution is refined until the residual is below 1e-12.
    """
    tol = tol or get_tolerances()
    bmask = as_mask(model.n, boundary)
    if not bmask.any():
        raise ModelError("boundary set must be nonempty")
    values = np.asarray(values, dtype=float)
    f = np.zeros(model.n)
    f[bmask] = values if values.size == bmask.sum() else values[bmask]
    interior = np.flatnonzero(~bmask)
    if interior.size == 0:
        return f
    adj = model.support_graph
    sub = adj[interior][:, interior]
    ncomp, labels = connected_components(sub, directed=False)
    touches = np.asarray(adj[interior][:, np.flatnonzero(bmask)].sum(axis=1)).ravel() > 0
    for c in range(ncomp):
        if not touches[labels == c].any():
            raise ModelError("an interior component is disconnected from the boundary")
    K = stiffness_matrix(model)
    Kii = sp.csc_matrix(K[interior][:, interior])
    rhs = -(K[interior][:, np.flatnonzero(bmask)] @ f[bmask])
    if source is not None:
        rhs = rhs + (model.m * np.asarray(source, dtype=float))[interior]
    lu = spla.splu(Kii)
    x = lu.solve(rhs)
    scale = max(1.0, float(np.max(np.abs(rhs))) if rhs.size else 1.0)
    for _ in range(5):
        res = rhs - Kii @ x
        if np.max(np.abs(res)) <= 1e-12 * scale:
            break
        x = x + lu.solve(res)
    f[interior] = x
    return f


@dataclass
class HarmonicityReport:
    values: np.ndarray           # (Lf)(x) for every x
    interior: np.ndarray         # mask the classification refers to
    classification: str          # harmonic | subharmonic | superharmonic | none
    worst_violation: float       # max |Lf| on the interior

    @property
    def subharmonic(self) -> bool:
        return self.classification in ("harmonic", "subharmonic")


def classify_harmonicity(model: DirichletFormModel, f, interior=None,
                         tol: Tolerances | None = None) -> HarmonicityReport:
    tol = tol or get_tolerances()
    f = np.asarray(f, dtype=float)
    lf = apply_generator(model, f)
    mask = np.ones(model.n, dtype=bool) if interior is None else as_mask(model.n, interior)
    vals = lf[mask]
    scale = tol.harmonic * max(1.0, float(np.max(np.abs(f))) if f.size else 1.0)
    if vals.size == 0 or np.max(np.abs(vals)) <= scale:
        kind = "harmonic"
    elif np.all(vals <= scale):
        kind = "subharmonic"
    elif np.all(vals >= -scale):
        kind = "superharmonic"
    else:
        kind = "none"
    worst = float(np.max(np.abs(vals))) if vals.size else 0.0
    return HarmonicityReport(lf, mask, kind, worst)


def is_subharmonic_on(model: DirichletFormModel, f, region, tol: Tolerances | None = None) -> bool:
    return classify_harmonicity(model, f, region, tol).subharmonic


@dataclass
class GammaVanishing:
    total: float
    constant: bool | None       # None when the model is reducible
    spread: float               # max f - min f


def gamma_vanishing_liouville(model: DirichletFormModel, f,
                              tol: Tolerances | None = None) -> GammaVanishing:
    """Total mass of ``Gamma(f)`` and the constancy verdict it implies.

    On a connected model a vanishing energy measure forces ``f`` constant; the
    verdict is withheld for reducible models.
    """
    tol = tol or get_tolerances()
    f = np.asarray(f, dtype=float)
    gc, gj = gamma_measures(model, f)
    total = float(gc.sum() + gj.sum())
    spread = float(f.max() - f.min())
    if not model.is_connected:
        return GammaVanishing(total, None, spread)
    scale = max(1.0, float(np.max(np.abs(f)))) ** 2
    return GammaVanishing(total, total <= tol.absolute * scale, spread)
