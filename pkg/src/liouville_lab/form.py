"""Finite carriers of regular Dirichlet forms without killing.

A model is a finite state space with a reference measure ``m``, a symmetric
jump kernel ``J`` and an optional one-dimensional strongly local part on a
mesh. Energies use the ordered-pair convention

    E(f) = sum_k a_k (f_{k+1} - f_k)^2 / dx_k + sum_{x != y} J(x, y) (f(x) - f(y))^2,

so the unit-weight graph energy corresponds to ``J = 1/2`` per ordered pair.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components


class ModelError(ValueError):
    """Raised when a model violates its structural invariants."""


def _frozen(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Points ``0..n-1`` with base point ``o``.

    ``labels`` are optional integer-lattice coordinates (one tuple per point),
    ``frontier`` lists the points of a truncation that miss neighbours of the
    ambient infinite model.
    """

    n: int
    base: int = 0
    labels: tuple[tuple[int, ...], ...] | None = None
    frontier: tuple[int, ...] = ()

    def __post_init__(self):
        if self.n < 1:
            raise ModelError("state space needs at least one point")
        if not 0 <= self.base < self.n:
            raise ModelError(f"base point {self.base} out of range")
        if self.labels is not None:
            labels = tuple(tuple(int(c) for c in lab) for lab in self.labels)
            if len(labels) != self.n:
                raise ModelError("one label per point required")
            if len(set(labels)) != self.n:
                raise ModelError("labels must be unique")
            object.__setattr__(self, "labels", labels)
        frontier = tuple(sorted({int(i) for i in self.frontier}))
        if frontier and not (0 <= frontier[0] and frontier[-1] < self.n):
            raise ModelError("frontier index out of range")
        object.__setattr__(self, "frontier", frontier)

    def __eq__(self, other):
        if not isinstance(other, StateSpace):
            return NotImplemented
        return (self.n, self.base, self.labels, self.frontier) == (
            other.n, other.base, other.labels, other.frontier)

    def __hash__(self):
        return hash((self.n, self.base))


@dataclass(frozen=True, eq=False)
class LocalPart:
    """Piecewise-linear strongly local energy on a 1D mesh.

    Mesh node ``k`` is model point ``k``. Cell ``k`` joins nodes ``k`` and
    ``k+1`` with conductance ``a_k`` and mass density ``density_k``.
    """

    nodes: np.ndarray
    conductances: np.ndarray
    density: np.ndarray | None = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        a = np.asarray(self.conductances, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ModelError("mesh needs at least two nodes")
        if a.shape != (nodes.size - 1,):
            raise ModelError("one conductance per mesh interval required")
        if np.any(np.diff(nodes) <= 0):
            raise ModelError("mesh nodes must be strictly increasing")
        if np.any(a <= 0):
            raise ModelError("mesh conductances must be positive")
        object.__setattr__(self, "nodes", _frozen(nodes, float))
        object.__setattr__(self, "conductances", _frozen(a, float))
        if self.density is not None:
            d = np.asarray(self.density, dtype=float)
            if d.shape != a.shape or np.any(d <= 0):
                raise ModelError("mesh density must be positive per interval")
            object.__setattr__(self, "density", _frozen(d, float))

    @property
    def cells(self) -> int:
        return self.conductances.size

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def weights(self) -> np.ndarray:
        """Stiffness ``a_k / dx_k`` per cell."""
        return self.conductances / self.widths

    def __eq__(self, other):
        if not isinstance(other, LocalPart):
            return NotImplemented
        same_d = (self.density is None and other.density is None) or (
            self.density is not None and other.density is not None
            and np.array_equal(self.density, other.density))
        return (np.array_equal(self.nodes, other.nodes)
                and np.array_equal(self.conductances, other.conductances)
                and same_d)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class DirichletFormModel:
    """Immutable finite model; killing is identically zero and not stored.

    ``edges`` holds undirected pairs ``i < j`` and ``jump`` the kernel value
    per *ordered* pair, so ``J(i, j) = J(j, i) = jump[e]``.
    """

    space: StateSpace
    m: np.ndarray
    edges: np.ndarray
    jump: np.ndarray
    local: LocalPart | None = None
    length_overrides: tuple[tuple[int, int, float], ...] = field(default=())

    def __post_init__(self):
        n = self.space.n
        m = np.asarray(self.m, dtype=float)
        if m.shape != (n,):
            raise ModelError(f"measure must have {n} entries")
        bad = np.flatnonzero(~((m > 0) & np.isfinite(m)))
        if bad.size:
            raise ModelError(f"nonpositive measure at point {bad[0]}")
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        jump = np.asarray(self.jump, dtype=float).reshape(-1)
        if edges.shape[0] != jump.size:
            raise ModelError("one jump value per edge required")
        if edges.size:
            if edges.min() < 0 or edges.max() >= n:
                raise ModelError("edge endpoint out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise ModelError("jump kernel must vanish on the diagonal")
        bad = np.flatnonzero(~((jump >= 0) & np.isfinite(jump)))
        if bad.size:
            i, j = edges[bad[0]]
            raise ModelError(f"negative jump value at ({i},{j})")
        lo = np.minimum(edges[:, 0], edges[:, 1])
        hi = np.maximum(edges[:, 0], edges[:, 1])
        keep = jump > 0
        lo, hi, jump = lo[keep], hi[keep], jump[keep]
        order = np.lexsort((hi, lo))
        lo, hi, jump = lo[order], hi[order], jump[order]
        if lo.size > 1:
            dup = (np.diff(lo) == 0) & (np.diff(hi) == 0)
            if np.any(dup):
                k = int(np.flatnonzero(dup)[0])
                raise ModelError(f"duplicate jump edge ({lo[k]},{hi[k]})")
        object.__setattr__(self, "m", _frozen(m, float))
        object.__setattr__(self, "edges", _frozen(np.stack([lo, hi], axis=1), np.int64))
        object.__setattr__(self, "jump", _frozen(jump, float))
        if self.local is not None and self.local.nodes.size > n:
            raise ModelError("mesh has more nodes than the state space")
        overrides = []
        for i, j, length in self.length_overrides:
            i, j, length = int(i), int(j), float(length)
            if not (0 <= i < n and 0 <= j < n and i != j):
                raise ModelError(f"length override ({i},{j}) out of range")
            if not length > 0:
                raise ModelError(f"nonpositive length override at ({i},{j})")
            overrides.append((min(i, j), max(i, j), length))
        object.__setattr__(self, "length_overrides", tuple(sorted(overrides)))

    # construction helpers -------------------------------------------------

    @classmethod
    def from_kernel(cls, m, kernel: Mapping[tuple[int, int], float] | np.ndarray | sp.spmatrix,
                    base: int = 0, **kwargs) -> "DirichletFormModel":
        """Build from ordered-pair kernel entries, checking exact symmetry."""
        n = len(m)
        if isinstance(kernel, Mapping):
            entries = {(int(i), int(j)): float(v) for (i, j), v in kernel.items() if v != 0}
        else:
            mat = sp.coo_matrix(kernel)
            entries = {}
            for i, j, v in zip(mat.row, mat.col, mat.data):
                if v != 0:
                    entries[(int(i), int(j))] = entries.get((int(i), int(j)), 0.0) + float(v)
        edges, values = [], []
        for (i, j), v in sorted(entries.items()):
            if i == j:
                raise ModelError(f"jump kernel must vanish on the diagonal ({i},{i})")
            if entries.get((j, i)) != v:
                raise ModelError(f"asymmetric kernel at ({i},{j})")
            if i < j:
                edges.append((i, j))
                values.append(v)
        space = kwargs.pop("space", None) or StateSpace(n, base)
        return cls(space, np.asarray(m, float), np.asarray(edges, np.int64).reshape(-1, 2),
                   np.asarray(values, float), **kwargs)

    # derived data --------------------------------------------------------

    @property
    def n(self) -> int:
        return self.space.n

    @property
    def base(self) -> int:
        return self.space.base

    @property
    def mass(self) -> float:
        return float(self.m.sum())

    @cached_property
    def ordered_pairs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(x, y, J(x, y))`` over all ordered pairs with positive kernel."""
        i, j = self.edges[:, 0], self.edges[:, 1]
        return (np.concatenate([i, j]), np.concatenate([j, i]),
                np.concatenate([self.jump, self.jump]))

    @cached_property
    def jump_matrix(self) -> sp.csr_matrix:
        x, y, w = self.ordered_pairs
        return sp.csr_matrix((w, (x, y)), shape=(self.n, self.n))

    @cached_property
    def support_graph(self) -> sp.csr_matrix:
        """Adjacency of jump edges and mesh cells (unit weights)."""
        rows = [self.edges[:, 0]]
        cols = [self.edges[:, 1]]
        if self.local is not None:
            k = np.arange(self.local.cells)
            rows.append(k)
            cols.append(k + 1)
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        adj = sp.coo_matrix((np.ones(r.size), (r, c)), shape=(self.n, self.n)).tocsr()
        adj = ((adj + adj.T) > 0).astype(float)
        return adj.tocsr()

    def components(self) -> tuple[int, np.ndarray]:
        return connected_components(self.support_graph, directed=False)

    @property
    def is_connected(self) -> bool:
        return self.components()[0] == 1

    def neighbours(self, points) -> np.ndarray:
        """Boolean mask of ``points`` (indices or mask) and their support-graph neighbours."""
        mask = as_mask(self.n, points)
        reach = self.support_graph @ mask.astype(float)
        return mask | (reach > 0)

    def __eq__(self, other):
        if not isinstance(other, DirichletFormModel):
            return NotImplemented
        return (self.space == other.space
                and np.array_equal(self.m, other.m)
                and np.array_equal(self.edges, other.edges)
                and np.array_equal(self.jump, other.jump)
                and self.local == other.local
                and self.length_overrides == other.length_overrides)

    __hash__ = None


def as_mask(n: int, points) -> np.ndarray:
    """Boolean mask from either a mask or an index collection."""
    arr = np.asarray(points)
    if arr.dtype == bool:
        if arr.shape != (n,):
            raise ValueError("mask has wrong length")
        return arr.copy()
    mask = np.zeros(n, dtype=bool)
    mask[arr.astype(np.int64).reshape(-1)] = True
    return mask


# --------------------------------------------------------------------------
# operators and energies


def stiffness_matrix(model: DirichletFormModel) -> sp.csr_matrix:
    """Symmetric matrix ``K`` with ``E(f, g) = g^T K f``."""
    n = model.n
    x, y, w = model.ordered_pairs
    deg = np.bincount(x, weights=w, minlength=n)
    K = sp.diags(2.0 * deg) - 2.0 * model.jump_matrix
    if model.local is not None:
        c = model.local.weights
        k = np.arange(c.size)
        diag = np.zeros(n)
        np.add.at(diag, k, c)
        np.add.at(diag, k + 1, c)
        off = sp.coo_matrix((np.concatenate([-c, -c]),
                             (np.concatenate([k, k + 1]), np.concatenate([k + 1, k]))),
                            shape=(n, n))
        K = K + sp.diags(diag) + off
    return sp.csr_matrix(K)


def assemble_generator(model: DirichletFormModel) -> sp.csr_matrix:
    """Nonnegative generator ``L = M^{-1} K``, self-adjoint in ``L^2(m)``."""
    return sp.csr_matrix(sp.diags(1.0 / model.m) @ stiffness_matrix(model))


def apply_generator(model: DirichletFormModel, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    return (stiffness_matrix(model) @ f) / model.m


def _jump_differences(model, f):
    x, y, w = model.ordered_pairs
    return x, y, w, f[x] - f[y]


def energy_bilinear(model: DirichletFormModel, f, g=None) -> float:
    """Beurling-Deny energy ``E(f, g)``; ``E(f)`` when ``g`` is omitted."""
    f = np.asarray(f, dtype=float)
    g = f if g is None else np.asarray(g, dtype=float)
    x, y, w, df = _jump_differences(model, f)
    total = float(np.sum(w * df * (g[x] - g[y])))
    if model.local is not None:
        k = model.local.cells
        total += float(np.sum(model.local.weights * np.diff(f[: k + 1]) * np.diff(g[: k + 1])))
    return total


def gamma_measures(model: DirichletFormModel, f) -> tuple[np.ndarray, np.ndarray]:
    """Point masses of ``Gamma^(c)(f)`` and ``Gamma^(j)(f)``.

    The local measure of each mesh cell is split half to each endpoint.
    """
    return gamma_pairing_measures(model, f, f)


def gamma_pairing_measures(model: DirichletFormModel, f, phi) -> tuple[np.ndarray, np.ndarray]:
    f = np.asarray(f, dtype=float)
    phi = np.asarray(phi, dtype=float)
    n = model.n
    x, y, w, df = _jump_differences(model, f)
    gj = np.bincount(x, weights=w * df * (phi[x] - phi[y]), minlength=n).astype(float)
    gc = np.zeros(n)
    if model.local is not None:
        k = model.local.cells
        cell = 0.5 * model.local.weights * np.diff(f[: k + 1]) * np.diff(phi[: k + 1])
        gc[:k] += cell
        gc[1:k + 1] += cell
    return gc, gj


def gamma_pairing(model: DirichletFormModel, f, phi) -> float:
    """Total mass of the bilinear energy measure ``Gamma(f, phi)``."""
    gc, gj = gamma_pairing_measures(model, f, phi)
    return float(gc.sum() + gj.sum())


def lp_norm(f, m, p: float) -> float:
    """``||f||_p`` in ``L^p(m)``; ``p = inf`` allowed."""
    f = np.abs(np.asarray(f, dtype=float))
    if np.isinf(p):
        return float(f.max()) if f.size else 0.0
    return float(np.sum(np.asarray(m) * f ** p) ** (1.0 / p))


def restrict(model: DirichletFormModel, points, base: int | None = None,
             frontier=None) -> DirichletFormModel:
    """Neumann truncation to ``points`` (kernel restricted to ``points^2``).

    Points keep their relative order. The local part keeps the longest
    leading block of surviving mesh nodes.
    """
    points = np.asarray(sorted(set(int(p) for p in points)), dtype=np.int64)
    index = -np.ones(model.n, dtype=np.int64)
    index[points] = np.arange(points.size)
    keep = (index[model.edges[:, 0]] >= 0) & (index[model.edges[:, 1]] >= 0)
    edges = index[model.edges[keep]]
    if base is None:
        base = model.base
    if index[base] < 0:
        raise ModelError("base point must survive the truncation")
    labels = None
    if model.space.labels is not None:
        labels = tuple(model.space.labels[p] for p in points)
    if frontier is None:
        outside = np.ones(model.n, dtype=bool)
        outside[points] = False
        touches = (model.support_graph @ outside.astype(float)) > 0
        frontier = [int(index[p]) for p in points if touches[p]]
        frontier += [int(index[p]) for p in model.space.frontier if index[p] >= 0]
    local = None
    if model.local is not None:
        loc = model.local
        lead = min(points.size, loc.nodes.size)
        block = int(np.argmin(np.append(points[:lead] == np.arange(lead), False)))
        if block >= 2:
            density = None if loc.density is None else loc.density[: block - 1]
            local = LocalPart(loc.nodes[:block], loc.conductances[: block - 1], density)
    space = StateSpace(int(points.size), int(index[base]), labels, tuple(frontier))
    overrides = tuple((int(index[i]), int(index[j]), L) for i, j, L in model.length_overrides
                      if index[i] >= 0 and index[j] >= 0)
    return DirichletFormModel(space, model.m[points], edges, model.jump[keep], local, overrides)
