"""Deterministic generators for nested truncation families."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .form import DirichletFormModel, LocalPart, StateSpace, restrict

KINDS = ("z1", "z2", "z3", "regular-tree", "random-weighted", "mesh1d", "file")


@dataclass(frozen=True)
class FamilySpec:
    """What to generate.

    ``radii`` are integer truncation levels: box half-width for lattices,
    depth for trees, hop radius for random graphs and files, cell count for
    ``mesh1d``. ``weights`` is ``"unit"`` or ``"random"``.
    """

    kind: str
    radii: tuple[int, ...]
    weights: str = "unit"
    seed: int = 0
    branching: int = 2
    n: int = 200
    degree: float = 4.0
    path: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown family kind '{self.kind}'")
        if self.weights not in ("unit", "random"):
            raise ValueError(f"unknown weight law '{self.weights}'")
        radii = tuple(int(r) for r in self.radii)
        if not radii or any(r < 1 for r in radii) or list(radii) != sorted(set(radii)):
            raise ValueError("radii must be positive and strictly increasing")
        object.__setattr__(self, "radii", radii)

    @classmethod
    def parse(cls, text: str, radii, **kw) -> "FamilySpec":
        """``z1``, ``tree:<b>``, ``random:<n>:<degree>``, ``mesh1d``, ``file:<path>``."""
        head, _, rest = text.partition(":")
        if head in ("z1", "z2", "z3", "mesh1d"):
            return cls(head, tuple(radii), **kw)
        if head in ("tree", "regular-tree"):
            return cls("regular-tree", tuple(radii), branching=int(rest or 2), **kw)
        if head in ("random", "random-weighted"):
            parts = rest.split(":") if rest else []
            n = int(parts[0]) if parts else 200
            deg = float(parts[1]) if len(parts) > 1 else 4.0
            return cls("random-weighted", tuple(radii), n=n, degree=deg, **kw)
        if head == "file":
            return cls("file", tuple(radii), path=rest, **kw)
        raise ValueError(f"unknown family kind '{text}'")


def _lattice(d: int, R: int, rng, random_weights: bool) -> DirichletFormModel:
    pts = np.array(list(itertools.product(range(-R, R + 1), repeat=d)), dtype=np.int64)
    order = np.lexsort(tuple(pts[:, k] for k in reversed(range(d))) + (np.abs(pts).max(axis=1),))
    pts = pts[order]
    side = 2 * R + 1
    code = np.zeros(len(pts), dtype=np.int64)
    for k in range(d):
        code = code * side + (pts[:, k] + R)
    index = np.empty(side ** d, dtype=np.int64)
    index[code] = np.arange(len(pts))
    edges = []
    for k in range(d):
        ok = pts[:, k] < R
        src = np.flatnonzero(ok)
        dst = index[code[ok] + side ** (d - 1 - k)]
        edges.append(np.stack([src, dst], axis=1))
    edges = np.concatenate(edges)
    if random_weights:
        m = rng.uniform(0.5, 2.0, len(pts))
        jump = rng.uniform(0.1, 1.0, len(edges))
    else:
        m = np.ones(len(pts))
        jump = np.full(len(edges), 0.5)
    space = StateSpace(len(pts), 0, tuple(map(tuple, pts.tolist())))
    return DirichletFormModel(space, m, edges, jump)


def _tree(b: int, depth: int, rng, random_weights: bool) -> DirichletFormModel:
    n = (b ** (depth + 1) - 1) // (b - 1) if b > 1 else depth + 1
    child = np.arange(1, n)
    parent = (child - 1) // b
    edges = np.stack([parent, child], axis=1)
    m = rng.uniform(0.5, 2.0, n) if random_weights else np.ones(n)
    jump = rng.uniform(0.1, 1.0, n - 1) if random_weights else np.full(n - 1, 0.5)
    space = StateSpace(n, 0, tuple((k,) for k in range(n)))
    return DirichletFormModel(space, m, edges, jump)


def _random_graph(n: int, degree: float, rng) -> DirichletFormModel:
    child = np.arange(1, n)
    parent = np.array([rng.integers(0, k) for k in child], dtype=np.int64)
    pairs = {(int(min(a, b)), int(max(a, b))) for a, b in zip(parent, child)}
    target = min(max(int(round(n * degree / 2)), n - 1), n * (n - 1) // 2)
    while len(pairs) < target:
        a, b = (int(v) for v in rng.integers(0, n, 2))
        if a != b:
            pairs.add((min(a, b), max(a, b)))
    edges = np.array(sorted(pairs), dtype=np.int64)
    m = rng.uniform(0.5, 2.0, n)
    jump = rng.uniform(0.1, 1.0, len(edges))
    return DirichletFormModel(StateSpace(n, 0, tuple((k,) for k in range(n))), m, edges, jump)


def _mesh1d(cells: int, rng, random_weights: bool) -> DirichletFormModel:
    """Interval mesh with a local part, plus short jumps ``k <-> k + 2``."""
    if random_weights:
        dx = rng.uniform(0.5, 1.5, cells)
        a = rng.uniform(0.5, 2.0, cells)
        dens = rng.uniform(0.5, 2.0, cells)
        jump = rng.uniform(0.05, 0.3, cells - 1)
    else:
        dx = np.ones(cells)
        a = np.ones(cells)
        dens = np.ones(cells)
        jump = np.full(cells - 1, 0.25)
    nodes = np.concatenate([[0.0], np.cumsum(dx)])
    m = np.zeros(cells + 1)
    m[:-1] += 0.5 * dens * dx
    m[1:] += 0.5 * dens * dx
    k = np.arange(cells - 1)
    edges = np.stack([k, k + 2], axis=1)
    space = StateSpace(cells + 1, 0, tuple((int(i),) for i in range(cells + 1)))
    return DirichletFormModel(space, m, edges, jump, LocalPart(nodes, a, dens))


def random_model(n: int, degree: float, seed: int) -> DirichletFormModel:
    """Connected random graph: a random spanning tree plus extra edges, random weights."""
    return _random_graph(n, degree, np.random.default_rng(seed))


def _hop_levels(model: DirichletFormModel) -> np.ndarray:
    from scipy.sparse.csgraph import shortest_path
    return np.asarray(shortest_path(model.support_graph, directed=False, unweighted=True,
                                    indices=model.base))


def generate_family(spec: FamilySpec) -> list[DirichletFormModel]:
    """Nested truncations, one per radius, each carrying its frontier."""
    rng = np.random.default_rng(spec.seed)
    rw = spec.weights == "random"
    top = spec.radii[-1] + 1
    if spec.kind in ("z1", "z2", "z3"):
        d = int(spec.kind[1])
        ambient = _lattice(d, top, rng, rw)
        level = np.abs(np.array(ambient.space.labels)).max(axis=1)
    elif spec.kind == "regular-tree":
        if spec.branching < 1:
            raise ValueError("branching must be at least 1")
        ambient = _tree(spec.branching, top, rng, rw)
        level = _hop_levels(ambient)
    elif spec.kind == "random-weighted":
        ambient = _random_graph(spec.n, spec.degree, rng)
        level = _hop_levels(ambient)
    elif spec.kind == "mesh1d":
        ambient = _mesh1d(top, rng, rw)
        level = np.arange(ambient.n)
    else:
        from .modelio import load_model
        if not spec.path:
            raise ValueError("file family needs a path")
        ambient = load_model(spec.path)
        level = _hop_levels(ambient)
    return [restrict(ambient, np.flatnonzero(level <= r)) for r in spec.radii]


def check_nested(family) -> None:
    """Raise unless each truncation's labelled data extends the previous one."""
    for a, b in zip(family, family[1:]):
        la, lb = a.space.labels, b.space.labels
        if la is None or lb is None:
            raise ValueError("nested truncations need point labels")
        idx = {lab: k for k, lab in enumerate(lb)}
        if any(lab not in idx for lab in la):
            raise ValueError("truncations are not nested")
        pos = np.array([idx[lab] for lab in la])
        if not np.array_equal(a.m, b.m[pos]) or lb[b.base] != la[a.base]:
            raise ValueError("truncations are not nested")
        keep = set(la)
        mine = {frozenset((la[i], la[j])): w for (i, j), w in zip(a.edges.tolist(), a.jump.tolist())}
        theirs = {frozenset((lb[i], lb[j])): w for (i, j), w in zip(b.edges.tolist(), b.jump.tolist())
                  if lb[i] in keep and lb[j] in keep}
        if mine != theirs:
            raise ValueError("truncations are not nested")
