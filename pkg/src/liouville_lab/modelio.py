"""Line-oriented text persistence for models and vectors.

Model files::

    dirichlet-model v1 n=<N> base=<o>
    P <idx> <m> [<coords> ...]
    J <i> <j> <value per ordered pair>
    M <x_0> ... <x_N>          optional mesh nodes (points 0..N)
    A <a_0> ... <a_{N-1}>      conductances
    D <d_0> ... <d_{N-1}>      optional mesh densities
    L <i> <j> <length>         optional metric overrides
    F <idx> ...                optional truncation frontier

Floats are written with 17 significant digits, so a save/load round trip is
exact. ``#`` starts a comment.
"""
from __future__ import annotations

import os

import numpy as np

from .form import DirichletFormModel, LocalPart, ModelError, StateSpace


class ModelParseError(ModelError):
    pass


def _num(x: float) -> str:
    return format(float(x), ".17g")


def dumps_model(model: DirichletFormModel) -> str:
    sp = model.space
    out = [f"dirichlet-model v1 n={sp.n} base={sp.base}"]
    for k in range(sp.n):
        coords = "" if sp.labels is None else "".join(f" {c}" for c in sp.labels[k])
        out.append(f"P {k} {_num(model.m[k])}{coords}")
    for (i, j), v in zip(model.edges.tolist(), model.jump.tolist()):
        out.append(f"J {i} {j} {_num(v)}")
    if model.local is not None:
        loc = model.local
        out.append("M " + " ".join(_num(x) for x in loc.nodes))
        out.append("A " + " ".join(_num(a) for a in loc.conductances))
        if loc.density is not None:
            out.append("D " + " ".join(_num(d) for d in loc.density))
    for i, j, length in model.length_overrides:
        out.append(f"L {i} {j} {_num(length)}")
    if sp.frontier:
        out.append("F " + " ".join(str(k) for k in sp.frontier))
    return "\n".join(out) + "\n"


def save_model(model: DirichletFormModel, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_model(model))


def _header(line: str, lineno: int) -> tuple[int, int]:
    parts = line.split()
    if len(parts) != 4 or parts[0] != "dirichlet-model" or parts[1] != "v1":
        raise ModelParseError(f"line {lineno}: expected 'dirichlet-model v1 n=<N> base=<o>'")
    try:
        kv = dict(p.split("=", 1) for p in parts[2:])
        return int(kv["n"]), int(kv["base"])
    except (KeyError, ValueError):
        raise ModelParseError(f"line {lineno}: malformed header") from None


def loads_model(text: str) -> DirichletFormModel:
    lines = [(k + 1, raw.split("#", 1)[0].strip()) for k, raw in enumerate(text.splitlines())]
    lines = [(k, s) for k, s in lines if s]
    if not lines:
        raise ModelParseError("line 1: empty model file")
    n, base = _header(lines[0][1], lines[0][0])
    m = np.full(n, np.nan)
    coords: list = [None] * n
    pairs: dict[tuple[int, int], float] = {}
    mesh = cond = dens = None
    overrides, frontier = [], []
    for lineno, s in lines[1:]:
        tag, *rest = s.split()
        try:
            if tag == "P":
                k = int(rest[0])
                if not 0 <= k < n:
                    raise ModelParseError(f"line {lineno}: point index {k} out of range")
                if not np.isnan(m[k]):
                    raise ModelParseError(f"line {lineno}: point {k} defined twice")
                m[k] = float(rest[1])
                coords[k] = tuple(int(c) for c in rest[2:])
            elif tag == "J":
                i, j, v = int(rest[0]), int(rest[1]), float(rest[2])
                if len(rest) != 3:
                    raise ValueError
                if i == j:
                    raise ModelParseError(f"line {lineno}: jump kernel must vanish on the diagonal")
                if (i, j) in pairs:
                    raise ModelParseError(f"line {lineno}: duplicate jump edge ({i},{j})")
                if (j, i) in pairs and pairs[(j, i)] != v:
                    raise ModelError(f"asymmetric kernel at ({j},{i})")
                pairs[(i, j)] = v
            elif tag == "M":
                mesh = [float(x) for x in rest]
            elif tag == "A":
                cond = [float(x) for x in rest]
            elif tag == "D":
                dens = [float(x) for x in rest]
            elif tag == "L":
                overrides.append((int(rest[0]), int(rest[1]), float(rest[2])))
            elif tag == "F":
                frontier.extend(int(x) for x in rest)
            else:
                raise ModelParseError(f"line {lineno}: unknown record '{tag}'")
        except (ValueError, IndexError) as exc:
            if isinstance(exc, ModelError):
                raise
            raise ModelParseError(f"line {lineno}: malformed '{tag}' record") from None
    missing = np.flatnonzero(np.isnan(m))
    if missing.size:
        raise ModelParseError(f"point {missing[0]} has no P record")
    unique: dict[tuple[int, int], float] = {}
    for (i, j), v in pairs.items():
        unique[(min(i, j), max(i, j))] = v
    keys = sorted(unique)
    edges = np.array(keys, dtype=np.int64).reshape(-1, 2)
    jump = np.array([unique[k] for k in keys], dtype=float)
    labels = None if all(c == () for c in coords) else tuple(coords)
    local = None
    if mesh is not None or cond is not None:
        if mesh is None or cond is None:
            raise ModelParseError("mesh needs both M and A records")
        local = LocalPart(mesh, cond, dens)
    space = StateSpace(n, base, labels, tuple(frontier))
    return DirichletFormModel(space, m, edges, jump, local, tuple(overrides))


def load_model(path: str | os.PathLike) -> DirichletFormModel:
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())


def save_vector(values, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for k, v in enumerate(np.asarray(values, dtype=float)):
            fh.write(f"{k} {_num(v)}\n")


def load_vector(path: str | os.PathLike, n: int | None = None) -> np.ndarray:
    """Read ``<idx> <value>`` lines; with ``n`` every index must appear."""
    entries = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            s = raw.split("#", 1)[0].strip()
            if not s:
                continue
            parts = s.split()
            try:
                entries[int(parts[0])] = float(parts[1])
            except (ValueError, IndexError):
                raise ModelParseError(f"line {lineno}: expected '<index> <value>'") from None
    size = n if n is not None else (max(entries) + 1 if entries else 0)
    out = np.full(size, np.nan)
    for k, v in entries.items():
        if not 0 <= k < size:
            raise ModelParseError(f"vector index {k} out of range")
        out[k] = v
    if np.isnan(out).any():
        raise ModelParseError(f"vector entry {int(np.flatnonzero(np.isnan(out))[0])} missing")
    return out


def load_index_set(path: str | os.PathLike) -> tuple[np.ndarray, np.ndarray]:
    """Read a boundary file: ``<idx> <value>`` lines, returned as (indices, values)."""
    idx, vals = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            s = raw.split("#", 1)[0].strip()
            if not s:
                continue
            parts = s.split()
            try:
                idx.append(int(parts[0]))
                vals.append(float(parts[1]))
            except (ValueError, IndexError):
                raise ModelParseError(f"line {lineno}: expected '<index> <value>'") from None
    return np.array(idx, dtype=np.int64), np.array(vals)
