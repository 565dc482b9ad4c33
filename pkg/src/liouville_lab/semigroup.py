"""Markovian semigroup ``T_t = exp(-tL)``, ground state and ergodic limits."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .config import Tolerances, get_tolerances
from .form import DirichletFormModel, as_mask, lp_norm, stiffness_matrix


class ReducibleModelError(ValueError):
    """The operation needs an irreducible (connected) model."""


@dataclass(frozen=True, eq=False)
class SemigroupOperator:
    """Spectral factorization of ``L`` in ``L^2(m)``.

    ``eigenvectors`` are m-orthonormal columns. For large sparse generators the
    factorization is skipped and ``evolve`` falls back to ``expm_multiply``.
    """

    m: np.ndarray
    eigenvalues: np.ndarray | None
    eigenvectors: np.ndarray | None
    generator: sp.csr_matrix
    absorbing: bool = False

    @classmethod
    def from_stiffness(cls, K, m, absorbing: bool = False,
                       tol: Tolerances | None = None) -> "SemigroupOperator":
        tol = tol or get_tolerances()
        m = np.asarray(m, dtype=float)
        K = sp.csr_matrix(K)
        L = sp.csr_matrix(sp.diags(1.0 / m) @ K)
        if m.size > tol.dense_limit:
            return cls(m, None, None, L, absorbing)
        s = 1.0 / np.sqrt(m)
        S = (s[:, None] * K.toarray()) * s[None, :]
        S = 0.5 * (S + S.T)
        lam, U = scipy.linalg.eigh(S)
        lam = np.clip(lam, 0.0, None)
        return cls(m, lam, s[:, None] * U, L, absorbing)

    @property
    def dense(self) -> bool:
        return self.eigenvalues is not None

    def spectral_gap(self, tol: Tolerances | None = None) -> float:
        """Smallest eigenvalue above the numerical kernel."""
        tol = tol or get_tolerances()
        lam = self._spectrum()
        cut = tol.kernel * max(1.0, float(lam[-1]))
        pos = lam[lam > cut]
        return float(pos[0]) if pos.size else 0.0

    def bottom(self) -> float:
        return float(self._spectrum()[0])

    def _spectrum(self) -> np.ndarray:
        if self.dense:
            return self.eigenvalues
        K = sp.diags(self.m) @ self.generator
        M = sp.diags(self.m)
        k = min(6, self.m.size - 2)
        vals = spla.eigsh(K, k=k, M=M, sigma=-1e-6, which="LM", return_eigenvectors=False)
        return np.sort(np.clip(vals, 0.0, None))


def semigroup(model: DirichletFormModel, tol: Tolerances | None = None) -> SemigroupOperator:
    return SemigroupOperator.from_stiffness(stiffness_matrix(model), model.m, tol=tol)


def absorbing_semigroup(model: DirichletFormModel, interior,
                        tol: Tolerances | None = None) -> tuple[SemigroupOperator, np.ndarray]:
    """Semigroup killed on leaving ``interior`` (Dirichlet restriction).

    Emulates the infinite-measure branch of the ergodic theorem on a finite
    model; reports built on it are flagged as emulated.
    """
    mask = as_mask(model.n, interior)
    idx = np.flatnonzero(mask)
    K = stiffness_matrix(model)[idx][:, idx]
    return SemigroupOperator.from_stiffness(K, model.m[idx], absorbing=True, tol=tol), idx


def evolve(T: SemigroupOperator, t: float, f) -> np.ndarray:
    """``T_t f``."""
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    f = np.asarray(f, dtype=float)
    if t == 0:
        return f.copy()
    if T.dense:
        V = T.eigenvectors
        coeff = V.T @ (T.m * f)
        return V @ (np.exp(-T.eigenvalues * t) * coeff)
    return spla.expm_multiply(-t * T.generator, f)


@dataclass
class StructureFlags:
    irreducible: bool
    conservative: bool
    mass: float
    components: int


def structure_flags(model: DirichletFormModel, tol: Tolerances | None = None) -> StructureFlags:
    tol = tol or get_tolerances()
    ncomp, _ = model.components()
    T = semigroup(model, tol)
    one = np.ones(model.n)
    cons = all(np.max(np.abs(evolve(T, t, one) - 1.0)) <= tol.conservative for t in (1.0, 10.0))
    return StructureFlags(ncomp == 1, bool(cons), model.mass, int(ncomp))


@dataclass
class ErgodicReport:
    limit: np.ndarray
    predicted: np.ndarray        # (Phi, f) Phi
    ground_state: float          # constant value of Phi (0 if none)
    times: np.ndarray
    distances: np.ndarray        # ||T_t f - limit||_p
    gap: float
    p: float
    emulated: bool = False


def ergodic_limit(model: DirichletFormModel, f, p: float, times=None,
                  absorbing=None, tol: Tolerances | None = None) -> ErgodicReport:
    """Limit of ``T_t f`` and the convergence curve ``t -> ||T_t f - limit||_p``.

    With ``absorbing`` (an interior set) the semigroup is killed outside it and
    the predicted limit is 0, the infinite-measure branch.
    """
    tol = tol or get_tolerances()
    if not 1 < p < np.inf:
        raise ValueError(f"p must lie in (1, inf), got {p}")
    f = np.asarray(f, dtype=float)
    if absorbing is None:
        if not model.is_connected:
            raise ReducibleModelError("ground state is undefined for a reducible model")
        T = semigroup(model, tol)
        m = model.m
        phi = 1.0 / np.sqrt(model.mass)
        predicted = np.full(model.n, phi * phi * float(np.sum(m * f)))
        emulated = False
    else:
        T, idx = absorbing_semigroup(model, absorbing, tol)
        m = model.m[idx]
        f = f[idx]
        phi = 0.0 if T.bottom() > tol.kernel else 1.0 / np.sqrt(m.sum())
        predicted = np.full(idx.size, phi * phi * float(np.sum(m * f)))
        emulated = True
    gap = T.spectral_gap(tol) if not emulated else T.bottom()
    if times is None:
        base = 1.0 / gap if gap > 0 else 1.0
        times = base * np.array([0.0, 0.5, 1.0, 2.0, 5.0, 10.0])
    times = np.asarray(times, dtype=float)
    dists = np.array([lp_norm(evolve(T, t, f) - predicted, m, p) for t in times])
    return ErgodicReport(predicted.copy(), predicted, phi, times, dists, gap, p, emulated)


def harmonic_kernel(model: DirichletFormModel, tol: Tolerances | None = None) -> np.ndarray:
    """Basis (columns) of ``{f : Lf = 0}``, computed numerically.

    The null space of the symmetrized generator is mapped back to functions;
    for a connected model it is spanned by the constants.
    """
    tol = tol or get_tolerances()
    K = stiffness_matrix(model)
    s = 1.0 / np.sqrt(model.m)
    if model.n <= tol.dense_limit:
        S = (s[:, None] * K.toarray()) * s[None, :]
        S = 0.5 * (S + S.T)
        lam, U = scipy.linalg.eigh(S)
        cut = tol.kernel * max(1.0, float(np.abs(lam).max()))
        basis = s[:, None] * U[:, lam <= cut]
    else:
        ncomp, labels = model.components()
        basis = np.stack([(labels == c).astype(float) for c in range(ncomp)], axis=1)
    if basis.shape[1] == 1:
        v = basis[:, 0]
        basis = (v * np.sign(v.sum()) / np.max(np.abs(v)))[:, None]
    return basis


def interpolation_exponents(p: float) -> tuple[float, float]:
    """``(r, theta)`` with ``||g||_p <= ||g||_r^{1-theta} ||g||_2^theta``."""
    if p >= 2:
        return np.inf, 2.0 / p
    return 1.0, 2.0 * (p - 1.0) / p
