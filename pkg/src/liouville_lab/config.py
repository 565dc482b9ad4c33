"""Central tolerance record.

Every floating-point threshold used by the verifiers lives here. Overrides are
read from a JSON file whose path is given by ``LIOUVILLE_LAB_TOLERANCES``.
"""
from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from pathlib import Path

ENV_VAR = "LIOUVILLE_LAB_TOLERANCES"


@dataclass(frozen=True)
class Tolerances:
    equality: float = 1e-12          # relative, for identities
    inequality: float = 1e-9         # relative slack for certificates
    absolute: float = 1e-12          # absolute floor added to every slack
    harmonic: float = 1e-10          # |Lf| threshold for (sub)harmonicity
    kernel: float = 1e-10            # null-space and invariance checks
    conservative: float = 1e-10      # ||T_t 1 - 1||_inf
    exponent_band: float = 0.1       # |alpha - critical| below this is undecided
    log_fit_residual: float = 0.05   # relative RMS residual for log/power fits
    bounded_increase: float = 0.01   # final-decile increase for "bounded"
    dense_limit: int = 2000          # spectral factorization up to this size

    def with_overrides(self, **overrides) -> "Tolerances":
        known = {f.name for f in dataclasses.fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise KeyError(f"unknown tolerance keys: {sorted(unknown)}")
        return dataclasses.replace(self, **overrides)


def load_tolerances(path: str | os.PathLike | None = None) -> Tolerances:
    """Defaults, updated from ``path`` or from the file named by the env var."""
    if path is None:
        path = os.environ.get(ENV_VAR)
    if not path:
        return Tolerances()
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return Tolerances().with_overrides(**data)


_DEFAULT: Tolerances | None = None


def get_tolerances() -> Tolerances:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_tolerances()
    return _DEFAULT


def passes(lhs: float, rhs: float, tol: Tolerances | None = None) -> bool:
    """``lhs <= rhs`` up to the configured relative and absolute slack."""
    tol = tol or get_tolerances()
    return lhs <= rhs * (1.0 + tol.inequality) + tol.absolute if rhs >= 0 else (
        lhs <= rhs + abs(rhs) * tol.inequality + tol.absolute
    )
