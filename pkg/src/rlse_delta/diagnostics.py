"""Discrete invariants, error norms and observed convergence orders."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .grid import MeshFunction, _check_same_grid, h1_seminorm, l2_norm, linf_norm
from .nonlin import ModelParams, Q_eps

SERIES_HEADER = ("t", "mass", "energy", "momentum", "linf", "h1",
                 "fp_iters", "mass_drift_rel", "energy_drift_rel")


def fmt(x) -> str:
    """Float formatting used in every CSV: 17 significant digits."""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def discrete_mass(U: MeshFunction) -> float:
    return l2_norm(U) ** 2


def discrete_energy(U: MeshFunction, params: ModelParams) -> float:
    """``|d+U|^2 + lam |U_M|^2 + mu h sum_{j<2M} Q(|U_j|^2)``.

    Q is normalised to Q(0) = 0, so this differs from the unnormalised
    closed form by the constant ``mu * 2a * (-2 eps^2 ln eps)``.
    """
    g = U.grid
    energy = h1_seminorm(U) ** 2 + params.lam * abs(U.values[g.M]) ** 2
    if params.mu != 0:
        params.require_regularized()
        rho = np.abs(U.values[:-1]) ** 2
        energy += params.mu * g.h * float(np.sum(Q_eps(rho, params.eps)))
    return float(energy)


def discrete_momentum(U: MeshFunction) -> float:
    """``Im(h sum_{j=1}^{2M-1} conj(U_j) (U_{j+1} - U_{j-1}) / 2h)``."""
    v = U.values
    return float(np.imag(np.sum(np.conj(v[1:-1]) * (v[2:] - v[:-2]))) / 2.0)


@dataclass(frozen=True)
class ErrorTriple:
    l2: float
    h1: float
    linf: float

    def __iter__(self):
        return iter(astuple(self))


NORMS = tuple(f.name for f in fields(ErrorTriple))


def error_norms(U: MeshFunction, reference: MeshFunction) -> ErrorTriple:
    """l2, discrete H1 (``sqrt(|e|^2 + |d+e|^2)``) and max norms of ``reference - U``."""
    _check_same_grid(U, reference)
    e = reference - U
    l2 = l2_norm(e)
    return ErrorTriple(l2, math.hypot(l2, h1_seminorm(e)), linf_norm(e))


def observed_orders(errors) -> list[ErrorTriple | None]:
    """log2 ratios of consecutive errors, one triple per entry.

    ``errors`` is a sequence of ``(param, ErrorTriple)`` with ``param``
    halving between entries. The first entry gets ``None``; an order whose
    errors are not both positive is NaN.
    """
    errors = list(errors)
    for (p0, _), (p1, _) in zip(errors, errors[1:]):
        if not math.isclose(p1, p0 / 2, rel_tol=1e-9):
            raise ValueError(f"sweep must halve between entries: {p0} -> {p1}")
    out: list[ErrorTriple | None] = [None]
    for (_, e0), (_, e1) in zip(errors, errors[1:]):
        out.append(ErrorTriple(*(_order(a, b) for a, b in zip(e0, e1))))
    return out


def _order(coarse: float, fine: float) -> float:
    if not (coarse > 0 and fine > 0):
        return math.nan
    return math.log2(coarse / fine)


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass: float
    energy: float
    momentum: float
    linf: float
    h1: float
    fp_iterations: int

    @classmethod
    def of(cls, t: float, U: MeshFunction, params: ModelParams, fp_iterations: int = 0):
        return cls(t, discrete_mass(U), discrete_energy(U, params), discrete_momentum(U),
                   linf_norm(U), h1_seminorm(U), fp_iterations)


class DiagnosticsSeries:
    """Records along a run; ``fp_iterations`` counts inner iterations since
    the previous record."""

    def __init__(self, params: ModelParams):
        self.params = params
        self.records: list[DiagnosticsRecord] = []
        self._pending_iters = 0

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def __iter__(self):
        return iter(self.records)

    def note_iterations(self, n: int):
        self._pending_iters += n

    def record(self, t: float, U: MeshFunction, fp_iterations: int = 0):
        n = self._pending_iters + fp_iterations
        self._pending_iters = 0
        self.records.append(DiagnosticsRecord.of(t, U, self.params, n))

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def mass_drift(self, relative: bool = True) -> np.ndarray:
        m = self.column("mass")
        d = m - m[0]
        return d / m[0] if relative and m[0] != 0 else d

    def energy_drift(self, relative: bool = True) -> np.ndarray:
        e = self.column("energy")
        d = e - e[0]
        return d / abs(e[0]) if relative and e[0] != 0 else d

    def summary(self) -> dict:
        return {
            "records": len(self),
            "max_mass_drift_rel": float(np.max(np.abs(self.mass_drift()))),
            "max_mass_drift_abs": float(np.max(np.abs(self.mass_drift(False)))),
            "max_energy_drift_rel": float(np.max(np.abs(self.energy_drift()))),
            "max_energy_drift_abs": float(np.max(np.abs(self.energy_drift(False)))),
            "total_fp_iterations": int(self.column("fp_iterations").sum()),
        }

    def rows(self):
        md, ed = self.mass_drift(), self.energy_drift()
        for r, a, b in zip(self.records, md, ed):
            yield (r.t, r.mass, r.energy, r.momentum, r.linf, r.h1, r.fp_iterations, a, b)

    def to_csv(self, path=None) -> str:
        text = write_csv(SERIES_HEADER, self.rows())
        if path is not None:
            with open(path, "w", newline="") as f:
                f.write(text)
        return text


def write_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    return buf.getvalue()
