"""Peak-Gausson standing waves and orbital-stability error measures.

For mu = -1 the profile

    phi(x) = exp((omega + 1)/2) * exp(-(|x| - lam/2)**2 / 2)

satisfies -phi'' - phi ln(phi^2) = -omega phi away from the origin and the
jump phi'(0+) - phi'(0-) = lam phi(0), so exp(i omega t) phi(x) solves the
unregularized equation exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import GridSpec, MeshFunction, forward_difference, inner_product, l2_norm, h1_seminorm


@dataclass(frozen=True)
class GaussonParams:
    omega: float = 1.0
    lam: float = 1.0


def gausson(x, p: GaussonParams):
    x = np.asarray(x, dtype=float)
    val = np.exp(0.5 * (p.omega + 1.0) - 0.5 * (np.abs(x) - 0.5 * p.lam) ** 2)
    return val.item() if val.ndim == 0 else val


def exact_soliton(x, t: float, p: GaussonParams):
    val = np.asarray(np.exp(1j * p.omega * t) * np.asarray(gausson(x, p)))
    return val.item() if val.ndim == 0 else val


def perturbed_initial(x, p: GaussonParams, eta: float):
    """``gausson(x) + eta (1 + 0.5i) sin(x)``."""
    if eta < 0:
        raise ValueError(f"eta must be >= 0, got {eta}")
    x = np.asarray(x, dtype=float)
    val = np.asarray(gausson(x, p) + eta * (1.0 + 0.5j) * np.sin(x))
    return val.item() if val.ndim == 0 else val


def sample_gausson(grid: GridSpec, p: GaussonParams, t: float = 0.0) -> MeshFunction:
    return grid.sample(lambda x: exact_soliton(x, t, p))


def _h1_inner(u: MeshFunction, v: MeshFunction) -> complex:
    return inner_product(u, v) + inner_product(forward_difference(u), forward_difference(v))


def _h1_norm_sq(u: MeshFunction) -> float:
    return l2_norm(u) ** 2 + h1_seminorm(u) ** 2


def orbital_errors(U: MeshFunction, p: GaussonParams, t: float):
    """Distances of ``U`` from the standing wave in the discrete H1 norm.

    Returns ``(e_plain, e_min)``: the distance to ``exp(i omega t) phi`` and
    the minimum over all phases ``exp(i theta) phi``. The minimising phase
    is ``theta* = arg((U, phi)_H1)``, so that

        e_min^2 = |U|^2 + |phi|^2 - 2 |(U, phi)_H1|;

    e_min is evaluated as the distance at theta* rather than through that
    difference, which cancels badly near the orbit.
    """
    phi = sample_gausson(U.grid, p)
    e_plain = math.sqrt(_h1_norm_sq(U - np.exp(1j * p.omega * t) * phi))
    theta = np.angle(_h1_inner(U, phi))
    e_min = math.sqrt(_h1_norm_sq(U - np.exp(1j * theta) * phi))
    return e_plain, min(e_min, e_plain)


def optimal_phase(U: MeshFunction, p: GaussonParams) -> float:
    """Phase ``theta`` minimising ``|U - exp(i theta) phi|_H1``."""
    return float(np.angle(_h1_inner(U, sample_gausson(U.grid, p))))
