"""Regularized logarithmic nonlinearity.

    q(s)   = ln((eps + sqrt(s))**2)
    Q(s)   = int_0^s q            (closed form, normalised so Q(0) = 0)
    F(rho) = int_0^rho q          (standard closed form)

``chord_q`` is the difference quotient of Q, i.e. the mean of q over the
segment between two densities; ``q_tilde`` multiplies it by the midpoint of
the two complex values. That chord form is what makes the time stepper
conserve the discrete energy exactly.

All functions accept scalars or numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

@dataclass(frozen=True)
class ModelParams:
    """Delta strength ``lam``, nonlinearity coefficient ``mu``, regularization ``eps``."""

    lam: float
    mu: float
    eps: float

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError(f"eps must be >= 0, got {self.eps}")

    def require_regularized(self):
        if not self.eps > 0:
            raise ValueError("solver paths need eps > 0; q(0) diverges at eps = 0")


def _check_density(s, name="s"):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or np.any(np.isnan(s)):
        raise ValueError(f"{name} must be >= 0")
    return s


def _check_eps(eps):
    if not eps > 0:
        raise ValueError(f"eps must be > 0, got {eps}")


def _out(x):
    return x.item() if np.ndim(x) == 0 else x


def q_eps(s, eps: float):
    """``2 ln(eps + sqrt(s))``."""
    _check_eps(eps)
    s = _check_density(s)
    return _out(2.0 * np.log(eps + np.sqrt(s)))


def Q_eps(s, eps: float):
    """Antiderivative of ``q_eps`` vanishing at 0.

    Algebraically ``2(s - eps^2) ln(eps + sqrt(s)) - s + 2 eps sqrt(s)
    + 2 eps^2 ln(eps)``. Evaluated as ``s (2 ln(eps + r) - 1) + 2 eps^2 (x -
    log1p(x))`` with r = sqrt(s), x = r/eps, which keeps full relative
    accuracy as s -> 0.
    """
    _check_eps(eps)
    s = _check_density(s)
    r = np.sqrt(s)
    val = s * (2.0 * np.log(eps + r) - 1.0) + 2.0 * eps**2 * _x_minus_log1p(r / eps)
    return _out(val)


def F_eps(rho, eps: float):
    """Regularized energy density ``int_0^rho ln(eps + sqrt(s))**2 ds``.

    Closed form ``rho ln((eps + r)^2) - rho + 2 eps r - eps^2 ln((1 + r/eps)^2)``
    with r = sqrt(rho); the last two terms nearly cancel for small rho and
    are combined into ``2 eps^2 (x - log1p(x))``, x = r/eps.
    ``eps = 0`` gives the unregularized ``rho ln(rho) - rho`` (0 at rho = 0).
    """
    if eps < 0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    rho = _check_density(rho, "rho")
    r = np.sqrt(rho)
    if eps == 0:
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(rho > 0, rho * np.log(rho) - rho, 0.0)
        return _out(val)
    x = r / eps
    val = rho * np.log((eps + r) ** 2) - rho + 2.0 * eps**2 * _x_minus_log1p(x)
    return _out(val)


def _log1p_ratio(x):
    """``log1p(x)/x`` and ``1 - log1p(x)/x`` for ``x >= 0`` without cancellation."""
    small = x < 1e-3
    xs = np.where(small, x, 0.0)
    one_minus = xs * (1 / 2 - xs * (1 / 3 - xs * (1 / 4 - xs * (1 / 5 - xs / 6))))
    xl = np.where(small, 1.0, x)
    ratio = np.where(small, 1.0 - one_minus, np.log1p(xl) / xl)
    return ratio, np.where(small, one_minus, 1.0 - ratio)


def _x_minus_log1p(x):
    """``x - log1p(x)`` for ``x >= 0``."""
    return x * _log1p_ratio(x)[1]


def chord_q(rho1, rho2, eps: float):
    """Mean of ``q_eps`` over the segment between ``rho1`` and ``rho2``.

    Equal to ``(Q_eps(rho1) - Q_eps(rho2)) / (rho1 - rho2)``, evaluated in the
    cancellation-free form (r = sqrt(rho), r1 >= r2)

        2 ln(eps + r1) - 1 + 2 (eps (1 - g) + r2 g) / (r1 + r2),
        g = log1p(x)/x,  x = (r1 - r2)/(eps + r2),

    which tends to ``q_eps`` as the two densities merge.
    """
    _check_eps(eps)
    rho1 = _check_density(rho1, "rho1")
    rho2 = _check_density(rho2, "rho2")
    hi, lo = np.maximum(rho1, rho2), np.minimum(rho1, rho2)
    r1, r2 = np.sqrt(hi), np.sqrt(lo)
    same = r1 == r2
    denom = np.where(same, 1.0, r1 + r2)
    g, one_minus_g = _log1p_ratio((r1 - r2) / (eps + r2))
    out = 2.0 * np.log(eps + r1) - 1.0 + 2.0 * (eps * one_minus_g + r2 * g) / denom
    out = np.where(same, 2.0 * np.log(eps + r1), out)
    return _out(out)


def q_tilde(z1, z2, eps: float):
    """``0.5 * chord_q(|z1|^2, |z2|^2) * (z1 + z2)``."""
    z1 = np.asarray(z1, dtype=complex)
    z2 = np.asarray(z2, dtype=complex)
    c = chord_q(np.abs(z1) ** 2, np.abs(z2) ** 2, eps)
    return _out(0.5 * np.asarray(c) * (z1 + z2))
