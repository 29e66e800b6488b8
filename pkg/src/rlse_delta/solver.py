"""Crank-Nicolson finite difference stepper for the regularized log-NLS
with a point interaction lam*delta(x) at the origin.

Two formulations are provided:

* delta-weight: one grid, the delta enters as the weight b_M = 1/h on the
  interface node;
* interface: the domain is split at x = 0 into a left and a right
  subproblem coupled by continuity and the derivative jump
  u_x(0+) - u_x(0-) = lam u(0). The two ghost values across the interface
  are eliminated through the jump condition.

Both reduce to the same tridiagonal system, so trajectories agree to
rounding. The nonlinear term is handled by a fixed-point iteration that
freezes only the real chord coefficient, keeping the half-step sum
implicit; the converged step therefore conserves mass exactly.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import lapack

from .grid import GridSpec, MeshFunction
from .nonlin import ModelParams, chord_q

log = logging.getLogger(__name__)

_gtsv = lapack.get_lapack_funcs("gtsv", dtype=np.complex128)

PIVOT_FLOOR = 1e-300
# consecutive residual increases treated as divergence of the inner iteration
GROWTH_STREAK = 5


class Mode(str, enum.Enum):
    DELTA_WEIGHT = "delta-weight"
    INTERFACE = "interface"


@dataclass(frozen=True)
class SolverConfig:
    tau: float
    T: float
    mode: Mode = Mode.DELTA_WEIGHT
    fp_tol: float = 1e-12
    fp_max_iters: int = 100
    record_every: int = 1

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if not self.tau > 0 or not self.T > 0:
            raise ValueError("tau and T must be positive")
        if self.tau > self.T * (1 + 1e-12):
            raise ValueError(f"tau={self.tau} exceeds T={self.T}")
        if not self.fp_tol > 0:
            raise ValueError("fp_tol must be positive")
        if self.fp_max_iters < 1:
            raise ValueError("fp_max_iters must be >= 1")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    @property
    def n_steps(self) -> int:
        # tolerate T/tau landing a hair above an integer
        return max(1, math.ceil(self.T / self.tau - 1e-9))


@dataclass(frozen=True)
class StepReport:
    iterations: int
    residual: float
    converged: bool


class SingularSystemError(ArithmeticError):
    pass


class StepFailure(RuntimeError):
    """A time step whose inner iteration did not converge.

    ``step`` and ``t`` are filled in by :func:`run`; ``series`` then holds the
    diagnostics recorded before the failure.
    """

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.step = None
        self.t = None
        self.series = None
        self.state = None

    def __str__(self):
        msg = super().__str__()
        if self.step is not None:
            msg = f"step {self.step} (t={self.t:.6g}): {msg}"
        return msg


class BlowUp(StepFailure):
    """Non-finite values or a diverging inner iteration."""


def delta_weights(grid: GridSpec) -> NDArray[np.float64]:
    """Node weights ``b`` with ``b_M = 1/h`` and zero elsewhere."""
    b = np.zeros(grid.n_nodes)
    b[grid.M] = 1.0 / grid.h
    return b


def tridiag_solve(lower, diag, upper, rhs) -> NDArray[np.complex128]:
    """Solve a tridiagonal system.

    ``lower[i]`` multiplies ``x[i-1]`` and ``upper[i]`` multiplies ``x[i+1]``
    in row ``i``, so ``lower[0]`` and ``upper[-1]`` are ignored.
    """
    diag = np.asarray(diag, dtype=complex)
    n = diag.shape[0]
    lower = np.asarray(lower, dtype=complex)
    upper = np.asarray(upper, dtype=complex)
    rhs = np.asarray(rhs, dtype=complex)
    if not (lower.shape == upper.shape == rhs.shape == (n,)):
        raise ValueError("tridiag_solve: inconsistent lengths")
    if n == 1:
        if abs(diag[0]) < PIVOT_FLOOR:
            raise SingularSystemError("zero pivot in row 0")
        return rhs / diag
    # gtsv overwrites its inputs
    _, _, _, x, info = _gtsv(lower[1:].copy(), diag.copy(), upper[:-1].copy(), rhs.copy())
    if info > 0:
        raise SingularSystemError(f"zero pivot in row {info - 1}")
    if info < 0:
        raise ValueError(f"gtsv: illegal argument {-info}")
    return x


def delta_weight_operator(grid: GridSpec, lam: float):
    """Tridiagonal rows of ``-delta_x^2 + lam*b`` on the interior nodes.

    Returned as ``(lower, diag, upper)`` arrays of length 2M-1 in
    :func:`tridiag_solve` layout.
    """
    h = grid.h
    m = grid.n_nodes - 2
    lower = np.full(m, -1.0 / h**2)
    upper = np.full(m, -1.0 / h**2)
    diag = np.full(m, 2.0 / h**2) + lam * delta_weights(grid)[1:-1]
    lower[0] = upper[-1] = 0.0
    return lower, diag, upper


def interface_operator(grid: GridSpec, lam: float):
    """Tridiagonal rows of the two-subdomain operator on interior nodes.

    Rows 1..M-1 come from the left subproblem, rows M+1..2M-1 from the right
    one, both with the plain three-point stencil. At the interface node the
    left and right equations each reach one ghost node (U_{l,M+1} and
    U_{r,M-1}); they are averaged and the ghost sum is replaced through the
    jump condition dU_r - dU_l = lam U_M (central differences):

        U_{l,M+1} + U_{r,M-1} = U_{M-1} + U_{M+1} - 2 lam h U_M.
    """
    h, M = grid.h, grid.M
    lower, diag, upper = (np.full(grid.n_nodes - 2, v) for v in
                          (-1.0 / h**2, 2.0 / h**2, -1.0 / h**2))
    lower[0] = upper[-1] = 0.0

    # interface row as {node or ghost: coefficient}
    left_row = {"ghost_l": -1.0 / h**2, M: 2.0 / h**2, M - 1: -1.0 / h**2}
    right_row = {M + 1: -1.0 / h**2, M: 2.0 / h**2, "ghost_r": -1.0 / h**2}
    ghost_sum = {M - 1: 1.0, M + 1: 1.0, M: -2.0 * lam * h}
    row: dict = {}
    for part in (left_row, right_row):
        for key, coef in part.items():
            row[key] = row.get(key, 0.0) + 0.5 * coef
    ghost_coef = row.pop("ghost_l")
    if row.pop("ghost_r") != ghost_coef:
        raise AssertionError("ghost coefficients must match to eliminate the pair")
    for key, coef in ghost_sum.items():
        row[key] += ghost_coef * coef

    i = M - 1  # interior row index of node M
    lower[i], diag[i], upper[i] = row[M - 1], row[M], row[M + 1]
    return lower, diag, upper


def _tridiag_matvec(lower, diag, upper, v):
    out = diag * v
    out[1:] += lower[1:] * v[:-1]
    out[:-1] += upper[:-1] * v[1:]
    return out


class _Stepper:
    """Per-run cache of the constant parts of the Crank-Nicolson system.

    The step solves, for the interior unknowns V,

        i (V - U)/tau = L (V + U)/2 + (mu/2) c (V + U),

    with L the mode's spatial operator and c the frozen chord coefficients.
    Only the diagonal of the system changes between iterations.
    """

    def __init__(self, grid: GridSpec, params: ModelParams, cfg: SolverConfig):
        params.require_regularized()
        self.grid = grid
        self.params = params
        self.cfg = cfg
        build = interface_operator if cfg.mode is Mode.INTERFACE else delta_weight_operator
        self.L = build(grid, params.lam)
        lower, diag, upper = self.L
        self.lower = (-0.5 * lower).astype(complex)
        self.upper = (-0.5 * upper).astype(complex)
        self.half_diag = 0.5 * diag

    def step(self, u: NDArray[np.complex128], tau: float | None = None):
        cfg, params = self.cfg, self.params
        inv_tau = 1.0 / (cfg.tau if tau is None else tau)

        if not np.all(np.isfinite(u)):
            raise BlowUp("non-finite values in the incoming state", math.nan, 0)
        u_in = u[1:-1]
        rho_old = np.abs(u_in) ** 2
        explicit = 1j * inv_tau * u_in + 0.5 * _tridiag_matvec(*self.L, u_in)
        base_diag = 1j * inv_tau - self.half_diag

        v = u.copy()
        prev_res = math.inf
        streak = 0
        residual = math.inf
        for it in range(1, cfg.fp_max_iters + 1):
            pot = 0.5 * params.mu * chord_q(np.abs(v[1:-1]) ** 2, rho_old, params.eps)
            v_new = np.zeros_like(u)
            v_new[1:-1] = tridiag_solve(self.lower, base_diag - pot, self.upper,
                                        explicit + pot * u_in)
            if not np.all(np.isfinite(v_new)):
                raise BlowUp("non-finite values in the solution", residual, it)
            residual = float(np.max(np.abs(v_new - v)))
            v = v_new
            if residual <= cfg.fp_tol:
                return v, StepReport(it, residual, True)
            streak = streak + 1 if residual > prev_res else 0
            if streak >= GROWTH_STREAK:
                raise BlowUp(
                    f"fixed-point residual grew {GROWTH_STREAK} times in a row "
                    f"(last {residual:.3e})", residual, it)
            prev_res = residual
        raise StepFailure(
            f"fixed-point iteration did not reach {cfg.fp_tol:g} in "
            f"{cfg.fp_max_iters} iterations (residual {residual:.3e})",
            residual, cfg.fp_max_iters)


def cnfd_step(U_k: MeshFunction, params: ModelParams, cfg: SolverConfig):
    """Advance one step in the delta-weight formulation.

    Returns ``(U_next, StepReport)``.
    """
    if cfg.mode is not Mode.DELTA_WEIGHT:
        cfg = replace(cfg, mode=Mode.DELTA_WEIGHT)
    v, report = _Stepper(U_k.grid, params, cfg).step(U_k.values)
    return MeshFunction(v, U_k.grid), report


def split_at_interface(U: MeshFunction):
    """Left (nodes 0..M) and right (nodes M..2M) subdomain values."""
    M = U.grid.M
    return U.values[: M + 1].copy(), U.values[M:].copy()


def merge_subdomains(Ul, Ur, grid: GridSpec) -> MeshFunction:
    Ul = np.asarray(Ul, dtype=complex)
    Ur = np.asarray(Ur, dtype=complex)
    M = grid.M
    if Ul.shape != (M + 1,) or Ur.shape != (M + 1,):
        raise ValueError(f"subdomain arrays must have M+1={M + 1} nodes")
    if Ul[-1] != Ur[0]:
        raise ValueError("left and right values disagree at the interface node")
    return MeshFunction(np.concatenate([Ul, Ur[1:]]), grid)


def cnfd_step_interface(Ul_k, Ur_k, params: ModelParams, cfg: SolverConfig, grid: GridSpec):
    """Advance one step in the two-subdomain (interface) formulation.

    ``Ul_k`` holds nodes 0..M, ``Ur_k`` nodes M..2M; they must share the
    interface value. Returns ``(Ul_next, Ur_next, StepReport)``.
    """
    U = merge_subdomains(Ul_k, Ur_k, grid)
    if cfg.mode is not Mode.INTERFACE:
        cfg = replace(cfg, mode=Mode.INTERFACE)
    v, report = _Stepper(grid, params, cfg).step(U.values)
    Ul, Ur = split_at_interface(MeshFunction(v, grid))
    return Ul, Ur, report


def interface_ghosts(U_half: MeshFunction, lam: float):
    """Ghost half-step values (U_{l,M+1}, U_{r,M-1}) implied by a half-step field.

    Each subdomain's interface equation shares its one-sided neighbour with
    the full grid; the jump relation fixes the ghost sum and continuity
    of the second difference splits it symmetrically:
    U_{l,M+1} = U_{M+1} - lam h U_M and U_{r,M-1} = U_{M-1} - lam h U_M.
    """
    g = U_half.grid
    M, h = g.M, g.h
    v = U_half.values
    return v[M + 1] - lam * h * v[M], v[M - 1] - lam * h * v[M]


def run(u0: MeshFunction, params: ModelParams, cfg: SolverConfig,
        callback: Callable[[float, MeshFunction], None] | None = None):
    """Integrate from ``u0`` to time ``cfg.T``.

    Returns ``(U_final, DiagnosticsSeries)``. Diagnostics are recorded at
    t = 0, every ``record_every`` steps and at the final time; ``callback``
    (if given) is called with ``(t, U)`` at the same instants. A failing step
    raises :class:`StepFailure` with ``step``, ``t``, ``series`` and the last
    good ``state`` attached.
    """
    from .diagnostics import DiagnosticsSeries

    grid = u0.grid
    stepper = _Stepper(grid, params, cfg)
    v = u0.values.copy()
    v[0] = v[-1] = 0.0

    series = DiagnosticsSeries(params)
    n = cfg.n_steps
    U = MeshFunction(v, grid)
    series.record(0.0, U, 0)
    if callback is not None:
        callback(0.0, U)
    last_tau = cfg.T - (n - 1) * cfg.tau
    if abs(last_tau - cfg.tau) <= 1e-9 * cfg.tau:
        last_tau = cfg.tau
    for k in range(1, n + 1):
        t = cfg.T if k == n else k * cfg.tau
        try:
            v, report = stepper.step(v, last_tau if k == n else cfg.tau)
        except StepFailure as exc:
            exc.step, exc.t, exc.series, exc.state = k, t, series, MeshFunction(v, grid)
            raise
        if k % cfg.record_every == 0 or k == n:
            U = MeshFunction(v, grid)
            series.record(t, U, report.iterations)
            if callback is not None:
                callback(t, U)
        else:
            series.note_iterations(report.iterations)
    U = MeshFunction(v, grid)
    return U, series
