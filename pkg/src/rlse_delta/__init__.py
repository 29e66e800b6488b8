"""Crank-Nicolson finite differences for the regularized logarithmic
Schrodinger equation with a point interaction at the origin."""

from .grid import GridSpec, MeshFunction
from .nonlin import ModelParams, F_eps, Q_eps, chord_q, q_eps, q_tilde
from .solver import (BlowUp, Mode, SolverConfig, StepFailure, StepReport, cnfd_step,
                     cnfd_step_interface, run, tridiag_solve)
from .diagnostics import (DiagnosticsRecord, DiagnosticsSeries, ErrorTriple, discrete_energy,
                          discrete_mass, discrete_momentum, error_norms, observed_orders)
from .solutions import GaussonParams, exact_soliton, gausson, orbital_errors, perturbed_initial

__version__ = "0.1.0"
