"""
Hermitian complex Monge-Ampere equations on the flat torus:

    (w_hat + ddbar f)^n = K e^F w_hat^n                                  (exponential mode)
    (beta + eps omega + ddbar(psi + phi))^n = C_eps (sum tau_j^n gamma_j^n + delta omega^n)   (measure mode)

Both are solved for the pair (f, K) by NewtonSolver; the potential is normalized to sup f = 0 at the end.
---
Torus Monge-Ampere laboratory
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from Hyperparameters import default_hyperparameters
from LAB_HELPERS.LAB_constants import SOLVER_INFO_HOMOTOPY, SOLVER_INFO_NEWTON
from LAB_HELPERS.LAB_errors import InputError, GridMismatchError
from MODELS.CALCULUS.complex_calculus import (
    Form11, FormClassSpec, ScalarField, ddbar, density_factor, integrate,
    min_eigen_field, top_power,
)
from MODELS.MONGE_AMPERE.Solvers import NewtonSolver
from MODELS.SINGULARITY.singularity_forms import DEFAULT_PROFILE, bump_rhs_density, check_disjoint

logger = logging.getLogger("MONGE-AMPERE")

RHS_MODES = ('exponential', 'measure')


@dataclass(frozen=True)
class MAProblem:
    background: Form11
    rhs_mode: str
    rhs: ScalarField
    background_closed: bool = True

    def __post_init__(self):
        if self.rhs_mode not in RHS_MODES:
            raise InputError(f"rhs_mode must be one of {RHS_MODES}, got '{self.rhs_mode}'")
        if self.rhs.grid != self.background.grid:
            raise GridMismatchError("rhs and background live on different grids")

    @classmethod
    def exponential(cls, background, F=None, closed=True):
        F = ScalarField.zeros(background.grid) if F is None else F
        return cls(background, 'exponential', F, closed)

    @classmethod
    def measure(cls, background, density, closed=True):
        return cls(background, 'measure', density, closed)

    @property
    def grid(self):
        return self.background.grid

    def validate(self, margin):
        lowest = min_eigen_field(self.background).inf()
        if lowest <= margin:
            raise InputError(f"background is not positive definite (min eigenvalue {lowest:.3e})")
        if self.rhs_mode == 'measure':
            if self.rhs.inf() < 0 or integrate(self.rhs) <= 0:
                raise InputError("measure density must be nonnegative with positive integral")
            if self.rhs.inf() <= 0:
                zeros = int(np.sum(self.rhs.values <= 0))
                raise InputError(
                    f"measure density vanishes at {zeros} grid points; the log residual needs d > 0 pointwise, "
                    f"so add a delta omega^n floor with delta > 0 (the regularized equation always carries one)"
                )
        return self

    def log_rhs(self):
        """log of the right-hand side in coefficient form, so that log det(metric) = log K + log_rhs."""
        if self.rhs_mode == 'exponential':
            _, logdet = np.linalg.slogdet(np.ascontiguousarray(
                np.broadcast_to(self.background.coeff, self.grid.shape + self.background.coeff.shape[-2:])))
            return self.rhs.values + logdet
        return np.log(self.rhs.values / density_factor(self.grid.complex_dim))


@dataclass
class MASolution:
    potential: ScalarField
    constant: float
    residual_linf: float
    newton_iters: int
    positivity_margin: float
    trace: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    residual_stats: dict = field(default_factory=dict)

    def summary(self):
        return {
            "constant": self.constant,
            "residual_linf": self.residual_linf,
            "newton_iters": self.newton_iters,
            "positivity_margin": self.positivity_margin,
            "sup_potential": self.potential.sup(),
            "flags": list(self.flags),
            "residual_stats": dict(self.residual_stats),
        }


def _finish(solver, f, kappa, log_rhs, min_eig, flags):
    residual_linf = float(np.max(np.abs(solver.evaluate(f, kappa, log_rhs)[0])))
    if solver.linear_warnings:
        flags.append("linear_solve_inexact")
    potential = ScalarField(solver.grid, f).normalized_sup()
    return MASolution(
        potential=potential,
        constant=float(np.exp(kappa)),
        residual_linf=residual_linf,
        newton_iters=solver.newton_iters,
        positivity_margin=min_eig,
        trace=solver.trace,
        flags=flags,
        residual_stats=solver.residual_metrics(f, kappa, log_rhs),
    )


def solve_ma(problem: MAProblem, tol=None, args=None, initial_potential: Optional[ScalarField] = None,
             name=None) -> MASolution:
    """Newton solve of one Monge-Ampere problem for (f, K); sup f = 0 on return."""
    grid = problem.grid
    args = default_hyperparameters(grid.complex_dim) if args is None else args
    if tol is not None:
        if tol <= 0:
            raise InputError(f"tol must be positive, got {tol}")
        args = args.updated(tol=tol)
    problem.validate(args.positivity_margin)

    solver = NewtonSolver(problem.background, args, name=name or f"solve_ma[n={grid.complex_dim}]")
    log_rhs = problem.log_rhs()
    f0 = None if initial_potential is None else initial_potential.values
    f, kappa, _, min_eig = solver.solve(log_rhs, f0=f0)
    flags = [] if problem.background_closed else ["background_not_closed"]
    return _finish(solver, f, kappa, log_rhs, min_eig, flags)


def regularized_background(beta: FormClassSpec, omega: Form11, eps, nef_potential=None):
    """beta + eps omega + ddbar psi_eps, realized on omega's grid."""
    grid = omega.grid
    background = beta.realize(grid) + eps * omega
    if nef_potential is not None:
        background = background + ddbar(nef_potential)
    return background


def volume_budget(beta: FormClassSpec, grid):
    return integrate(top_power(beta.realize(grid)))


def solve_regularized(beta: FormClassSpec, omega: Form11, eps, delta, bumps: Sequence, tol=None,
                      args=None, nef_potential: Optional[ScalarField] = None,
                      profile=DEFAULT_PROFILE, name=None) -> MASolution:
    """
    Solves (beta + eps omega + ddbar(psi + phi))^n = C_eps (sum tau_j^n gamma_j^n + delta omega^n)
    by continuation from the delta-only right-hand side. The returned potential is psi + phi with sup 0.
    """
    grid = omega.grid
    n = grid.complex_dim
    args = default_hyperparameters(n) if args is None else args
    if tol is not None:
        args = args.updated(tol=tol)
    if not eps > 0:
        raise InputError(f"eps must be positive, got {eps}")
    if not delta > 0:
        raise InputError(f"delta must be positive, got {delta}")
    for spec in bumps:
        spec.validate(grid)
    check_disjoint(bumps)

    flags = []
    budget = volume_budget(beta, grid)
    weight_sum = float(sum(spec.weight ** n for spec in bumps))
    if weight_sum >= budget:
        flags.append("condition_2_violated")
        logger.warning(f"{SOLVER_INFO_HOMOTOPY} sum tau^n = {weight_sum:.6g} >= int beta^n = {budget:.6g}; C_eps >= 1 is not expected")
    if not beta.is_closed:
        flags.append("background_not_closed")

    background = regularized_background(beta, omega, eps, nef_potential)
    omega_density = top_power(omega)
    bump_density = bump_rhs_density(bumps, grid, profile) if bumps else ScalarField.zeros(grid)

    problem = MAProblem.measure(background, delta * omega_density + bump_density, closed=beta.is_closed)
    problem.validate(args.positivity_margin)

    solver = NewtonSolver(background, args, name=name or f"regularized[eps={eps:g}]")
    stages = args.homotopy_steps if bumps else 1
    f, kappa, min_eig = None, None, None
    for stage in range(1, stages + 1):
        weight = stage / stages
        stage_density = delta * omega_density + weight * bump_density
        log_rhs = np.log(stage_density.values / density_factor(n))
        if kappa is not None:
            # rescale the constant to the new total mass
            kappa = kappa + float(np.log(integrate(prev_density) / integrate(stage_density)))
        f, kappa, _, min_eig = solver.solve(log_rhs, f0=f, kappa0=kappa, stage=stage)
        prev_density = stage_density
        if args.verbose:
            print(f"{SOLVER_INFO_HOMOTOPY} {solver.name} stage {stage}/{stages}: C_eps {np.exp(kappa):.10g}")

    solution = _finish(solver, f, kappa, log_rhs, min_eig, flags)
    if nef_potential is not None:
        solution.potential = ScalarField(grid, solution.potential.values + nef_potential.values).normalized_sup()
    return solution


def mass_conservation_probe(omega_hat: Form11, f: ScalarField):
    """(integral of (omega_hat + ddbar f)^n, integral of omega_hat^n); equal when omega_hat is closed."""
    if f.grid != omega_hat.grid:
        raise GridMismatchError("omega_hat and f live on different grids")
    perturbed = integrate(top_power(omega_hat + ddbar(f)))
    reference = integrate(top_power(omega_hat))
    return perturbed, reference


def linear_reference_constant(background: Form11, F: ScalarField):
    """K = int w_hat^n / int e^F w_hat^n (exact for closed backgrounds)."""
    density = top_power(background)
    return integrate(density) / integrate(ScalarField(background.grid, np.exp(F.values)) * density)


def solution_metric(background: Form11, solution: MASolution):
    return background + ddbar(solution.potential)
