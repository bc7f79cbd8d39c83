"""
Orchestration of the log-pole construction: eps-sweeps of the regularized Monge-Ampere equation,
the C_eps bound chains in dimensions 2 and 3, comparison-principle pole certificates and
Lelong slopes of the resulting potentials.
---
Torus Monge-Ampere laboratory
"""

import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from Hyperparameters import Hyperparameters, default_hyperparameters
from LAB_HELPERS.LAB_constants import (
    LELONG_OUTER_RADIUS, MAX_BUMP_RADIUS, MIN_BUMP_CELLS, MIN_LELONG_RADII,
    PIPELINE_INFO_AUDIT, PIPELINE_INFO_CERTIFICATE, PIPELINE_INFO_SWEEP,
)
from LAB_HELPERS.LAB_errors import InputError, LabError, RegionError
from MODELS.CALCULUS.complex_calculus import (
    Form11, FormClassSpec, ScalarField, ddbar, gauduchon_defect, integrate,
    min_eigen_field, top_power, wedge_top,
)
from MODELS.HELPERS.Utils import linear_fit, ols_fit, power_law_exponent
from MODELS.MONGE_AMPERE.ma_solver import MASolution, regularized_background, solve_regularized
from MODELS.SINGULARITY.singularity_forms import (
    DEFAULT_PROFILE, BumpSpec, ChiProfile, bump_rhs_density, gamma_potential, gamma_top_density, torus_distance,
)

logger = logging.getLogger("PIPELINE")


@dataclass
class TheoremInstance:
    beta: FormClassSpec
    omega: Form11
    bumps: List[BumpSpec]
    delta: float
    eps_schedule: List[float]
    nef_potentials: Dict[float, ScalarField] = field(default_factory=dict)
    args: Optional[Hyperparameters] = None
    profile: ChiProfile = DEFAULT_PROFILE
    tol_C: float = 0.02

    def __post_init__(self):
        if self.args is None:
            self.args = default_hyperparameters(self.dimension)
        if not self.delta > 0:
            raise InputError(f"delta must be positive, got {self.delta}")
        schedule = [float(e) for e in self.eps_schedule]
        if len(schedule) == 0 or any(e <= 0 for e in schedule):
            raise InputError("eps_schedule must be a non-empty list of positive values")
        if any(b >= a for a, b in zip(schedule, schedule[1:])):
            raise InputError("eps_schedule must be strictly decreasing")
        self.eps_schedule = schedule
        if self.volume_budget <= 0:
            raise InputError(f"int beta^n must be positive, got {self.volume_budget:.6g}")

    @property
    def grid(self):
        return self.omega.grid

    @property
    def dimension(self):
        return self.omega.grid.complex_dim

    @property
    def volume_budget(self):
        return integrate(top_power(self.beta.realize(self.grid)))

    @property
    def weight_sum(self):
        return float(sum(b.weight ** self.dimension for b in self.bumps))

    @property
    def conforming(self):
        return self.weight_sum < self.volume_budget

    def omega_defect(self):
        return gauduchon_defect(self.omega) if self.dimension >= 2 else 0.0

    def bumps_at(self, eps):
        return [b.with_radius(eps) for b in self.bumps]

    def nef_potential(self, eps):
        return self.nef_potentials.get(eps)

    def background(self, eps):
        return regularized_background(self.beta, self.omega, eps, self.nef_potential(eps))

    def rhs_density(self, eps):
        bumps = self.bumps_at(eps)
        density = self.delta * top_power(self.omega)
        if bumps:
            density = density + bump_rhs_density(bumps, self.grid, self.profile)
        return density

    def solve(self, eps, name=None):
        return solve_regularized(
            self.beta, self.omega, eps, self.delta, self.bumps_at(eps),
            args=self.args, nef_potential=self.nef_potential(eps), profile=self.profile, name=name,
        )


@dataclass
class PipelineReport:
    dimension: int
    conforming: bool
    volume_budget: float
    weight_sum: float
    omega_gauduchon_defect: float
    rows: list = field(default_factory=list)
    bound_checks: dict = field(default_factory=dict)
    lelong: list = field(default_factory=list)
    certificates: list = field(default_factory=list)
    audits: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    solutions: dict = field(default_factory=dict, repr=False)

    def to_dict(self):
        return {
            "dimension": self.dimension,
            "conforming": self.conforming,
            "volume_budget": self.volume_budget,
            "weight_sum": self.weight_sum,
            "omega_gauduchon_defect": float(self.omega_gauduchon_defect),
            "rows": self.rows,
            "bound_checks": self.bound_checks,
            "lelong": self.lelong,
            "certificates": self.certificates,
            "audits": self.audits,
            "flags": self.flags,
        }


"""----------------------------------------------------------------------
ENVELOPES
"""
def envelope_bounds(instance: TheoremInstance, eps):
    """
    Max/min-point envelopes: C_eps <= C_hat/delta with C_hat = max (beta+eps omega)^n/omega^n, and
    C_eps >= (eps/2)^n / max(rhs/omega^n) = c_hat eps^(3n).
    """
    n = instance.dimension
    omega_density = top_power(instance.omega).values
    ratio_up = top_power(instance.background(eps)).values / omega_density
    C_hat = float(ratio_up.max())
    M_eps = float((instance.rhs_density(eps).values / omega_density).max())
    lower = (0.5 * eps) ** n / M_eps
    return {
        "upper": C_hat / instance.delta,
        "C_hat": C_hat,
        "lower": lower,
        "c_hat": lower / eps ** (3 * n),
    }


def max_point_diagonal(potential: ScalarField, index):
    """Compact second differences (x_j plus y_j) at a grid point; all <= 0 at a discrete maximum."""
    grid = potential.grid
    n, m = grid.complex_dim, grid.resolution
    values = potential.values
    centre = values[tuple(index)]
    diagonal = []
    for j in range(n):
        total = 0.0
        for axis in (j, n + j):
            plus = list(index)
            minus = list(index)
            plus[axis] = (plus[axis] + 1) % m
            minus[axis] = (minus[axis] - 1) % m
            total += (values[tuple(plus)] - 2 * centre + values[tuple(minus)]) * m * m
        diagonal.append(0.25 * total)
    return diagonal


"""----------------------------------------------------------------------
SWEEP
"""
def sweep_row(instance: TheoremInstance, eps, solution: MASolution):
    grid = instance.grid
    envelope = envelope_bounds(instance, eps)
    oracle = integrate(top_power(instance.background(eps))) / integrate(instance.rhs_density(eps))
    potential = solution.potential
    phi = potential if instance.nef_potential(eps) is None else potential - instance.nef_potential(eps)
    argmax = phi.argmax()
    diagonal = max_point_diagonal(phi, argmax)
    C = solution.constant
    return {
        "eps": float(eps),
        "C_eps": C,
        "C_oracle": oracle,
        "oracle_rel_error": abs(C - oracle) / oracle,
        "residual": solution.residual_linf,
        "newton_iters": solution.newton_iters,
        "positivity_margin": solution.positivity_margin,
        "l1_norm": integrate(ScalarField(grid, np.abs(potential.values))),
        "sup_location": [float(c) for c in potential.point(potential.argmax())],
        "lower_env": envelope["lower"],
        "upper_env": envelope["upper"],
        "C_hat": envelope["C_hat"],
        "c_hat": envelope["c_hat"],
        "envelope_ok": bool(envelope["lower"] <= C <= envelope["upper"]),
        "max_point_diagonal_ok": bool(max(diagonal) <= 1e-9 * max(1.0, abs(phi.inf()))),
        "flags": list(solution.flags),
    }


def run_sweep(instance: TheoremInstance, threads=None) -> PipelineReport:
    """Solves the regularized equation for every eps of the schedule; per-eps failures are recorded."""
    threads = instance.args.threads if threads is None else threads
    report = PipelineReport(
        dimension=instance.dimension,
        conforming=instance.conforming,
        volume_budget=instance.volume_budget,
        weight_sum=instance.weight_sum,
        omega_gauduchon_defect=instance.omega_defect(),
    )
    if not instance.conforming:
        report.flags.append("condition_2_violated")
        logger.warning(f"{PIPELINE_INFO_SWEEP} non-conforming instance: sum tau^n {instance.weight_sum:.6g} >= {instance.volume_budget:.6g}")

    def solve_one(eps):
        try:
            return instance.solve(eps, name=f"sweep[eps={eps:g}]"), None
        except LabError as error:
            return None, error

    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as executor:
        results = list(executor.map(solve_one, instance.eps_schedule))

    for eps, (solution, error) in zip(instance.eps_schedule, results):
        if error is not None:
            logger.warning(f"{PIPELINE_INFO_SWEEP} eps={eps:g} failed: {type(error).__name__}: {error}")
            report.rows.append({"eps": float(eps), "error": type(error).__name__, "message": str(error)})
            continue
        report.solutions[eps] = solution
        row = sweep_row(instance, eps, solution)
        report.rows.append(row)
        if instance.args.verbose:
            print(f"{PIPELINE_INFO_SWEEP} eps={eps:g}: C_eps {row['C_eps']:.8g} (oracle {row['C_oracle']:.8g}) - L1 {row['l1_norm']:.4g}")

    solved = [row for row in report.rows if "error" not in row]
    report.bound_checks["envelope_violations"] = sum(1 for row in solved if not row["envelope_ok"])
    if len(solved) >= 2:
        norms = [row["l1_norm"] for row in solved]
        report.bound_checks["l1_ratio"] = max(norms) / max(min(norms), 1e-300)
    smallest = min(instance.eps_schedule)
    last = next((row for row in solved if row["eps"] == smallest), None)
    if last is not None:
        report.bound_checks["threshold"] = {
            "eps": smallest,
            "C_eps": last["C_eps"],
            "tol_C": instance.tol_C,
            "expected": bool(instance.conforming),
            "passed": bool(last["C_eps"] >= 1.0 - instance.tol_C) if instance.conforming else None,
        }
    return report


def budget_boundary_sweep(instance: TheoremInstance, eps, weights):
    """C_eps as the single-bump weight tau rises towards the volume budget."""
    if len(instance.bumps) != 1:
        raise InputError("boundary sweep needs exactly one bump")
    rows = []
    for tau in weights:
        bump = BumpSpec(instance.bumps[0].center, eps, tau)
        solution = solve_regularized(instance.beta, instance.omega, eps, instance.delta, [bump],
                                     args=instance.args, nef_potential=instance.nef_potential(eps),
                                     profile=instance.profile)
        rows.append({
            "tau": float(tau),
            "budget_fraction": float(tau) ** instance.dimension / instance.volume_budget,
            "C_eps": solution.constant,
        })
    return rows


"""----------------------------------------------------------------------
IDENTITY AUDITS
"""
def n2_identity_audit(instance: TheoremInstance, eps, potential: Optional[ScalarField] = None):
    """
    int (beta + eps omega)^2 = int beta^2 + 2 eps int (beta + eps omega + ddbar psi) ^ omega - eps^2 int omega^2.
    """
    if instance.dimension != 2:
        raise InputError(f"n2_identity_audit needs n = 2, got n = {instance.dimension}")
    grid = instance.grid
    beta = instance.beta.realize(grid)
    omega = instance.omega
    psi = potential if potential is not None else instance.nef_potential(eps)
    shifted = beta + eps * omega
    if psi is not None:
        shifted = shifted + ddbar(psi)
    lhs = integrate(wedge_top([beta + eps * omega, beta + eps * omega]))
    beta_sq = integrate(wedge_top([beta, beta]))
    cross = integrate(wedge_top([shifted, omega]))
    omega_sq = integrate(wedge_top([omega, omega]))
    rhs = beta_sq + 2 * eps * cross - eps ** 2 * omega_sq
    report = {
        "eps": float(eps),
        "lhs": lhs,
        "rhs": rhs,
        "discrepancy": abs(lhs - rhs),
        "int_beta_sq": beta_sq,
        "int_shifted_wedge_omega": cross,
        "int_omega_sq": omega_sq,
        "omega_gauduchon_defect": gauduchon_defect(omega),
    }
    if instance.args.verbose:
        print(f"{PIPELINE_INFO_AUDIT} n=2 identity at eps={eps:g}: discrepancy {report['discrepancy']:.3e}")
    return report


def n3_chain_audit(instance: TheoremInstance, eps, potential: Optional[ScalarField] = None):
    """
    Evaluates the dimension-3 chain for beta_eps = beta + eps omega + ddbar(psi + phi) term by term.
    The potential defaults to the solution of the regularized equation at eps.
    """
    if instance.dimension != 3:
        raise InputError(f"n3_chain_audit needs n = 3, got n = {instance.dimension}")
    grid = instance.grid
    if potential is None:
        potential = instance.solve(eps, name=f"chain[eps={eps:g}]").potential
    beta = instance.beta.realize(grid)
    omega = instance.omega
    beta_eps = beta + eps * omega + ddbar(potential)
    stripped = beta_eps - eps * omega

    I1 = integrate(wedge_top([beta_eps, omega, omega]))
    I1_ref = integrate(wedge_top([beta + eps * omega, omega, omega]))
    T = integrate(wedge_top([stripped, stripped, stripped]))
    beta_cube = integrate(wedge_top([beta, beta, beta]))
    beta_eps_cube = integrate(top_power(beta_eps))
    I2 = integrate(wedge_top([beta_eps, beta_eps, omega]))
    omega_cube = integrate(top_power(omega))
    expansion = T + 3 * eps * I2 - 3 * eps ** 2 * I1 + eps ** 3 * omega_cube
    chain_deficit = 3 * eps ** 2 * I1
    # what the chain drops, measured from the integrals themselves
    measured_deficit = beta_cube + 3 * eps * I2 - beta_eps_cube

    report = {
        "eps": float(eps),
        "int_beta_eps_omega2": I1,
        "int_shifted_omega2": I1_ref,
        "est1_discrepancy": abs(I1 - I1_ref),
        "int_stripped_cube": T,
        "int_beta_cube": beta_cube,
        "stripped_discrepancy": abs(T - beta_cube),
        "int_beta_eps_cube": beta_eps_cube,
        "int_beta_eps2_omega": I2,
        "int_omega_cube": omega_cube,
        "expansion": expansion,
        "expansion_discrepancy": abs(beta_eps_cube - expansion),
        "chain_deficit": chain_deficit,
        "measured_deficit": measured_deficit,
        "actual_deficit": beta_cube - beta_eps_cube,
        "lower_bound_holds": bool(beta_eps_cube >= beta_cube - chain_deficit - 1e-12 * abs(beta_cube)),
        "omega_gauduchon_defect": gauduchon_defect(omega),
    }
    if instance.args.verbose:
        print(f"{PIPELINE_INFO_AUDIT} n=3 chain at eps={eps:g}: est1 {report['est1_discrepancy']:.3e} - stripped {report['stripped_discrepancy']:.3e}")
    return report


def n3_chain_fit(instance: TheoremInstance, potentials: Optional[Dict[float, ScalarField]] = None):
    """
    Chain audits over the schedule, C' = max chain deficit/eps^2, the worst identity residual and
    the fitted exponent of the measured deficit int beta^3 + 3 eps I2 - int beta_eps^3.
    """
    potentials = potentials or {}
    audits = [n3_chain_audit(instance, eps, potentials.get(eps)) for eps in instance.eps_schedule]
    eps_values = [a["eps"] for a in audits]
    C_prime = max(a["chain_deficit"] / e ** 2 for a, e in zip(audits, eps_values))
    measured = [a["measured_deficit"] for a in audits]
    fit = None
    if len(audits) >= 3 and all(d > 0 for d in measured):
        fit = power_law_exponent(eps_values, measured)
    holds = all(a["int_beta_eps_cube"] >= a["int_beta_cube"] - C_prime * a["eps"] ** 2 - 1e-12 for a in audits)
    return {
        "audits": audits,
        "C_prime": C_prime,
        "identity_residual": max(a["expansion_discrepancy"] for a in audits),
        "deficit_fit": fit,
        "bound_holds": bool(holds),
    }


"""----------------------------------------------------------------------
COMPARISON AND POLE CERTIFICATES
"""
@dataclass(frozen=True)
class BallRegion:
    center: tuple
    radius: float
    ring_width: Optional[float] = None

    def masks(self, grid):
        if self.radius < 4 * grid.spacing - 1e-15:
            raise RegionError(f"region radius {self.radius} has fewer than 8 grid points across")
        if self.radius >= 0.5:
            raise RegionError(f"region radius {self.radius} leaves the chart")
        width = grid.spacing if self.ring_width is None else self.ring_width
        distance = grid.chart_radius(self.center)
        inside = distance <= self.radius
        ring = inside & (distance > self.radius - width)
        return distance, inside, ring


def comparison_verify(u: ScalarField, v: ScalarField, region: BallRegion,
                      ma_u: Optional[ScalarField] = None, ma_v: Optional[ScalarField] = None,
                      slack=0.0, hypothesis_tol=1e-10):
    """
    Checks the comparison principle on a ball: if u >= v on the boundary ring and
    MA(v) >= MA(u) inside, then u >= v - slack throughout. Inputs violating the hypotheses
    are rejected rather than judged.
    """
    grid = u.grid
    if v.grid != grid:
        raise InputError("u and v live on different grids")
    distance, inside, ring = region.masks(grid)
    interior = inside & ~ring

    local = grid.with_stencil('central')
    if ma_u is None:
        ma_u = top_power(ddbar(ScalarField(local, u.values)))
    if ma_v is None:
        ma_v = top_power(ddbar(ScalarField(local, v.values)))

    gap = u.values - v.values
    ring_gap = float(gap[ring].min())
    ma_gap = float((ma_v.values - ma_u.values)[interior].min()) if interior.any() else 0.0
    hypotheses = {
        "boundary_order": ring_gap >= -hypothesis_tol,
        "ma_order": ma_gap >= -hypothesis_tol * max(1.0, float(np.abs(ma_v.values[interior]).max())),
        "ring_gap": ring_gap,
        "ma_gap": ma_gap,
    }
    masked = np.where(inside, gap, np.inf)
    witness = np.unravel_index(int(np.argmin(masked)), grid.shape)
    worst = float(masked[witness])
    report = {
        "hypotheses": hypotheses,
        "worst_slack": worst,
        "witness": [float(c) for c in np.asarray(witness) * grid.spacing],
        "points": int(inside.sum()),
        "slack": float(slack),
    }
    if not (hypotheses["boundary_order"] and hypotheses["ma_order"]):
        report["status"] = "rejected"
        report["passed"] = False
        return report
    report["passed"] = bool(worst >= -slack)
    report["status"] = "pass" if report["passed"] else "fail"
    return report


def pole_certificate(instance: TheoremInstance, eps, solution: MASolution, bump_index,
                     chart_radius=0.25, slack=1e-2, center=None):
    """
    Barrier u = C^(1/n) tau (chi(log(r/eps)) + log eps) + C_1 against v = lambda |z|^2 + psi + phi on the
    chart ball; on success certifies psi + phi <= tau log(r + eps) + C_2 on the half ball.
    """
    grid = instance.grid
    n = instance.dimension
    certificate = {"eps": float(eps), "bump_index": int(bump_index), "granted": False}
    if not 0 <= bump_index < len(instance.bumps):
        certificate["reason"] = f"region error: no bump with index {bump_index}"
        return certificate
    bump = instance.bumps[bump_index].with_radius(eps)
    tau = bump.weight
    C = solution.constant
    certificate["C_eps"] = C

    if C < 1.0:
        reason = "C_eps < 1"
        if not instance.conforming:
            reason += " (condition (2) violated)"
        certificate["reason"] = reason
        logger.info(f"{PIPELINE_INFO_CERTIFICATE} bump {bump_index} declined at eps={eps:g}: {reason}")
        return certificate

    center = bump.center if center is None else tuple(center)
    region = BallRegion(center, chart_radius)
    try:
        distance, inside, ring = region.masks(grid)
        if torus_distance(center, bump.center) + eps >= 0.5 * chart_radius:
            raise RegionError("bump support is not inside the certified half ball")
    except RegionError as error:
        certificate["reason"] = f"region error: {error}"
        return certificate

    Phi = solution.potential
    background = instance.background(eps)
    lam = float(np.linalg.eigvalsh(np.ascontiguousarray(background.coeff))[..., -1].max())
    radius = grid.chart_radius(bump.center)
    v = ScalarField(grid, lam * radius ** 2 + Phi.values)

    scale = C ** (1.0 / n) * tau
    barrier = scale * (gamma_potential(bump, grid, instance.profile).values + math.log(eps))
    C0 = float(v.values[ring].max())
    # smallest C_1 with u >= v on the whole ring
    C1 = float((v.values - barrier)[ring].max())
    u = ScalarField(grid, barrier + C1)

    ma_u = ScalarField(grid, C * tau ** n * gamma_top_density(bump, grid, instance.profile).values)
    hessian_v = Form11.constant(grid, lam * np.eye(n)) + ddbar(Phi)
    ma_v = top_power(hessian_v)
    comparison = comparison_verify(u, v, region, ma_u=ma_u, ma_v=ma_v, slack=slack)

    half_ball = distance < 0.5 * chart_radius
    envelope = tau * np.log(radius + eps)
    excess = Phi.values - envelope
    violations = int(np.sum(excess[half_ball] > C1 + slack))
    certificate.update({
        "lambda": lam,
        "chart_radius": float(chart_radius),
        "C0": C0,
        "C1": C1,
        "C2": float(excess[half_ball].max()),
        "comparison": comparison,
        "violations": violations,
        "points_checked": int(half_ball.sum()),
    })
    if comparison["status"] != "pass":
        certificate["reason"] = f"comparison {comparison['status']} at {comparison['witness']}"
    elif violations:
        certificate["reason"] = f"{violations} pointwise violations of the log bound"
    else:
        certificate["granted"] = True
        certificate["reason"] = "granted"
    logger.info(f"{PIPELINE_INFO_CERTIFICATE} bump {bump_index} at eps={eps:g}: {certificate['reason']}")
    return certificate


"""----------------------------------------------------------------------
LELONG SLOPES
"""
def lelong_estimate(potential: ScalarField, center, radii, shell_width=None, smooth_term=True):
    """
    Least-squares slope of M(r) = max over the shell |z - center| in [r - w, r + w] against
    log of the radius where that maximum is attained (w defaults to h). With smooth_term the
    fit is M = c + slope log r + b r^2, the r^2 term absorbing the smooth background. Needs at least MIN_LELONG_RADII strictly decreasing, resolved radii.
    """
    grid = potential.grid
    radii = [float(r) for r in radii]
    if len(radii) < MIN_LELONG_RADII:
        raise InputError(f"lelong_estimate needs at least {MIN_LELONG_RADII} radii, got {len(radii)}")
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise InputError("radii must be strictly decreasing")
    if min(radii) < MIN_BUMP_CELLS * grid.spacing - 1e-15:
        raise InputError(f"radii must be resolved (>= {MIN_BUMP_CELLS * grid.spacing:g})")
    if max(radii) >= 0.5:
        raise InputError("radii must stay inside the chart")
    width = grid.spacing if shell_width is None else shell_width
    distance = grid.chart_radius(center)

    rows = []
    for r in radii:
        shell = np.abs(distance - r) <= width
        if not shell.any():
            raise InputError(f"empty shell at radius {r}")
        values = np.where(shell, potential.values, -np.inf)
        index = np.unravel_index(int(np.argmax(values)), grid.shape)
        rows.append({"radius": r, "attained_radius": float(distance[index]), "M": float(values[index])})

    attained = np.array([row["attained_radius"] for row in rows])
    M = np.array([row["M"] for row in rows])
    if len(np.unique(attained)) < 3:
        raise InputError("shells overlap: fewer than 3 distinct attained radii")
    if not smooth_term:
        fit = linear_fit(np.log(attained), M)
        return {"slope": fit["slope"], "stderr": fit["stderr"], "conf_int": fit["conf_int"], "rows": rows}
    design = np.column_stack([np.ones_like(attained), np.log(attained), attained ** 2])
    fit = ols_fit(design, M)
    return {
        "slope": float(fit["params"][1]),
        "stderr": float(fit["stderr"][1]),
        "conf_int": [float(v) for v in fit["conf_int"][1]],
        "curvature": float(fit["params"][2]),
        "rows": rows,
    }


def default_lelong_radii(grid, eps, count=MIN_LELONG_RADII + 1, outer=None):
    """
    Log-spaced radii over the resolved band outside the bump core, from outer down to
    max(eps, MIN_BUMP_CELLS h). Inside the core the regularized potential is flat.
    outer defaults to max(MAX_BUMP_RADIUS, 2 inner), capped at LELONG_OUTER_RADIUS.
    """
    inner = max(float(eps), MIN_BUMP_CELLS * grid.spacing)
    if outer is None:
        outer = min(max(MAX_BUMP_RADIUS, 2 * inner), LELONG_OUTER_RADIUS)
    if inner >= outer:
        raise InputError(f"no resolved band for Lelong radii: core {inner:g} reaches the outer radius {outer:g}")
    return [float(r) for r in np.geomspace(outer, inner, count)]


"""----------------------------------------------------------------------
FULL RUN
"""
def run_pipeline(instance: TheoremInstance, threads=None, lelong_radii=None, chart_radius=0.25, slack=1e-2,
                 boundary_weights=None):
    """
    Sweep, certificates at the two smallest eps, Lelong slopes at the smallest eps, identity audits.
    With boundary_weights, also C_eps at the smallest eps for each single-bump weight in the list.
    """
    report = run_sweep(instance, threads=threads)
    solved = sorted(report.solutions)
    for eps in solved[:2]:
        for j in range(len(instance.bumps)):
            report.certificates.append(
                pole_certificate(instance, eps, report.solutions[eps], j, chart_radius=chart_radius, slack=slack))

    if solved:
        eps = solved[0]
        for j, bump in enumerate(instance.bumps):
            try:
                radii = lelong_radii or default_lelong_radii(instance.grid, eps)
                estimate = lelong_estimate(report.solutions[eps].potential, bump.center, radii)
            except LabError as error:
                report.lelong.append({"bump_index": j, "eps": eps, "error": type(error).__name__, "message": str(error)})
                continue
            estimate.update({"bump_index": j, "eps": eps, "tau": bump.weight,
                             "meets_tau": bool(estimate["slope"] >= bump.weight - 0.05)})
            report.lelong.append(estimate)

    if instance.dimension == 2:
        report.audits["n2_identity"] = [n2_identity_audit(instance, eps) for eps in instance.eps_schedule]
    elif instance.dimension == 3:
        potentials = {eps: sol.potential for eps, sol in report.solutions.items()}
        try:
            report.audits["n3_chain"] = n3_chain_fit(instance, potentials)
        except LabError as error:
            report.audits["n3_chain"] = {"error": type(error).__name__, "message": str(error)}

    if boundary_weights and solved:
        report.audits["boundary_sweep"] = budget_boundary_sweep(instance, solved[0], boundary_weights)
    return report
