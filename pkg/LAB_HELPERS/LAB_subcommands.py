"""
The experiment handlers behind the CLI subcommands. Each one takes a validated config, the run
hyperparameters and an output directory, writes its reports and the manifest, and returns the exit code.
Input errors propagate to the caller.
---
Torus Monge-Ampere laboratory
"""

import os
import math
import logging

import numpy as np

from LAB_HELPERS.LAB_config import ExperimentConfig, RunManifest
from LAB_HELPERS.LAB_constants import *
from LAB_HELPERS.LAB_errors import (
    EnumerationBudgetError, FitError, InputError, NonConvergenceError, ToleranceError,
    UnsupportedDimensionError,
)
from LAB_HELPERS.LAB_io import (
    announce, ensure_dir, save_json, write_csv, write_hdf5_bundle, write_plot_data, write_scalar_field,
)
from MODELS.CALCULUS.complex_calculus import min_eigen_field, trig_field
from MODELS.MONGE_AMPERE.ma_solver import MAProblem, linear_reference_constant, solve_ma
from MODELS.MORSE_RR.morse_rr import case_ii_audit, curvature_integrals, morse_upper_bound, rr_leading_fit
from MODELS.PIPELINE.theorem_pipeline import n2_identity_audit, n3_chain_fit, run_pipeline
from MODELS.SINGULARITY.singularity_forms import (
    BumpSpec, check_disjoint, cumulative_mass_profile, dirac_pairing, gamma_form, gamma_mass,
    gamma_radial_mass, gamma_sup_bound,
)

logger = logging.getLogger("LAB")

# above this many grid points the bump mass is checked by the radial reduction only
GRID_MASS_POINT_LIMIT = 2 ** 24
DEFAULT_TEST_FIELD = [
    {"amplitude": 1.0, "wavevector": [1], "phase": 0.0},
    {"amplitude": 0.5, "wavevector": [0, 1]},
]
MORSE_K_VALUES = [0, 1, 2, 4, 8, 16, 32]


def _finish(manifest: RunManifest, out_dir, report, exit_code, verbose):
    report["exit_code"] = exit_code
    manifest.record(announce(save_json(report, os.path.join(out_dir, "report.json")), verbose))
    path = os.path.join(out_dir, "manifest.json")
    manifest.record(path)
    save_json(manifest.to_dict(), path)
    announce(path, verbose)
    return exit_code


def _test_field(config: ExperimentConfig, grid):
    terms = config.get('checks', {}).get('test_field', DEFAULT_TEST_FIELD)
    padded = []
    for term in terms:
        k = list(term['wavevector']) + [0] * (grid.real_dim - len(term['wavevector']))
        padded.append(dict(term, wavevector=k[:grid.real_dim]))
    return trig_field(grid, padded)


#----------------------------------------------------------------
# bump-check
#----------------------------------------------------------------
def cmd_bump_check(config: ExperimentConfig, args, out_dir, manifest: RunManifest):
    grid = config.build_grid(args)
    n = grid.complex_dim
    checks = config.get('checks', {})
    mass_tol = float(checks.get('mass_tol', 5e-3))
    spread_tol = float(checks.get('sup_bound_spread', 0.2))

    bumps = config.build_bumps()
    if not bumps:
        eps = config.get('eps') or (config.get('eps_schedule') or [0.125])[0]
        bumps = [BumpSpec(tuple([0.5] * (2 * n)), float(eps), 1.0)]
    for bump in bumps:
        bump.validate(grid)
    check_disjoint(bumps)

    sup_eps = checks.get('sup_bound_eps', [1 / 8, 1 / 16, 1 / 32])
    sup_eps = [e for e in sup_eps if MIN_BUMP_CELLS * grid.spacing <= e < MAX_BUMP_RADIUS]
    on_grid = grid.num_points <= GRID_MASS_POINT_LIMIT
    test_field = _test_field(config, grid) if on_grid else None

    results, profile_rows, passed = [], [], True
    with manifest.stage("bump-check"):
        for j, bump in enumerate(bumps):
            radial, closed = gamma_radial_mass(bump.radius, bump.radius, n)
            entry = {
                "bump_index": j,
                "center": list(bump.center),
                "radius": bump.radius,
                "radial_mass": radial,
                "radial_mass_error": abs(radial - closed),
                "method": "grid" if on_grid else "radial",
            }
            ok = entry["radial_mass_error"] <= 1e-6
            radii = np.exp(-np.linspace(0.0, 1.0, int(checks.get('profile_radii', 10)), endpoint=False)) * bump.radius
            radial_profile = []
            for r in radii:
                value, telescoped = gamma_radial_mass(r, bump.radius, n)
                radial_profile.append(abs(value - telescoped))
            entry["radial_profile_error"] = max(radial_profile)
            ok = ok and entry["radial_profile_error"] <= 1e-3

            if on_grid:
                mass = gamma_mass(bump, grid)
                entry["grid_mass"] = mass
                entry["grid_mass_error"] = abs(mass - 1.0)
                ok = ok and entry["grid_mass_error"] < mass_tol
                entry["min_eigenvalue"] = min_eigen_field(gamma_form(bump, grid)).inf()
                ok = ok and entry["min_eigenvalue"] >= -1e-10
                for row in cumulative_mass_profile(bump, grid, radii):
                    profile_rows.append(dict(row, bump_index=j))

                pairing = []
                for e in sup_eps:
                    paired, point_value = dirac_pairing(bump.with_radius(e), grid, test_field)
                    pairing.append({"eps": e, "paired": paired, "point_value": point_value,
                                    "error": abs(paired - point_value)})
                entry["dirac_pairing"] = pairing
                errors = [row["error"] for row in pairing]
                entry["dirac_decreasing"] = all(b <= a + 1e-12 for a, b in zip(errors, errors[1:]))
                ok = ok and entry["dirac_decreasing"]

                bounds = [gamma_sup_bound(bump.with_radius(e), grid) for e in sup_eps]
                entry["sup_bound"] = [{"eps": e, "C_hat": c} for e, c in zip(sup_eps, bounds)]
                if bounds:
                    entry["sup_bound_spread"] = max(bounds) / min(bounds) - 1.0
                    ok = ok and entry["sup_bound_spread"] < spread_tol
            entry["passed"] = bool(ok)
            passed = passed and ok
            results.append(entry)
            if args.verbose:
                print(f"{GENERAL_INFO} bump {j}: {'pass' if ok else 'FAIL'}")

    if profile_rows:
        path = os.path.join(out_dir, "cumulative_mass.csv")
        manifest.record(announce(write_csv(profile_rows, path, columns=["bump_index", "radius", "grid_mass", "telescoped_mass"]), args.verbose))
    report = {"experiment": "bump-check", "grid": grid.describe(), "bumps": results, "passed": bool(passed)}
    return _finish(manifest, out_dir, report, EXIT_OK if passed else EXIT_ASSERTION, args.verbose)


#----------------------------------------------------------------
# solve
#----------------------------------------------------------------
def _write_trace(manifest, out_dir, trace, verbose):
    path = os.path.join(out_dir, "convergence.csv")
    columns = ["stage", "iter", "residual", "residual_l2", "K", "positivity_margin", "step"]
    manifest.record(announce(write_csv(trace, path, columns=columns), verbose))


def cmd_solve(config: ExperimentConfig, args, out_dir, manifest: RunManifest):
    grid = config.build_grid(args)
    report = {"experiment": "solve", "grid": grid.describe()}

    if 'rhs' in config.raw:
        name = 'background' if 'background' in config.get('forms', {}) else 'omega'
        form_class = config.build_class(name, grid)
        background = form_class.realize(grid)
        rhs = config.raw['rhs']
        if rhs['mode'] == 'exponential':
            F = config.build_potential(rhs.get('F'), grid)
            problem = MAProblem.exponential(background, F, closed=form_class.is_closed)
            report["rhs_mode"] = "exponential"
        else:
            density = config.build_potential(rhs.get('density'), grid)
            if density is None:
                raise InputError("rhs.mode 'measure' needs rhs.density")
            problem = MAProblem.measure(background, density, closed=form_class.is_closed)
            report["rhs_mode"] = "measure"
        initial = config.build_potential(config.get('initial_potential'), grid)
        solve = lambda: solve_ma(problem, args=args, initial_potential=initial)
    else:
        instance = config.build_instance(args)
        eps = instance.eps_schedule[0]
        report.update({"rhs_mode": "measure", "eps": eps, "delta": instance.delta,
                       "conforming": instance.conforming})
        problem = None
        solve = lambda: instance.solve(eps)

    try:
        with manifest.stage("solve"):
            solution = solve()
    except (NonConvergenceError, ToleranceError) as error:
        trace = error.diagnostics.get("trace", [])
        _write_trace(manifest, out_dir, trace, args.verbose)
        report["error"] = {"type": type(error).__name__, "message": str(error),
                           "diagnostics": {k: v for k, v in error.diagnostics.items() if k != "trace"}}
        logger.error(f"{SOLVER_INFO_ERROR} {error}")
        return _finish(manifest, out_dir, report, EXIT_ASSERTION, args.verbose)

    report["solution"] = solution.summary()
    passed = solution.residual_linf <= args.tol
    if problem is not None and problem.rhs_mode == 'exponential' and problem.background_closed:
        reference = linear_reference_constant(problem.background, problem.rhs)
        report["reference_constant"] = reference
        report["reference_rel_error"] = abs(solution.constant - reference) / reference

    _write_trace(manifest, out_dir, solution.trace, args.verbose)
    path = os.path.join(out_dir, "potential.bin")
    for written in write_scalar_field(solution.potential, path, provenance={"config_hash": manifest.config_hash}):
        manifest.record(announce(written, args.verbose))
    path = os.path.join(out_dir, "fields.h5")
    manifest.record(announce(write_hdf5_bundle(path, {"potential": solution.potential},
                                               {"constant": solution.constant}), args.verbose))
    report["passed"] = bool(passed)
    return _finish(manifest, out_dir, report, EXIT_OK if passed else EXIT_ASSERTION, args.verbose)


#----------------------------------------------------------------
# pipeline
#----------------------------------------------------------------
def cmd_pipeline(config: ExperimentConfig, args, out_dir, manifest: RunManifest):
    instance = config.build_instance(args)
    certificate = config.get('certificate', {})
    radii = config.get('lelong', {}).get('radii')
    with manifest.stage("pipeline"):
        report = run_pipeline(
            instance,
            threads=args.threads,
            lelong_radii=radii,
            chart_radius=float(certificate.get('chart_radius', 0.25)),
            slack=float(certificate.get('slack', 1e-2)),
            boundary_weights=config.get('boundary_weights'),
        )
    payload = dict(report.to_dict(), experiment="pipeline", grid=instance.grid.describe())

    rows = sorted(report.rows, key=lambda row: -row["eps"])
    path = os.path.join(out_dir, "sweep.csv")
    flat = [{key: (";".join(map(str, value)) if isinstance(value, list) else value) for key, value in row.items()}
            for row in rows]
    manifest.record(announce(write_csv(flat, path), args.verbose))

    solved = [row for row in rows if "error" not in row]
    if solved:
        path = os.path.join(out_dir, "C_eps.dat")
        manifest.record(announce(write_plot_data(
            path, [row["eps"] for row in solved], [row["C_eps"] for row in solved], "eps C_eps"), args.verbose))
    for estimate in report.lelong:
        if "rows" not in estimate:
            continue
        path = os.path.join(out_dir, f"lelong_bump{estimate['bump_index']}.dat")
        manifest.record(announce(write_plot_data(
            path, [math.log(row["attained_radius"]) for row in estimate["rows"]], [row["M"] for row in estimate["rows"]],
            "log_r M(r)"), args.verbose))

    if "boundary_sweep" in report.audits:
        path = os.path.join(out_dir, "boundary_sweep.csv")
        manifest.record(announce(write_csv(report.audits["boundary_sweep"], path,
                                           columns=["tau", "budget_fraction", "C_eps"]), args.verbose))

    if report.solutions:
        eps = min(report.solutions)
        path = os.path.join(out_dir, "potential_smallest_eps.bin")
        for written in write_scalar_field(report.solutions[eps].potential, path, provenance={"eps": eps}):
            manifest.record(announce(written, args.verbose))

    smallest = min(instance.eps_schedule)
    certificates = [c for c in report.certificates if c["eps"] == smallest]
    failures = []
    if any("error" in row for row in report.rows if row["eps"] == smallest):
        failures.append("solve failed at the smallest eps")
    failures += [f"bump {c['bump_index']}: {c['reason']}" for c in certificates if not c["granted"]]
    if not instance.conforming:
        failures.append("condition (2) violated")
    if report.bound_checks.get("envelope_violations"):
        failures.append(f"{report.bound_checks['envelope_violations']} envelope violations")
    for estimate in report.lelong:
        if "error" in estimate:
            failures.append(f"lelong bump {estimate['bump_index']}: {estimate['message']}")
        elif instance.conforming and not estimate["meets_tau"]:
            failures.append(f"lelong bump {estimate['bump_index']}: slope {estimate['slope']:.3f} below tau - 0.05")
    payload["failures"] = failures
    payload["passed"] = not failures
    return _finish(manifest, out_dir, payload, EXIT_ASSERTION if failures else EXIT_OK, args.verbose)


#----------------------------------------------------------------
# identities
#----------------------------------------------------------------
def cmd_identities(config: ExperimentConfig, args, out_dir, manifest: RunManifest):
    n = config.dimension
    if n not in (2, 3):
        raise UnsupportedDimensionError(f"identity audits exist for n=2 and n=3, got n={n}")
    instance = config.build_instance(args)
    tolerance = float(config.get('tolerance', 1e-6))
    report = {"experiment": "identities", "dimension": n, "grid": instance.grid.describe(), "tolerance": tolerance}

    with manifest.stage("identities"):
        if n == 2:
            audits = [n2_identity_audit(instance, eps) for eps in instance.eps_schedule]
            report["audits"] = audits
            scale = max(1.0, max(abs(a["lhs"]) for a in audits))
            failures = [a["eps"] for a in audits
                        if a["omega_gauduchon_defect"] <= tolerance and a["discrepancy"] > tolerance * scale]
            rows = audits
        else:
            fit = n3_chain_fit(instance)
            report.update(fit)
            rows = fit["audits"]
            failures = [a["eps"] for a in rows
                        if a["est1_discrepancy"] > tolerance or a["stripped_discrepancy"] > tolerance]
            if not fit["bound_holds"]:
                failures.append("chain lower bound")
            if fit["identity_residual"] > tolerance * max(1.0, max(abs(a["int_beta_eps_cube"]) for a in rows)):
                failures.append("chain identity")

    path = os.path.join(out_dir, "audits.csv")
    manifest.record(announce(write_csv([{k: v for k, v in row.items() if not isinstance(v, (dict, list))}
                                        for row in rows], path), args.verbose))
    report["failures"] = failures
    report["passed"] = not failures
    return _finish(manifest, out_dir, report, EXIT_ASSERTION if failures else EXIT_OK, args.verbose)


#----------------------------------------------------------------
# ehrhart / morse
#----------------------------------------------------------------
def _lattice_failure(manifest, out_dir, report, error, verbose):
    report["error"] = {"type": type(error).__name__, "message": str(error)}
    logger.error(f"{AUDIT_INFO} {error}")
    return _finish(manifest, out_dir, report, EXIT_ASSERTION, verbose)


def cmd_ehrhart(config: ExperimentConfig, args, out_dir, manifest: RunManifest):
    polytope = config.build_polytope()
    k_max = int(config.get('k_max', 50))
    tolerance = float(config.get('tolerance', 0.01))
    report = {"experiment": "ehrhart", "polytope": polytope.describe()}
    try:
        with manifest.stage("ehrhart"):
            fit = rr_leading_fit(polytope, k_max, tolerance=tolerance)
            if config.get('tau') is not None:
                report["case_ii"] = case_ii_audit(
                    polytope, config.get('tau'), float(config.get('delta', 0.0)),
                    omega_volume=config.get('omega_volume'), k_max=k_max)
    except (FitError, EnumerationBudgetError) as error:
        return _lattice_failure(manifest, out_dir, report, error, args.verbose)

    path = os.path.join(out_dir, "counts.csv")
    manifest.record(announce(write_csv(fit["rows"], path, columns=["k", "count", "fitted", "residual"]), args.verbose))
    report["rr_fit"] = {key: value for key, value in fit.items() if key != "rows"}
    passed = fit["within_tolerance"] and report.get("case_ii", {}).get("passed") is not False
    report["passed"] = bool(passed)
    return _finish(manifest, out_dir, report, EXIT_OK if passed else EXIT_ASSERTION, args.verbose)


def cmd_morse(config: ExperimentConfig, args, out_dir, manifest: RunManifest):
    spec = config.build_morse_spec()
    k_values = config.get('morse', {}).get('k_values', MORSE_K_VALUES)
    report = {"experiment": "morse", "dimension": spec.dimension, "amplitude": spec.amplitude, "width": spec.width}
    try:
        with manifest.stage("morse"):
            restricted, total = curvature_integrals(spec)
            rows = [morse_upper_bound(spec, k) for k in k_values]
            if 'polytope' in config.raw and config.get('tau') is not None:
                report["case_ii"] = case_ii_audit(
                    config.build_polytope(), config.get('tau'), float(config.get('delta', 0.0)),
                    omega_volume=config.get('omega_volume'), morse_spec=spec,
                    k_max=int(config.get('k_max', 50)))
    except (FitError, EnumerationBudgetError) as error:
        return _lattice_failure(manifest, out_dir, report, error, args.verbose)

    # c_1(O(1))^n has total mass 1 for every weight; the X(0) part dominates it
    leading = 1.0 / math.factorial(spec.dimension)
    checks = {
        "integral_X0": restricted,
        "integral_total": total,
        "total_is_one": bool(abs(total - 1.0) <= 1e-6),
        "X0_dominates": bool(restricted >= total - 1e-8),
        "rr_leading": leading,
        "morse_leading": restricted / math.factorial(spec.dimension),
    }
    path = os.path.join(out_dir, "morse_bounds.csv")
    table = [{"k": r["k"], "bound": r["bound"], "exact_count": r["exact_count"]} for r in rows]
    manifest.record(announce(write_csv(table, path, columns=["k", "bound", "exact_count"]), args.verbose))
    report["checks"] = checks
    passed = checks["total_is_one"] and checks["X0_dominates"] and report.get("case_ii", {}).get("passed") is not False
    report["passed"] = bool(passed)
    return _finish(manifest, out_dir, report, EXIT_OK if passed else EXIT_ASSERTION, args.verbose)


SUBCOMMANDS = {
    'bump-check': cmd_bump_check,
    'solve': cmd_solve,
    'pipeline': cmd_pipeline,
    'identities': cmd_identities,
    'ehrhart': cmd_ehrhart,
    'morse': cmd_morse,
}


def run_experiment(subcommand, config: ExperimentConfig, args, out_dir):
    if config.experiment != subcommand:
        raise InputError(f"config is for experiment '{config.experiment}', not '{subcommand}'")
    ensure_dir(out_dir)
    manifest = RunManifest(config, args.seed, out_dir)
    return SUBCOMMANDS[subcommand](config, args, out_dir, manifest)
