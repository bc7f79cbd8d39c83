import math

import numpy as np
import pytest

from Hyperparameters import default_hyperparameters
from LAB_HELPERS.LAB_errors import InputError, RegionError
from LAB_HELPERS.LAB_io import save_json
from MODELS.CALCULUS.complex_calculus import (
    Form11, FormClassSpec, PeriodicGrid, ScalarField, sample_chart_function, trig_field,
)
from MODELS.PIPELINE.theorem_pipeline import (
    BallRegion, TheoremInstance, budget_boundary_sweep, comparison_verify, default_lelong_radii, envelope_bounds,
    lelong_estimate, n2_identity_audit, n3_chain_fit, pole_certificate, run_pipeline, run_sweep,
)
from MODELS.SINGULARITY.singularity_forms import BumpSpec


def instance_n1(tau, schedule, m=256, delta=0.1):
    grid = PeriodicGrid(1, m)
    return TheoremInstance(
        beta=FormClassSpec(np.eye(1)),
        omega=Form11.constant(grid, np.eye(1)),
        bumps=[BumpSpec((0.5, 0.5), schedule[0], tau)],
        delta=delta,
        eps_schedule=schedule,
        args=default_hyperparameters(1, resolution=m),
    )


def test_instance_validation():
    with pytest.raises(InputError):
        instance_n1(0.5, [1 / 16, 1 / 8])
    with pytest.raises(InputError):
        instance_n1(0.5, [1 / 8], delta=0.0)
    instance = instance_n1(0.5, [1 / 8])
    assert instance.conforming
    assert instance.volume_budget == pytest.approx(2 / math.pi)
    assert not instance_n1(1.0, [1 / 8]).conforming


def test_sweep_n1():
    instance = instance_n1(0.5, [1 / 8, 1 / 16])
    report = run_sweep(instance, threads=2)
    assert [row["eps"] for row in report.rows] == [1 / 8, 1 / 16]
    for row in report.rows:
        assert row["oracle_rel_error"] < 1e-7
        assert row["envelope_ok"]
        assert row["lower_env"] <= row["C_eps"] <= row["upper_env"]
        assert row["max_point_diagonal_ok"]
    assert report.bound_checks["envelope_violations"] == 0
    assert report.bound_checks["threshold"]["passed"]
    assert report.flags == []


def test_envelope_bounds_n1():
    instance = instance_n1(0.5, [1 / 16])
    envelope = envelope_bounds(instance, 1 / 16)
    assert envelope["C_hat"] == pytest.approx(1 + 1 / 16)
    assert envelope["upper"] == pytest.approx((1 + 1 / 16) / 0.1)
    assert envelope["lower"] == pytest.approx(envelope["c_hat"] * (1 / 16) ** 3)


def test_budget_boundary_sweep_n1():
    instance = instance_n1(0.5, [1 / 16])
    rows = budget_boundary_sweep(instance, 1 / 16, [0.2, 0.4, 0.6])
    constants = [row["C_eps"] for row in rows]
    assert constants[0] > constants[1] > constants[2]
    assert rows[2]["budget_fraction"] == pytest.approx(0.6 * math.pi / 2)
    for row in rows:
        expected = (1 + 1 / 16) * 2 / math.pi / (row["tau"] + 0.1 * 2 / math.pi)
        assert row["C_eps"] == pytest.approx(expected, rel=1e-2)
    with pytest.raises(InputError):
        budget_boundary_sweep(TheoremInstance(
            beta=instance.beta, omega=instance.omega, bumps=[], delta=0.1, eps_schedule=[1 / 16],
            args=instance.args), 1 / 16, [0.2])


@pytest.fixture(scope="module")
def certificate_run():
    instance = instance_n1(0.5, [1 / 16], m=512)
    report = run_sweep(instance)
    return instance, report.solutions[1 / 16]


def test_pole_certificate_granted_n1(certificate_run):
    instance, solution = certificate_run
    certificate = pole_certificate(instance, 1 / 16, solution, 0)
    assert certificate["granted"], certificate["reason"]
    assert certificate["violations"] == 0
    assert certificate["comparison"]["hypotheses"]["boundary_order"]
    assert certificate["comparison"]["hypotheses"]["ma_order"]
    assert math.isfinite(certificate["C2"])


def test_lelong_slope_of_solved_potential(certificate_run):
    instance, solution = certificate_run
    radii = default_lelong_radii(instance.grid, 1 / 16)
    assert radii[-1] == pytest.approx(1 / 16)
    estimate = lelong_estimate(solution.potential, (0.5, 0.5), radii)
    # outside the core the solution is C tau log r plus a smooth part
    assert estimate["slope"] >= 0.5 - 0.05
    assert estimate["slope"] == pytest.approx(solution.constant * 0.5, abs=0.05)
    assert estimate["curvature"] < 0


def test_pole_certificate_region_error(certificate_run):
    instance, solution = certificate_run
    certificate = pole_certificate(instance, 1 / 16, solution, 3)
    assert not certificate["granted"]
    assert certificate["reason"].startswith("region error")
    far = pole_certificate(instance, 1 / 16, solution, 0, center=(0.0, 0.0))
    assert not far["granted"]
    assert far["reason"].startswith("region error")


def test_pole_certificate_declined_over_budget():
    instance = instance_n1(1.0, [1 / 16])
    solution = run_sweep(instance).solutions[1 / 16]
    certificate = pole_certificate(instance, 1 / 16, solution, 0)
    assert not certificate["granted"]
    assert "condition (2) violated" in certificate["reason"]


def test_comparison_verify_outcomes():
    grid = PeriodicGrid(1, 64)
    region = BallRegion((0.5, 0.5), 0.25)
    ones = ScalarField.constant(grid, 1.0)
    zeros = ScalarField.zeros(grid)
    # boundary hypothesis violated
    rejected = comparison_verify(zeros, ones, region, ma_u=zeros, ma_v=zeros)
    assert rejected["status"] == "rejected"
    passed = comparison_verify(ones, zeros, region, ma_u=zeros, ma_v=zeros)
    assert passed["status"] == "pass"
    assert passed["worst_slack"] == pytest.approx(1.0)
    with pytest.raises(RegionError):
        comparison_verify(ones, zeros, BallRegion((0.5, 0.5), 0.02))
    with pytest.raises(RegionError):
        comparison_verify(ones, zeros, BallRegion((0.5, 0.5), 0.5))


def test_lelong_slope_of_fubini_study_pole():
    grid = PeriodicGrid(1, 256)
    # (n + 1) times the Fubini-Study weight on CP^1, seen from the pole chart
    potential = sample_chart_function(grid, (0.5, 0.5), lambda r: 2 * np.log(r) - np.log(1 + r ** 2))
    radii = list(np.geomspace(0.1, 0.016, 5))
    estimate = lelong_estimate(potential, (0.5, 0.5), radii)
    assert abs(estimate["slope"] - 2.0) < 0.02
    assert len(estimate["rows"]) == 5


def test_lelong_slope_of_smooth_potential():
    grid = PeriodicGrid(1, 256)
    smooth = trig_field(grid, [
        {"amplitude": 1.0, "wavevector": [1, 0], "phase": -math.pi},
        {"amplitude": 1.0, "wavevector": [0, 1], "phase": -math.pi},
    ])
    estimate = lelong_estimate(smooth, (0.5, 0.5), list(np.geomspace(0.05, 0.016, 4)))
    assert abs(estimate["slope"]) < 0.2


def test_lelong_input_errors():
    grid = PeriodicGrid(1, 64)
    potential = ScalarField.zeros(grid)
    with pytest.raises(InputError):
        lelong_estimate(potential, (0.5, 0.5), [0.1])
    with pytest.raises(InputError):
        lelong_estimate(potential, (0.5, 0.5), [0.1, 0.2])
    with pytest.raises(InputError):
        lelong_estimate(potential, (0.5, 0.5), [0.3, 0.2, 0.1])
    with pytest.raises(InputError):
        lelong_estimate(potential, (0.5, 0.5), [0.3, 0.2, 0.25, 0.1])
    with pytest.raises(InputError):
        lelong_estimate(potential, (0.5, 0.5), [0.3, 0.2, 0.1, 0.03])
    with pytest.raises(InputError):
        default_lelong_radii(grid, 0.45)
    radii = default_lelong_radii(grid, 1 / 8)
    assert len(radii) == 5
    assert radii[0] == pytest.approx(0.25)
    assert radii[-1] == pytest.approx(1 / 8)


def test_n2_identity_and_gauduchon_defect(grid2):
    s = trig_field(grid2, [{"amplitude": 0.5, "wavevector": [1, 0, 0, 0]}])
    psi = trig_field(grid2, [{"amplitude": 0.05, "wavevector": [1, 0, 0, 0]}])
    flat = TheoremInstance(
        beta=FormClassSpec(np.eye(2)), omega=Form11.constant(grid2, np.eye(2)),
        bumps=[], delta=0.1, eps_schedule=[0.1], args=default_hyperparameters(2, resolution=16),
    )
    audit = n2_identity_audit(flat, 0.1, potential=psi)
    assert audit["discrepancy"] < 1e-12
    assert audit["omega_gauduchon_defect"] < 1e-12

    twisted = TheoremInstance(
        beta=FormClassSpec(np.eye(2)),
        omega=Form11.diagonal(grid2, [ScalarField.constant(grid2, 1.0), 1.0 + s]),
        bumps=[], delta=0.1, eps_schedule=[0.1], args=default_hyperparameters(2, resolution=16),
    )
    audit = n2_identity_audit(twisted, 0.1, potential=psi)
    assert audit["omega_gauduchon_defect"] > 1e-3
    assert audit["discrepancy"] > 1e-4
    # without a potential the identity is algebraic
    assert n2_identity_audit(twisted, 0.1)["discrepancy"] < 1e-12


def test_pipeline_non_conforming_n1():
    instance = instance_n1(1.0, [0.2, 0.125], m=128)
    report = run_pipeline(instance)
    assert "condition_2_violated" in report.flags
    assert report.certificates
    assert all(not c["granted"] for c in report.certificates)
    assert report.bound_checks["threshold"]["passed"] is None
    payload = report.to_dict()
    assert "solutions" not in payload


@pytest.mark.slow
def test_n3_chain_audit():
    grid = PeriodicGrid(3, 8, 'spectral')
    beta_potential = trig_field(grid, [{"amplitude": 0.01, "wavevector": [1, 0, 0, 0, 0, 0]}])
    instance = TheoremInstance(
        beta=FormClassSpec(np.eye(3), beta_potential),
        omega=Form11.constant(grid, np.eye(3)),
        bumps=[], delta=0.5, eps_schedule=[0.2, 0.1, 0.05],
        args=default_hyperparameters(3, resolution=8, stencil='spectral', tol=1e-10),
    )
    fit = n3_chain_fit(instance)
    for audit in fit["audits"]:
        assert audit["est1_discrepancy"] < 1e-6
        assert audit["stripped_discrepancy"] < 1e-6
        assert audit["expansion_discrepancy"] < 1e-6
        assert audit["lower_bound_holds"]
    assert fit["bound_holds"]
    assert fit["identity_residual"] < 1e-6
    omega_cube = 6 * (2 / math.pi) ** 3
    for audit in fit["audits"]:
        eps = audit["eps"]
        assert audit["measured_deficit"] == pytest.approx(omega_cube * (3 * eps ** 2 + 2 * eps ** 3), rel=1e-6)
    # local exponents of 3 eps^2 + 2 eps^3 lie between 2.03 and 2.12 on this schedule
    assert 2.0 <= fit["deficit_fit"]["exponent"] <= 2.15


def test_pipeline_reports_are_deterministic(tmp_path):
    paths = []
    for run in range(2):
        report = run_pipeline(instance_n1(0.5, [0.2, 0.125], m=128), threads=2, boundary_weights=[0.3])
        paths.append(save_json(report.to_dict(), str(tmp_path / f"report_{run}.json")))
    with open(paths[0], "rb") as first, open(paths[1], "rb") as second:
        assert first.read() == second.read()


@pytest.mark.slow
def test_pipeline_n2_conforming_reduced():
    grid = PeriodicGrid(2, 24, 'spectral')
    schedule = [0.2, 1 / 6]
    instance = TheoremInstance(
        beta=FormClassSpec(np.eye(2)),
        omega=Form11.constant(grid, np.eye(2)),
        bumps=[BumpSpec((0.5,) * 4, schedule[0], 0.5)],
        delta=0.1,
        eps_schedule=schedule,
        args=default_hyperparameters(2, resolution=24, stencil='spectral'),
    )
    assert instance.conforming
    report = run_pipeline(instance, threads=2, chart_radius=0.45)

    # C_eps against the wedge-integral ratio, and C_eps >= 1 under condition (2)
    assert [row["eps"] for row in report.rows] == schedule
    for row in report.rows:
        assert row["oracle_rel_error"] < 1e-4
        assert row["C_eps"] >= 1.0
        assert row["envelope_ok"]
    assert report.bound_checks["threshold"]["passed"]

    assert len(report.certificates) == 2
    for certificate in report.certificates:
        assert certificate["granted"], certificate["reason"]
        assert certificate["violations"] == 0
        assert certificate["comparison"]["hypotheses"]["ma_order"]

    (estimate,) = report.lelong
    assert estimate["eps"] == 1 / 6
    assert estimate["meets_tau"]
    assert estimate["slope"] >= 0.5 - 0.05
    assert max(audit["discrepancy"] for audit in report.audits["n2_identity"]) < 1e-10
