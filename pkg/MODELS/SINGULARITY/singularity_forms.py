"""
The convex cutoff chi and the regularized log-singularity forms gamma = ddbar chi(log(|z - x_j| / eps)).

With s = |z|^2 the complex Hessian of chi(log(r/eps)) is
    chi'/(2s) delta_jk + (chi''/4 - chi'/2) zbar_j z_k / s^2,
with eigenvalues chi'/(2s) (multiplicity n-1) and chi''/(4s) along zbar, so the top power
has density n! (2/pi)^n chi'^(n-1) chi'' / (2^(n+1) s^n), supported on eps/e <= r <= eps,
and the mass inside radius r telescopes to chi'(log(r/eps))^n.
---
Torus Monge-Ampere laboratory
"""

import math
import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy import integrate as sp_integrate

from LAB_HELPERS.LAB_constants import MIN_BUMP_CELLS, MAX_BUMP_RADIUS
from LAB_HELPERS.LAB_errors import ChartError, InputError
from MODELS.CALCULUS.complex_calculus import (
    Form11, ScalarField, density_factor, integrate, top_power,
)

logger = logging.getLogger("SINGULARITY")


"""----------------------------------------------------------------------
CUTOFF PROFILE
"""
class ChiProfile:
    """
    C^2 convex increasing cutoff: chi(t) = t for t >= 0, chi(t) = -1/2 for t <= -1,
    chi'' = -6 t (t + 1) on [-1, 0].
    """
    name = "cubic-quartic"

    def value(self, t):
        t = np.asarray(t, dtype=float)
        u = np.clip(t + 1.0, 0.0, 1.0)
        inner = u ** 3 - 0.5 * u ** 4 - 0.5
        return np.where(t >= 0, t, inner)

    def first(self, t):
        t = np.asarray(t, dtype=float)
        u = np.clip(t + 1.0, 0.0, 1.0)
        return 3 * u ** 2 - 2 * u ** 3

    def second(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t > -1.0) & (t < 0.0)
        return np.where(inside, -6.0 * t * (t + 1.0), 0.0)

    def __call__(self, t, order=0):
        if order == 0:
            return self.value(t)
        if order == 1:
            return self.first(t)
        if order == 2:
            return self.second(t)
        raise InputError(f"chi order must be 0, 1 or 2, got {order}")


DEFAULT_PROFILE = ChiProfile()


def chi_eval(t, order=0, profile=DEFAULT_PROFILE):
    result = profile(t, order)
    return float(result) if np.ndim(result) == 0 else result


"""----------------------------------------------------------------------
BUMP DATA
"""
@dataclass(frozen=True)
class BumpSpec:
    center: Tuple[float, ...]
    radius: float
    weight: float

    def __post_init__(self):
        object.__setattr__(self, 'center', tuple(float(c) for c in self.center))
        if not self.radius > 0:
            raise ChartError(f"bump radius must be positive, got {self.radius}")
        if not self.weight > 0:
            raise InputError(f"bump weight must be positive, got {self.weight}")

    def validate(self, grid):
        if len(self.center) != grid.real_dim:
            raise InputError(f"bump center needs {grid.real_dim} coordinates, got {len(self.center)}")
        if self.radius >= MAX_BUMP_RADIUS:
            raise ChartError(f"bump radius {self.radius} does not fit in one chart (needs < {MAX_BUMP_RADIUS})")
        if self.radius < MIN_BUMP_CELLS * grid.spacing - 1e-15:
            raise ChartError(
                f"bump radius {self.radius} is unresolved: needs >= {MIN_BUMP_CELLS} cells of {grid.spacing}"
            )
        return self

    def with_radius(self, radius):
        return BumpSpec(self.center, radius, self.weight)


def torus_distance(a, b):
    delta = np.mod(np.asarray(a, dtype=float) - np.asarray(b, dtype=float) + 0.5, 1.0) - 0.5
    return float(np.sqrt(np.sum(delta ** 2)))


def check_disjoint(bumps: Sequence[BumpSpec]):
    for i, a in enumerate(bumps):
        for b in bumps[i + 1:]:
            if torus_distance(a.center, b.center) <= a.radius + b.radius:
                raise ChartError(f"bump supports around {a.center} and {b.center} overlap")


"""----------------------------------------------------------------------
CLOSED-FORM GAMMA
"""
def _radial_terms(spec, grid, profile):
    offsets = grid.chart_offsets(spec.center)
    s = np.zeros(grid.shape)
    for d in offsets:
        s = s + d ** 2
    safe = np.where(s > 0, s, 1.0)
    t = 0.5 * np.log(safe) - math.log(spec.radius)
    d1 = np.where(s > 0, profile.first(t), 0.0)
    d2 = np.where(s > 0, profile.second(t), 0.0)
    return offsets, s, safe, d1, d2


def gamma_form(spec: BumpSpec, grid, profile=DEFAULT_PROFILE) -> Form11:
    spec.validate(grid)
    n = grid.complex_dim
    offsets, s, safe, d1, d2 = _radial_terms(spec, grid, profile)
    z = [offsets[j] + 1j * offsets[n + j] for j in range(n)]
    diag = d1 / (2 * safe)
    rank_one = (d2 / 4 - d1 / 2) / safe ** 2
    coeff = np.zeros(grid.shape + (n, n), dtype=complex)
    for j in range(n):
        for k in range(n):
            coeff[..., j, k] = rank_one * np.conj(z[j]) * z[k]
        coeff[..., j, j] += diag
    return Form11(grid, coeff)


def gamma_top_density(spec: BumpSpec, grid, profile=DEFAULT_PROFILE) -> ScalarField:
    spec.validate(grid)
    n = grid.complex_dim
    _, s, safe, d1, d2 = _radial_terms(spec, grid, profile)
    det = d1 ** (n - 1) * d2 / (2 ** (n + 1) * safe ** n)
    return ScalarField(grid, density_factor(n) * np.where(s > 0, det, 0.0))


def gamma_potential(spec: BumpSpec, grid, profile=DEFAULT_PROFILE, floor_radius=None) -> ScalarField:
    """chi(log(r/eps)) sampled in the chart of the bump center."""
    spec.validate(grid)
    radius = grid.chart_radius(spec.center)
    floor_radius = 0.5 * grid.spacing if floor_radius is None else floor_radius
    return ScalarField(grid, profile.value(np.log(np.maximum(radius, floor_radius) / spec.radius)))


def bump_rhs_density(bumps: Sequence[BumpSpec], grid, profile=DEFAULT_PROFILE) -> ScalarField:
    """Sum_j tau_j^n gamma_j^n."""
    check_disjoint(bumps)
    n = grid.complex_dim
    total = ScalarField.zeros(grid)
    for spec in bumps:
        total = total + spec.weight ** n * gamma_top_density(spec, grid, profile)
    return total


def gamma_mass(spec: BumpSpec, grid, profile=DEFAULT_PROFILE):
    return integrate(gamma_top_density(spec, grid, profile))


def gamma_radial_mass(radius, eps, n, profile=DEFAULT_PROFILE):
    """
    Mass of gamma^n inside |z| <= radius by the 1D reduction, n chi'^(n-1) chi'' dt
    integrated up to log(radius/eps). Returns (quadrature value, closed form chi'^n).
    """
    t_max = math.log(radius / eps) if radius > 0 else -np.inf
    closed = float(profile.first(t_max)) ** n if np.isfinite(t_max) else 0.0
    upper = min(t_max, 0.0)
    if upper <= -1.0:
        return 0.0, closed
    value, _ = sp_integrate.quad(
        lambda t: n * float(profile.first(t)) ** (n - 1) * float(profile.second(t)),
        -1.0, upper, epsabs=1e-13, epsrel=1e-12,
    )
    return value, closed


def cumulative_mass_profile(spec: BumpSpec, grid, radii, profile=DEFAULT_PROFILE):
    """Grid mass of gamma^n inside each radius, next to the telescoped value chi'(log(r/eps))^n."""
    density = gamma_top_density(spec, grid, profile)
    distance = grid.chart_radius(spec.center)
    rows = []
    for r in radii:
        inside = float(np.sum(density.values[distance <= r]) * grid.cell_volume)
        rows.append({
            "radius": float(r),
            "grid_mass": inside,
            "telescoped_mass": float(profile.first(math.log(r / spec.radius))) ** grid.complex_dim,
        })
    return rows


def dirac_pairing(spec: BumpSpec, grid, test_field: ScalarField, profile=DEFAULT_PROFILE):
    """(integral of g gamma^n, g(x_j)) for a smooth test field g; approaches equality as eps shrinks."""
    density = gamma_top_density(spec, grid, profile)
    paired = integrate(density * test_field)
    nearest = tuple(int(round(c * grid.resolution)) % grid.resolution for c in spec.center)
    return paired, float(test_field.values[nearest])


def gamma_sup_bound(spec: BumpSpec, grid, omega: Form11 = None, profile=DEFAULT_PROFILE):
    """C_hat = eps^(2n) max gamma^n / max omega^n (omega defaults to the identity metric)."""
    n = grid.complex_dim
    density = gamma_top_density(spec, grid, profile)
    if omega is None:
        omega_max = density_factor(n)
    else:
        omega_max = top_power(omega).sup()
    return spec.radius ** (2 * n) * density.sup() / omega_max
