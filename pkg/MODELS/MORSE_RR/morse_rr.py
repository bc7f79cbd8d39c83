"""
Section counting for the projective/toric case: dim H^0(X, L^k) = #(kP cap Z^n) for lattice
polytopes, leading-coefficient fits against the Riemann-Roch volume, and the holomorphic Morse
bound k^n/n! int_{X(0)} c_1(L, h)^n for radially twisted metrics on O(1) over CP^n.
---
Torus Monge-Ampere laboratory
"""

import math
import logging
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate as sp_integrate
from scipy.optimize import brentq
from scipy.spatial import ConvexHull, Delaunay

from LAB_HELPERS.LAB_constants import AUDIT_INFO, MORSE_EIGEN_THRESHOLD, MORSE_INFO
from LAB_HELPERS.LAB_errors import (
    AccuracyError, EnumerationBudgetError, FitError, InputError, UnsupportedDimensionError,
)
from MODELS.HELPERS.Utils import ols_fit

logger = logging.getLogger("MORSE-RR")

ENUMERATION_BUDGET = 50_000_000
MIN_K_MAX = 8


"""----------------------------------------------------------------------
LATTICE POLYTOPES
"""
class LatticePolytope:
    """Convex hull of integer vertices in Z^n (n <= 3), stored as A x <= b."""

    def __init__(self, vertices):
        vertices = np.asarray(vertices, dtype=float)
        if vertices.ndim != 2 or vertices.shape[0] == 0:
            raise InputError("vertices must be a non-empty list of points")
        if not np.allclose(vertices, np.round(vertices)):
            raise InputError("vertices must be lattice points")
        self.vertices = np.round(vertices).astype(np.int64)
        self.dimension = self.vertices.shape[1]
        if not 1 <= self.dimension <= 3:
            raise UnsupportedDimensionError(f"lattice polytopes are supported for n <= 3, got n = {self.dimension}")

        if self.dimension == 1:
            lo, hi = float(self.vertices.min()), float(self.vertices.max())
            if hi <= lo:
                raise InputError("polytope is not full-dimensional")
            self.A = np.array([[1.0], [-1.0]])
            self.b = np.array([hi, -lo])
            self._volume = hi - lo
        else:
            try:
                hull = ConvexHull(self.vertices.astype(float))
            except Exception as error:
                raise InputError(f"polytope is not full-dimensional: {error}")
            self.A = hull.equations[:, :-1]
            self.b = -hull.equations[:, -1]
            self._volume = float(hull.volume)
        if not self._volume > 0:
            raise InputError("polytope has zero volume")

    @classmethod
    def from_file(cls, path):
        """Plain-text vertex list: one vertex per line, comma or whitespace separated, '#' comments."""
        rows = []
        with open(path, "r") as file:
            for line in file:
                line = line.split("#", 1)[0].strip()
                if line:
                    rows.append([int(token) for token in line.replace(",", " ").split()])
        return cls(rows)

    @classmethod
    def unit_simplex(cls, n):
        return cls(np.vstack([np.zeros(n, dtype=int), np.eye(n, dtype=int)]))

    @classmethod
    def unit_cube(cls, n):
        return cls(np.array(list(np.ndindex(*(2,) * n))))

    @property
    def volume(self):
        return self._volume

    @property
    def normalized_volume(self):
        return math.factorial(self.dimension) * self._volume

    def simplex_volume(self):
        """Volume by Delaunay simplex decomposition, independent of the hull volume."""
        if self.dimension == 1:
            return float(self.vertices.max() - self.vertices.min())
        triangulation = Delaunay(self.vertices.astype(float))
        total = 0.0
        for simplex in triangulation.simplices:
            points = triangulation.points[simplex]
            total += abs(np.linalg.det(points[1:] - points[0]))
        return total / math.factorial(self.dimension)

    def bounding_box(self, k=1):
        return k * self.vertices.min(axis=0), k * self.vertices.max(axis=0)

    def contains(self, points, k=1, abs_tol=None):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        abs_tol = 1e-9 * (1 + k) if abs_tol is None else abs_tol
        return np.all(points @ self.A.T <= k * self.b + abs_tol, axis=1)

    def describe(self):
        return {
            "dimension": self.dimension,
            "vertices": self.vertices.tolist(),
            "volume": self.volume,
            "normalized_volume": self.normalized_volume,
        }


def count_sections(P: LatticePolytope, k, budget=ENUMERATION_BUDGET):
    """Exact #(kP cap Z^n) by enumeration over the bounding box."""
    k = int(k)
    if k < 0:
        raise InputError(f"k must be >= 0, got {k}")
    if k == 0:
        return 1
    lo, hi = P.bounding_box(k)
    sides = hi - lo + 1
    if float(np.prod(sides.astype(float))) > budget:
        raise EnumerationBudgetError(f"bounding box of {k}P has {int(np.prod(sides.astype(float)))} points, budget {budget}")

    if P.dimension == 1:
        return int(hi[0] - lo[0] + 1)

    # slice along the first axis, vectorized over the remaining ones
    rest = np.stack(np.meshgrid(*[np.arange(lo[a], hi[a] + 1) for a in range(1, P.dimension)],
                                indexing="ij"), axis=-1).reshape(-1, P.dimension - 1)
    count = 0
    for x0 in range(lo[0], hi[0] + 1):
        points = np.hstack([np.full((rest.shape[0], 1), x0), rest])
        count += int(np.count_nonzero(P.contains(points, k)))
    return count


def rr_leading_fit(P: LatticePolytope, k_max, tolerance=0.01, budget=ENUMERATION_BUDGET):
    """
    Fits #(kP cap Z^n) = sum_i c_i k^i (degree n) over k = 1..k_max and compares c_n with vol(P).
    """
    if k_max < MIN_K_MAX:
        raise FitError(f"k_max must be >= {MIN_K_MAX} for a conditioned fit, got {k_max}")
    n = P.dimension
    ks = np.arange(1, k_max + 1)
    counts = np.array([count_sections(P, k, budget) for k in ks], dtype=float)

    # scaled powers keep the design well conditioned
    scaled = ks / float(k_max)
    design = np.stack([scaled ** (n - i) for i in range(n + 1)], axis=1)
    fit = ols_fit(design, counts)
    coefficients = fit["params"] / np.array([float(k_max) ** (n - i) for i in range(n + 1)])
    leading = float(coefficients[0])
    fitted = design @ fit["params"]

    differences = np.diff(counts, n=n + 1)
    relative_error = abs(leading - P.volume) / P.volume
    report = {
        "dimension": n,
        "k_max": int(k_max),
        "leading_coefficient": leading,
        "coefficients": [float(c) for c in coefficients],
        "volume": P.volume,
        "relative_error": relative_error,
        "within_tolerance": bool(relative_error <= tolerance),
        "tolerance": tolerance,
        "normalized_leading": leading * math.factorial(n),
        "simplex_normalized_volume": P.simplex_volume() * math.factorial(n),
        "max_lower_order_residual": float(np.max(np.abs(counts - leading * ks ** n))),
        "ehrhart_difference_max": float(np.max(np.abs(differences))) if differences.size else 0.0,
        "condition_number": fit["condition_number"],
        "rows": [
            {"k": int(k), "count": int(c), "fitted": float(f), "residual": float(c - f)}
            for k, c, f in zip(ks, counts, fitted)
        ],
    }
    logger.info(f"{AUDIT_INFO} leading coefficient {leading:.8g} vs volume {P.volume:.8g} (k_max={k_max})")
    return report


"""----------------------------------------------------------------------
RADIAL METRICS ON O(1) OVER CP^n
"""
@dataclass(frozen=True)
class RadialMetricSpec:
    """
    Weight u(s) = 1/2 log(1 + s) + amplitude exp(-s / width), s = |z|^2, in the affine chart of CP^n;
    the curvature of O(1) is ddbar u.
    """
    dimension: int = 1
    amplitude: float = 0.0
    width: float = 0.1

    def __post_init__(self):
        if self.dimension < 1:
            raise InputError("dimension must be >= 1")
        if not self.width > 0:
            raise InputError(f"twist width must be positive, got {self.width}")

    def first(self, s):
        return 0.5 / (1 + s) - (self.amplitude / self.width) * np.exp(-s / self.width)

    def second(self, s):
        return -0.5 / (1 + s) ** 2 + (self.amplitude / self.width ** 2) * np.exp(-s / self.width)

    def eigenvalues(self, s):
        """Tangential eigenvalue u' (multiplicity n-1) and radial eigenvalue u' + s u''."""
        d1 = self.first(s)
        return d1, d1 + s * self.second(s)

    def density(self, s):
        """c_1^n density against Lebesgue measure in the chart."""
        n = self.dimension
        tangential, radial = self.eigenvalues(s)
        return math.factorial(n) * (2 / np.pi) ** n * tangential ** (n - 1) * radial

    def in_X0(self, s):
        tangential, radial = self.eigenvalues(s)
        ok = radial >= MORSE_EIGEN_THRESHOLD
        if self.dimension > 1:
            ok = ok & (tangential >= MORSE_EIGEN_THRESHOLD)
        return ok


def _radial_measure(n, s):
    # Lebesgue measure of C^n in s = |z|^2
    return np.pi ** n / math.factorial(n - 1) * s ** (n - 1)


def _sign_changes(func, upper, samples=4001):
    grid = np.concatenate([[0.0], np.geomspace(1e-9, upper, samples)])
    values = func(grid)
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if fa == 0:
            roots.append(float(a))
        elif fa * fb < 0:
            roots.append(brentq(func, a, b, xtol=1e-14))
    return roots


def _quad(func, lower, upper, points=None, abs_tol=1e-9):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if points:
            value, error = sp_integrate.quad(func, lower, upper, points=points, limit=500,
                                             epsabs=1e-12, epsrel=1e-11)
        else:
            value, error = sp_integrate.quad(func, lower, upper, limit=500, epsabs=1e-12, epsrel=1e-11)
    if error > abs_tol or any(issubclass(w.category, sp_integrate.IntegrationWarning) for w in caught):
        raise AccuracyError(f"radial quadrature did not converge (abserr {error:.2e})")
    return value


def curvature_integrals(spec: RadialMetricSpec):
    """(int over X(0) of c_1^n, int over CP^n of c_1^n) by radial quadrature."""
    n = spec.dimension
    split = max(50.0 * spec.width, 10.0)
    breaks = _sign_changes(lambda s: spec.eigenvalues(s)[1], split)
    if n > 1:
        breaks += _sign_changes(lambda s: spec.eigenvalues(s)[0], split)
    breaks = sorted(b for b in set(breaks) if 0 < b < split)

    def full(s):
        return float(spec.density(s) * _radial_measure(n, s))

    def positive_part(s):
        return full(s) if bool(spec.in_X0(s)) else 0.0

    total = _quad(full, 0.0, split, breaks) + _quad(full, split, np.inf)
    restricted = _quad(positive_part, 0.0, split, breaks) + _quad(positive_part, split, np.inf)
    return restricted, total


def morse_upper_bound(spec: RadialMetricSpec, k):
    k = int(k)
    if k < 0:
        raise InputError(f"k must be >= 0, got {k}")
    n = spec.dimension
    restricted, total = curvature_integrals(spec)
    bound = k ** n / math.factorial(n) * restricted
    report = {
        "dimension": n,
        "k": k,
        "amplitude": spec.amplitude,
        "width": spec.width,
        "integral_X0": restricted,
        "integral_total": total,
        "bound": bound,
        "exact_count": math.comb(k + n, n),
    }
    logger.info(f"{MORSE_INFO} k={k}: bound {bound:.6g} vs dim H0(O(k)) = {report['exact_count']}")
    return report


"""----------------------------------------------------------------------
CASE (ii) ARITHMETIC
"""
def case_ii_audit(P: LatticePolytope, tau: Sequence[float], delta, omega_volume=None, morse_spec=None,
                  k_max=50, ell=1, tolerance=0.02):
    """
    From dim H^0 ~ l^n k^n / n! int beta^n (fitted) and int beta^n <= C (sum tau^n + delta int omega^n),
    reports the implied lower bound on C_eps. int omega^n defaults to int beta^n.
    """
    if delta < 0:
        raise InputError(f"delta must be >= 0, got {delta}")
    n = P.dimension
    fit = rr_leading_fit(P, k_max)
    beta_volume = math.factorial(n) * fit["leading_coefficient"] / ell ** n
    omega_volume = beta_volume if omega_volume is None else float(omega_volume)
    weight_sum = float(sum(t ** n for t in tau))
    denominator = weight_sum + delta * omega_volume
    if not denominator > 0:
        raise InputError("sum tau^n + delta int omega^n must be positive")
    implied = beta_volume / denominator
    within_budget = denominator <= beta_volume * (1 + 1e-12)
    report = {
        "dimension": n,
        "ell": ell,
        "int_beta_n": beta_volume,
        "int_omega_n": omega_volume,
        "sum_tau_n": weight_sum,
        "delta": delta,
        "implied_C_lower": implied,
        "within_budget": bool(within_budget),
        "tolerance": tolerance,
        "passed": bool(implied >= 1 - tolerance) if within_budget else None,
        "rr_fit": {key: value for key, value in fit.items() if key != "rows"},
    }

    if morse_spec is not None:
        if morse_spec.dimension != n:
            raise InputError("Morse model dimension differs from the polytope dimension")
        restricted, _ = curvature_integrals(morse_spec)
        simplex = rr_leading_fit(LatticePolytope.unit_simplex(n), k_max)
        morse_leading = restricted / math.factorial(n)
        report["morse_sandwich"] = {
            "morse_leading": morse_leading,
            "rr_leading": simplex["leading_coefficient"],
            "consistent": bool(morse_leading >= simplex["leading_coefficient"] * (1 - tolerance)),
        }
    return report
