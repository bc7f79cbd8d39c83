"""
Discrete calculus of real (1,1)-forms on the flat torus C^n/(Z^n + iZ^n).

A Form11 stores the coefficient matrix a_{jk} of (sqrt(-1)/pi) sum a_{jk} dz_j ^ dzbar_k,
so ddbar(phi) carries the complex Hessian d^2 phi / dz_j dzbar_k and the top-degree
density of a_1 ^ ... ^ a_n is n! (2/pi)^n D(a_1, ..., a_n).

Field layout: axes 0..n-1 are x_1..x_n, axes n..2n-1 are y_1..y_n, point i sits at i*h.
Every operator is shift invariant, so the periodic stencils are applied as Fourier
multipliers (exact application of the stencil, not an approximation of it).
---
Torus Monge-Ampere laboratory
"""

import math
import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from LAB_HELPERS.LAB_constants import POSITIVITY_MARGIN
from LAB_HELPERS.LAB_errors import InputError, GridMismatchError, UnsupportedDimensionError


STENCILS = ('central', 'spectral')


"""----------------------------------------------------------------------
GRID AND FIELDS
"""
@dataclass(frozen=True)
class PeriodicGrid:
    complex_dim: int
    resolution: int
    stencil: str = 'central'

    def __post_init__(self):
        if self.complex_dim < 1:
            raise InputError(f"complex_dim must be >= 1, got {self.complex_dim}")
        if self.resolution < 8 or self.resolution % 2 != 0:
            raise InputError(f"resolution must be even and >= 8, got {self.resolution}")
        if self.stencil not in STENCILS:
            raise InputError(f"Unknown stencil '{self.stencil}', expected one of {STENCILS}")

    @property
    def spacing(self):
        return 1.0 / self.resolution

    @property
    def real_dim(self):
        return 2 * self.complex_dim

    @property
    def shape(self):
        return (self.resolution,) * self.real_dim

    @property
    def num_points(self):
        return self.resolution ** self.real_dim

    @property
    def cell_volume(self):
        return self.spacing ** self.real_dim

    def with_stencil(self, stencil):
        return PeriodicGrid(self.complex_dim, self.resolution, stencil)

    def axis_coordinates(self, axis):
        # 1D coordinates reshaped to broadcast along `axis`
        return _along(np.arange(self.resolution) * self.spacing, axis, self.real_dim)

    def chart_offsets(self, center):
        """Nearest-image displacements z - center, one broadcastable array per real axis."""
        center = np.asarray(center, dtype=float)
        if center.shape != (self.real_dim,):
            raise InputError(f"center needs {self.real_dim} real coordinates, got {center.shape}")
        return [
            np.mod(self.axis_coordinates(a) - center[a] + 0.5, 1.0) - 0.5
            for a in range(self.real_dim)
        ]

    def chart_radius(self, center):
        offsets = self.chart_offsets(center)
        r2 = np.zeros(self.shape)
        for d in offsets:
            r2 = r2 + d ** 2
        return np.sqrt(r2)

    def describe(self):
        return {
            "complex_dim": self.complex_dim,
            "resolution": self.resolution,
            "spacing": self.spacing,
            "stencil": self.stencil,
        }


@dataclass(frozen=True)
class ScalarField:
    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise GridMismatchError(f"values shape {self.values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise InputError("ScalarField values must be finite at every grid point")

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid, value):
        return cls(grid, np.full(grid.shape, float(value)))

    def _other(self, other):
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise GridMismatchError("ScalarFields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - self._other(other))

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)

    def sup(self):
        return float(self.values.max())

    def inf(self):
        return float(self.values.min())

    def argmax(self):
        return np.unravel_index(int(np.argmax(self.values)), self.grid.shape)

    def argmin(self):
        return np.unravel_index(int(np.argmin(self.values)), self.grid.shape)

    def point(self, index):
        return np.asarray(index, dtype=float) * self.grid.spacing

    def normalized_sup(self):
        """Shift so that the maximum over the grid is exactly 0."""
        return ScalarField(self.grid, self.values - self.values.max())


@dataclass(frozen=True)
class Form11:
    grid: PeriodicGrid
    coeff: np.ndarray

    def __post_init__(self):
        n = self.grid.complex_dim
        if self.coeff.shape != self.grid.shape + (n, n):
            raise GridMismatchError(f"coeff shape {self.coeff.shape} does not match grid {self.grid.shape} x ({n},{n})")

    @classmethod
    def constant(cls, grid, matrix):
        matrix = hermitian_matrix(matrix, grid.complex_dim)
        # read-only broadcast view, no per-point storage
        return cls(grid, np.broadcast_to(matrix, grid.shape + matrix.shape))

    @classmethod
    def zeros(cls, grid):
        return cls.constant(grid, np.zeros((grid.complex_dim, grid.complex_dim)))

    @classmethod
    def diagonal(cls, grid, entries):
        """Diagonal form from a list of n entries, each a scalar or a real field array."""
        n = grid.complex_dim
        if len(entries) != n:
            raise InputError(f"expected {n} diagonal entries, got {len(entries)}")
        coeff = np.zeros(grid.shape + (n, n), dtype=complex)
        for j, e in enumerate(entries):
            coeff[..., j, j] = e.values if isinstance(e, ScalarField) else e
        return cls(grid, coeff)

    def _other(self, other):
        if other.grid != self.grid:
            raise GridMismatchError("Form11 objects live on different grids")
        return other.coeff

    def __add__(self, other):
        return Form11(self.grid, self.coeff + self._other(other))

    def __sub__(self, other):
        return Form11(self.grid, self.coeff - self._other(other))

    def __mul__(self, scalar):
        if isinstance(scalar, ScalarField):
            return Form11(self.grid, self.coeff * scalar.values[..., None, None])
        return Form11(self.grid, self.coeff * float(scalar))

    __rmul__ = __mul__

    def hermitian_defect(self):
        return float(np.max(np.abs(self.coeff - np.conj(np.swapaxes(self.coeff, -1, -2)))))

    def at(self, index):
        return np.array(self.coeff[tuple(index)])


@dataclass(frozen=True)
class FormClassSpec:
    """A representative constant_part + ddbar(potential) of a Bott-Chern class."""
    constant_part: np.ndarray
    potential: Optional[ScalarField] = None
    is_closed: bool = True

    def realize(self, grid):
        form = Form11.constant(grid, self.constant_part)
        if self.potential is not None:
            if self.potential.grid.shape != grid.shape:
                raise GridMismatchError("class potential sampled on a different grid")
            form = form + ddbar(ScalarField(grid, self.potential.values))
        return form

    def with_potential(self, potential):
        return FormClassSpec(self.constant_part, potential, self.is_closed)

    def is_kahler_constant(self):
        return self.potential is None and float(np.linalg.eigvalsh(self.constant_part)[0]) > 0


def hermitian_matrix(matrix, n):
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.shape != (n, n):
        raise InputError(f"expected a {n}x{n} matrix, got shape {matrix.shape}")
    if not np.allclose(matrix, matrix.conj().T, atol=1e-14):
        raise InputError("matrix is not Hermitian")
    return 0.5 * (matrix + matrix.conj().T)


"""----------------------------------------------------------------------
STENCIL SYMBOLS
"""
def _along(vector, axis, ndim):
    shape = [1] * ndim
    shape[axis] = -1
    return np.reshape(vector, shape)


@lru_cache(maxsize=None)
def _axis_symbols(m, stencil):
    k = np.fft.fftfreq(m, d=1.0 / m)
    theta = 2 * np.pi * k / m
    if stencil == 'central':
        first = 1j * m * np.sin(theta)
        second = -(2 * m * np.sin(theta / 2)) ** 2
    else:
        first = 2j * np.pi * k
        first[np.abs(k) == m // 2] = 0.0
        second = -(2 * np.pi * k) ** 2
    first.setflags(write=False)
    second.setflags(write=False)
    return first, second


def entry_symbol(grid, j, k, stencil=None):
    """Fourier symbol of d^2/dz_j dzbar_k = 1/4 (d_xj d_xk + d_yj d_yk + i d_xj d_yk - i d_yj d_xk)."""
    stencil = stencil or grid.stencil
    n, nd = grid.complex_dim, grid.real_dim
    first, second = _axis_symbols(grid.resolution, stencil)
    xj, yj, xk, yk = j, n + j, k, n + k
    if j == k:
        return 0.25 * (_along(second, xj, nd) + _along(second, yj, nd))
    d = lambda axis: _along(first, axis, nd)
    return 0.25 * (d(xj) * d(xk) + d(yj) * d(yk) + 1j * (d(xj) * d(yk) - d(yj) * d(xk)))


def laplace_symbol(grid, weights, stencil=None):
    """Symbol of sum_{jk} weights[k, j] d_j dbar_k for a constant Hermitian weight matrix."""
    n = grid.complex_dim
    total = np.zeros(grid.shape, dtype=complex)
    for j in range(n):
        for k in range(n):
            total = total + weights[k, j] * entry_symbol(grid, j, k, stencil)
    return total.real


"""----------------------------------------------------------------------
OPERATIONS
"""
def ddbar(phi: ScalarField, stencil=None) -> Form11:
    grid = phi.grid
    n = grid.complex_dim
    phi_hat = np.fft.fftn(phi.values)
    coeff = np.empty(grid.shape + (n, n), dtype=complex)
    for j in range(n):
        for k in range(j, n):
            entry = np.fft.ifftn(entry_symbol(grid, j, k, stencil) * phi_hat)
            if j == k:
                coeff[..., j, j] = entry.real
            else:
                coeff[..., j, k] = entry
                coeff[..., k, j] = np.conj(entry)
    return Form11(grid, coeff)


def ddbar_entry(values, grid, j, k, stencil=None):
    """The (j, kbar) Hessian entry of a real or complex field, as a complex array."""
    return np.fft.ifftn(entry_symbol(grid, j, k, stencil) * np.fft.fftn(values))


def mixed_det(matrices: Sequence[np.ndarray]):
    """
    Mixed determinant D(A_1, ..., A_n) by inclusion-exclusion polarization:
    D = 1/n! sum_{S subset [n]} (-1)^(n-|S|) det(sum_{i in S} A_i).
    Works pointwise on stacked arrays of shape (..., n, n).
    """
    if len(matrices) == 0:
        raise InputError("mixed_det needs at least one matrix")
    arrays = [np.asarray(a) for a in matrices]
    n = arrays[0].shape[-1]
    if len(arrays) != n:
        raise InputError(f"mixed_det of {n}x{n} matrices needs {n} arguments, got {len(arrays)}")
    for a in arrays:
        if a.shape[-2:] != (n, n):
            raise InputError(f"dimension mismatch in mixed_det: {a.shape[-2:]} vs {(n, n)}")
    if n == 1:
        return np.real(arrays[0][..., 0, 0])

    total = 0.0
    for size in range(1, n + 1):
        sign = (-1) ** (n - size)
        for subset in itertools.combinations(range(n), size):
            partial = arrays[subset[0]]
            for i in subset[1:]:
                partial = partial + arrays[i]
            total = total + sign * np.linalg.det(partial)
    return np.real(total) / math.factorial(n)


def density_factor(n):
    return math.factorial(n) * (2.0 / np.pi) ** n


def wedge_top(forms: Sequence[Form11]) -> ScalarField:
    if len(forms) == 0:
        raise InputError("wedge_top needs n forms")
    grid = forms[0].grid
    n = grid.complex_dim
    if len(forms) != n:
        raise InputError(f"wedge_top on a {n}-dimensional grid needs {n} forms, got {len(forms)}")
    for f in forms[1:]:
        if f.grid != grid:
            raise GridMismatchError("wedge_top forms live on different grids")
    density = density_factor(n) * mixed_det([f.coeff for f in forms])
    return ScalarField(grid, np.ascontiguousarray(np.broadcast_to(density, grid.shape), dtype=float))


def top_power(alpha: Form11) -> ScalarField:
    """alpha^n density, via a single determinant instead of the polarization sum."""
    n = alpha.grid.complex_dim
    det = np.real(np.linalg.det(alpha.coeff))
    return ScalarField(alpha.grid, density_factor(n) * np.ascontiguousarray(np.broadcast_to(det, alpha.grid.shape)))


def integrate(density: ScalarField) -> float:
    return float(np.sum(density.values) * density.grid.cell_volume)


def min_eigen_field(alpha: Form11) -> ScalarField:
    values = np.linalg.eigvalsh(alpha.coeff)[..., 0]
    return ScalarField(alpha.grid, np.ascontiguousarray(np.broadcast_to(values, alpha.grid.shape)))


def is_positive(alpha: Form11, margin=POSITIVITY_MARGIN):
    return min_eigen_field(alpha).inf() > margin


def adjugate(coeff):
    """Adjugate of stacked n x n matrices via signed minors (valid for singular matrices)."""
    n = coeff.shape[-1]
    if n == 1:
        return np.ones_like(coeff)
    adj = np.empty(coeff.shape, dtype=complex)
    for i in range(n):
        for j in range(n):
            minor = np.delete(np.delete(coeff, i, axis=-2), j, axis=-1)
            adj[..., j, i] = (-1) ** (i + j) * np.linalg.det(minor)
    return adj


def gauduchon_defect_field(omega: Form11):
    """Pointwise sum_{jk} d_j dbar_k adj(g)_{kj}: the density of ddbar(omega^{n-1}) against test functions."""
    grid = omega.grid
    n = grid.complex_dim
    if n < 2:
        raise UnsupportedDimensionError("the Gauduchon condition is vacuous for n = 1")
    adj = adjugate(np.ascontiguousarray(np.broadcast_to(omega.coeff, grid.shape + (n, n))))
    field = np.zeros(grid.shape, dtype=complex)
    for j in range(n):
        for k in range(n):
            field = field + ddbar_entry(adj[..., k, j], grid, j, k)
    return math.factorial(n - 1) * (2.0 / np.pi) ** n * field


def gauduchon_defect(omega: Form11) -> float:
    field = gauduchon_defect_field(omega)
    return float(np.sqrt(np.mean(np.abs(field) ** 2)))


"""----------------------------------------------------------------------
SAMPLING HELPERS
"""
def trig_field(grid, terms):
    """
    Trigonometric polynomial sum a cos(2 pi <k, x> + p). Each term is a dict with keys
    'amplitude', 'wavevector' (2n integers, x-axes first) and optional 'phase'.
    """
    values = np.zeros(grid.shape)
    for term in terms:
        wavevector = np.asarray(term['wavevector'], dtype=float)
        if wavevector.shape != (grid.real_dim,):
            raise InputError(f"wavevector needs {grid.real_dim} entries, got {wavevector.shape}")
        phase = np.zeros(grid.shape) + float(term.get('phase', 0.0))
        for a in range(grid.real_dim):
            if wavevector[a] != 0:
                phase = phase + 2 * np.pi * wavevector[a] * grid.axis_coordinates(a)
        values = values + float(term['amplitude']) * np.cos(phase)
    return ScalarField(grid, values)


def sample_chart_function(grid, center, func, floor_radius=None):
    """Samples func(|z - center|) in the chart around center; radii below floor_radius are clamped."""
    radius = grid.chart_radius(center)
    floor_radius = 0.5 * grid.spacing if floor_radius is None else floor_radius
    return ScalarField(grid, func(np.maximum(radius, floor_radius)))
