"""
Experiment configuration: JSON documents with an explicit schema version, validated before any
computation, and the run manifest written next to every report.
---
Torus Monge-Ampere laboratory
"""

import os
import sys
import json
import time
import hashlib
import platform
from contextlib import contextmanager

import numpy as np

from Hyperparameters import Hyperparameters, default_hyperparameters
from LAB_HELPERS.LAB_constants import SCHEMA_VERSION
from LAB_HELPERS.LAB_errors import ConfigSchemaError, InputError


EXPERIMENTS = ['bump-check', 'solve', 'pipeline', 'ehrhart', 'morse', 'identities']

# key -> (accepted types, required)
POTENTIAL_SCHEMA = {
    'file': ((str,), False),
    'trig': ((list,), False),
}
FORM_SCHEMA = {
    'matrix': ((list, dict), True),
    'potential': ((dict, type(None)), False),
    'is_closed': ((bool,), False),
}
BUMP_SCHEMA = {
    'center': ((list,), True),
    'weight': ((int, float), True),
    'radius': ((int, float), False),
}
GRID_SCHEMA = {
    'resolution': ((int,), False),
    'stencil': ((str,), False),
}
SOLVER_SCHEMA = {key: ((int, float), False) for key in (
    'tol', 'max_newton', 'damping_min', 'armijo', 'homotopy_steps', 'linear_rtol',
    'linear_restart', 'linear_maxiter', 'positivity_margin')}
RHS_SCHEMA = {
    'mode': ((str,), True),
    'F': ((dict, type(None)), False),
    'density': ((dict, type(None)), False),
}
CERTIFICATE_SCHEMA = {
    'chart_radius': ((int, float), False),
    'slack': ((int, float), False),
}
LELONG_SCHEMA = {
    'radii': ((list,), False),
}
POLYTOPE_SCHEMA = {
    'vertices': ((list,), False),
    'file': ((str,), False),
}
MORSE_SCHEMA = {
    'dimension': ((int,), False),
    'amplitude': ((int, float), False),
    'width': ((int, float), False),
    'k_values': ((list,), False),
}
CHECKS_SCHEMA = {
    'mass_tol': ((int, float), False),
    'sup_bound_eps': ((list,), False),
    'sup_bound_spread': ((int, float), False),
    'test_field': ((list,), False),
    'profile_radii': ((int,), False),
}
TOP_SCHEMA = {
    'schema_version': ((int,), True),
    'experiment': ((str,), True),
    'name': ((str,), False),
    'dimension': ((int,), False),
    'grid': ((dict,), False),
    'solver': ((dict,), False),
    'forms': ((dict,), False),
    'bumps': ((list,), False),
    'delta': ((int, float), False),
    'eps': ((int, float), False),
    'eps_schedule': ((list,), False),
    'nef_potentials': ((dict,), False),
    'rhs': ((dict,), False),
    'certificate': ((dict,), False),
    'lelong': ((dict,), False),
    'tol_C': ((int, float), False),
    'boundary_weights': ((list,), False),
    'polytope': ((dict,), False),
    'k_max': ((int,), False),
    'tau': ((list,), False),
    'omega_volume': ((int, float), False),
    'tolerance': ((int, float), False),
    'morse': ((dict,), False),
    'checks': ((dict,), False),
    'initial_potential': ((dict,), False),
}


def _check_section(section, schema, where):
    if not isinstance(section, dict):
        raise ConfigSchemaError(f"{where} must be an object")
    unknown = sorted(set(section) - set(schema))
    if unknown:
        raise ConfigSchemaError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    for key, (types, required) in schema.items():
        if key not in section:
            if required:
                raise ConfigSchemaError(f"missing required key '{key}' in {where}")
            continue
        value = section[key]
        # bool is an int subclass; only accept it where bool is listed
        if isinstance(value, bool) and bool not in types:
            raise ConfigSchemaError(f"'{key}' in {where} has type bool")
        if not isinstance(value, types):
            raise ConfigSchemaError(f"'{key}' in {where} has type {type(value).__name__}")


def _check_potential(spec, where):
    if spec is None:
        return
    _check_section(spec, POTENTIAL_SCHEMA, where)
    if ('file' in spec) == ('trig' in spec):
        raise ConfigSchemaError(f"{where} needs exactly one of 'file' or 'trig'")
    for i, term in enumerate(spec.get('trig', [])):
        _check_section(term, {'amplitude': ((int, float), True), 'wavevector': ((list,), True),
                              'phase': ((int, float), False)}, f"{where}.trig[{i}]")


def validate_config(raw):
    """Schema check of a config dictionary; raises ConfigSchemaError on the first violation."""
    _check_section(raw, TOP_SCHEMA, "config")
    if raw['schema_version'] != SCHEMA_VERSION:
        raise ConfigSchemaError(f"schema_version {raw['schema_version']} is not supported (expected {SCHEMA_VERSION})")
    if raw['experiment'] not in EXPERIMENTS:
        raise ConfigSchemaError(f"unknown experiment '{raw['experiment']}', expected one of {EXPERIMENTS}")
    for key, schema in (('grid', GRID_SCHEMA), ('solver', SOLVER_SCHEMA), ('rhs', RHS_SCHEMA),
                        ('certificate', CERTIFICATE_SCHEMA), ('lelong', LELONG_SCHEMA),
                        ('polytope', POLYTOPE_SCHEMA), ('morse', MORSE_SCHEMA), ('checks', CHECKS_SCHEMA)):
        if key in raw:
            _check_section(raw[key], schema, key)
    for name, form in raw.get('forms', {}).items():
        if name not in ('beta', 'omega', 'background'):
            raise ConfigSchemaError(f"unknown form '{name}' (expected beta, omega or background)")
        _check_section(form, FORM_SCHEMA, f"forms.{name}")
        _check_potential(form.get('potential'), f"forms.{name}.potential")
    for i, bump in enumerate(raw.get('bumps', [])):
        _check_section(bump, BUMP_SCHEMA, f"bumps[{i}]")
    for key, spec in raw.get('nef_potentials', {}).items():
        try:
            float(key)
        except ValueError:
            raise ConfigSchemaError(f"nef_potentials key '{key}' is not an eps value")
        _check_potential(spec, f"nef_potentials.{key}")
    if 'rhs' in raw:
        if raw['rhs']['mode'] not in ('exponential', 'measure'):
            raise ConfigSchemaError(f"rhs.mode must be 'exponential' or 'measure'")
        _check_potential(raw['rhs'].get('F'), "rhs.F")
        _check_potential(raw['rhs'].get('density'), "rhs.density")
    if 'initial_potential' in raw:
        _check_potential(raw['initial_potential'], "initial_potential")
    if 'polytope' in raw and ('file' in raw['polytope']) == ('vertices' in raw['polytope']):
        raise ConfigSchemaError("polytope needs exactly one of 'file' or 'vertices'")
    if raw['experiment'] in ('bump-check', 'solve', 'pipeline', 'identities') and 'dimension' not in raw:
        raise ConfigSchemaError(f"experiment '{raw['experiment']}' needs 'dimension'")
    if raw['experiment'] in ('ehrhart',) and 'polytope' not in raw:
        raise ConfigSchemaError("experiment 'ehrhart' needs 'polytope'")
    return raw


def canonical_json(payload):
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


class ExperimentConfig:
    """A validated config plus the directory its file references resolve against."""

    def __init__(self, raw, base_dir="."):
        self.raw = validate_config(raw)
        self.base_dir = os.path.abspath(base_dir)

    @classmethod
    def load(cls, path):
        try:
            with open(path, "r") as file:
                raw = json.load(file)
        except FileNotFoundError:
            raise InputError(f"config file not found: {path}")
        except json.JSONDecodeError as error:
            raise ConfigSchemaError(f"config is not valid JSON: {error}")
        return cls(raw, os.path.dirname(os.path.abspath(path)))

    @property
    def experiment(self):
        return self.raw['experiment']

    @property
    def dimension(self):
        return self.raw.get('dimension')

    @property
    def name(self):
        return self.raw.get('name', self.experiment)

    def config_hash(self):
        return hashlib.sha256(canonical_json(self.raw).encode("utf-8")).hexdigest()

    def resolve(self, relative):
        return relative if os.path.isabs(relative) else os.path.join(self.base_dir, relative)

    def get(self, key, default=None):
        return self.raw.get(key, default)

    #----------------------------------------------------------------
    # Builders
    #----------------------------------------------------------------
    def build_args(self, seed=None, threads=1, verbose=0, resolution_override=None) -> Hyperparameters:
        n = self.dimension or 1
        changes = dict(self.raw.get('solver', {}))
        grid = self.raw.get('grid', {})
        if 'resolution' in grid:
            changes['resolution'] = grid['resolution']
        if 'stencil' in grid:
            changes['stencil'] = grid['stencil']
        if resolution_override is not None:
            changes['resolution'] = int(resolution_override)
        if seed is not None:
            changes['seed'] = int(seed)
        changes['threads'] = int(threads)
        changes['verbose'] = int(verbose)
        return default_hyperparameters(n, **changes)

    def build_grid(self, args):
        from MODELS.CALCULUS.complex_calculus import PeriodicGrid
        return PeriodicGrid(self.dimension, args.resolution, args.stencil)

    def build_potential(self, spec, grid):
        from MODELS.CALCULUS.complex_calculus import ScalarField, trig_field
        from LAB_HELPERS.LAB_io import read_scalar_field
        if spec is None:
            return None
        if 'file' in spec:
            field = read_scalar_field(self.resolve(spec['file']))
            if field.grid.shape != grid.shape:
                raise InputError(f"potential file {spec['file']} has grid {field.grid.shape}, expected {grid.shape}")
            return ScalarField(grid, field.values)
        return trig_field(grid, spec['trig'])

    def build_matrix(self, spec, n):
        if isinstance(spec, dict):
            if set(spec) - {'re', 'im'} or 're' not in spec:
                raise ConfigSchemaError("complex matrices need keys 're' and optional 'im'")
            matrix = np.asarray(spec['re'], dtype=float) + 1j * np.asarray(spec.get('im', np.zeros((n, n))), dtype=float)
        else:
            matrix = np.asarray(spec, dtype=float)
        if matrix.shape != (n, n):
            raise InputError(f"form matrix must be {n}x{n}, got {matrix.shape}")
        return matrix

    def build_class(self, name, grid):
        from MODELS.CALCULUS.complex_calculus import FormClassSpec
        forms = self.raw.get('forms', {})
        if name not in forms:
            if name in ('omega', 'background', 'beta'):
                return FormClassSpec(np.eye(grid.complex_dim))
            raise ConfigSchemaError(f"missing form '{name}'")
        spec = forms[name]
        return FormClassSpec(
            self.build_matrix(spec['matrix'], grid.complex_dim),
            self.build_potential(spec.get('potential'), grid),
            spec.get('is_closed', True),
        )

    def build_form(self, name, grid):
        return self.build_class(name, grid).realize(grid)

    def build_bumps(self, radius=None):
        from MODELS.SINGULARITY.singularity_forms import BumpSpec
        bumps = []
        for spec in self.raw.get('bumps', []):
            r = radius if radius is not None else spec.get('radius')
            if r is None:
                schedule = self.raw.get('eps_schedule') or [self.raw.get('eps')]
                r = schedule[0]
            if r is None:
                raise ConfigSchemaError("bump radius missing (set 'radius', 'eps' or 'eps_schedule')")
            bumps.append(BumpSpec(tuple(spec['center']), float(r), float(spec['weight'])))
        return bumps

    def build_instance(self, args):
        from MODELS.PIPELINE.theorem_pipeline import TheoremInstance
        grid = self.build_grid(args)
        schedule = self.raw.get('eps_schedule') or ([self.raw['eps']] if 'eps' in self.raw else None)
        if not schedule:
            raise ConfigSchemaError("pipeline configs need 'eps_schedule' or 'eps'")
        nef = {}
        for key, spec in self.raw.get('nef_potentials', {}).items():
            nef[float(key)] = self.build_potential(spec, grid)
        return TheoremInstance(
            beta=self.build_class('beta', grid),
            omega=self.build_form('omega', grid),
            bumps=self.build_bumps(schedule[0]),
            delta=float(self.raw.get('delta', 0.01)),
            eps_schedule=[float(e) for e in schedule],
            nef_potentials=nef,
            args=args,
            tol_C=float(self.raw.get('tol_C', 0.02)),
        )

    def build_polytope(self):
        from MODELS.MORSE_RR.morse_rr import LatticePolytope
        spec = self.raw['polytope']
        if 'file' in spec:
            path = self.resolve(spec['file'])
            if not os.path.exists(path):
                raise InputError(f"polytope file not found: {spec['file']}")
            return LatticePolytope.from_file(path)
        return LatticePolytope(spec['vertices'])

    def build_morse_spec(self):
        from MODELS.MORSE_RR.morse_rr import RadialMetricSpec
        spec = self.raw.get('morse', {})
        return RadialMetricSpec(
            dimension=int(spec.get('dimension', 1)),
            amplitude=float(spec.get('amplitude', 0.0)),
            width=float(spec.get('width', 0.1)),
        )


def package_versions():
    versions = {"python": platform.python_version()}
    for module in ("numpy", "scipy", "pandas", "h5py", "sklearn", "statsmodels"):
        try:
            versions[module] = __import__(module).__version__
        except ImportError:
            versions[module] = None
    return versions


class RunManifest:
    """Config hash, versions, seed, per-stage wall clock and the inventory of written files."""

    def __init__(self, config: ExperimentConfig, seed, out_dir):
        self.config_hash = config.config_hash()
        self.experiment = config.experiment
        self.seed = seed
        self.out_dir = out_dir
        self.argv = list(sys.argv[1:])
        self.stages = []
        self.outputs = []

    @contextmanager
    def stage(self, name):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.stages.append({"stage": name, "seconds": time.perf_counter() - start})

    def record(self, path):
        relative = os.path.relpath(path, self.out_dir)
        if relative not in self.outputs:
            self.outputs.append(relative)
        return path

    def to_dict(self):
        return {
            "config_hash": self.config_hash,
            "experiment": self.experiment,
            "seed": self.seed,
            "versions": package_versions(),
            "stages": self.stages,
            "outputs": sorted(self.outputs),
        }
