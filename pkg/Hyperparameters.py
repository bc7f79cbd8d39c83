import itertools

from LAB_HELPERS.LAB_errors import InputError

STENCILS = ['central', 'spectral']


def get_hyperparameters(dimension, **grid):
    """
    Solver configurations for a complex dimension. Every keyword overrides the
    default value list, e.g. get_hyperparameters(2, resolution=[16, 32, 64]).
    """

    if dimension <= 2:
        hyperparameters = {
            'tol': [1e-8],
            'max_newton': [40],
            'damping_min': [1.0 / 1024],
            'armijo': [1e-4],
            'homotopy_steps': [4],
            'linear_rtol': [1e-10],
            'linear_restart': [50],
            'linear_maxiter': [20],
            'positivity_margin': [1e-8],
            'resolution': [64],
            'stencil': STENCILS[:1],
        }
    else:
        hyperparameters = {
            'tol': [1e-6],
            'max_newton': [30],
            'damping_min': [1.0 / 1024],
            'armijo': [1e-4],
            'homotopy_steps': [4],
            'linear_rtol': [1e-10],
            'linear_restart': [40],
            'linear_maxiter': [10],
            'positivity_margin': [1e-8],
            'resolution': [12],
            'stencil': STENCILS[1:],
        }

    for key, values in grid.items():
        if key not in hyperparameters:
            raise InputError(f"Unknown hyperparameter '{key}'")
        hyperparameters[key] = list(values) if isinstance(values, (list, tuple)) else [values]

    hyperparameter_combinations = list(itertools.product(*hyperparameters.values()))

    CONFIGURATIONS = []
    for combination in hyperparameter_combinations:
        config_dict = dict(zip(hyperparameters.keys(), combination))
        CONFIGURATIONS.append(Hyperparameters(
            dimension=dimension,
            **config_dict
        ))
    return CONFIGURATIONS



class Hyperparameters:
    """
    Numerical parameters of one Monge-Ampere run.
    """

    def __init__(self,
                 dimension=2,
                 tol=1e-8,
                 max_newton=40,
                 damping_min=1.0 / 1024,
                 armijo=1e-4,
                 homotopy_steps=4,
                 linear_rtol=1e-10,
                 linear_restart=50,
                 linear_maxiter=20,
                 positivity_margin=1e-8,
                 resolution=64,
                 stencil='central',
                 seed=42,
                 verbose=0,
                 threads=1,
                 ):

        #===================================================================================================
        self.dimension = dimension
        self.seed = seed
        self.verbose = verbose
        self.threads = threads

        # Newton ----------------------------------------------------------
        self.tol = tol
        self.max_newton = max_newton
        self.damping_min = damping_min  # smallest accepted line-search step
        self.armijo = armijo
        self.positivity_margin = positivity_margin

        # Continuation from the delta-only right-hand side
        self.homotopy_steps = homotopy_steps

        # GMRES on the augmented (f, log K) system -------------------------
        self.linear_rtol = linear_rtol
        self.linear_restart = linear_restart
        self.linear_maxiter = linear_maxiter

        # Grid -------------------------------------------------------------
        self.resolution = resolution
        self.stencil = stencil

        if tol <= 0:
            raise InputError(f"tol must be positive, got {tol}")
        if stencil not in STENCILS:
            raise InputError(f"Unknown stencil '{stencil}'")
        if homotopy_steps < 1:
            raise InputError("homotopy_steps must be >= 1")


    def updated(self, **changes):
        values = self.to_dict()
        values.update(changes)
        return Hyperparameters(**values)


    def to_dict(self):
        return {
            'dimension': self.dimension,
            'tol': self.tol,
            'max_newton': self.max_newton,
            'damping_min': self.damping_min,
            'armijo': self.armijo,
            'homotopy_steps': self.homotopy_steps,
            'linear_rtol': self.linear_rtol,
            'linear_restart': self.linear_restart,
            'linear_maxiter': self.linear_maxiter,
            'positivity_margin': self.positivity_margin,
            'resolution': self.resolution,
            'stencil': self.stencil,
            'seed': self.seed,
            'verbose': self.verbose,
            'threads': self.threads,
        }


def default_hyperparameters(dimension, **changes):
    return get_hyperparameters(dimension)[0].updated(**changes)
