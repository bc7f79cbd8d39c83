import os
import json

from LAB_HELPERS.LAB_constants import RESULTS_PATH, SCHEMA_VERSION


class TestCase:
    """
    A bundled experiment: a config document plus the directory its results go to.
    Args:
        name (str): Short name, also the results subdirectory.
        experiment (str): The CLI subcommand the config is written for.
        config (dict): The config document, without schema_version and experiment.
    """
    __test__ = False

    def __init__(self, name, experiment, config):
        self.name = name
        self.experiment = experiment
        self.config = config
        self.results_path = os.path.join(RESULTS_PATH, name)


IDENTITY_2 = [[1.0, 0.0], [0.0, 1.0]]
IDENTITY_3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]

TEST_CASES = [
    TestCase(#0
        'bump_n2',
        'bump-check',
        {'dimension': 2, 'eps': 0.125, 'grid': {'resolution': 64},
         'bumps': [{'center': [0.5, 0.5, 0.5, 0.5], 'weight': 1.0}]},
    ),
    TestCase(#1
        'solve_n1_closed',
        'solve',
        {'dimension': 1, 'grid': {'resolution': 64},
         'forms': {'background': {'matrix': [[1.0]]}},
         'rhs': {'mode': 'exponential',
                 'F': {'trig': [{'amplitude': 0.5, 'wavevector': [1, 0]}]}}},
    ),
    TestCase(#2
        'pipeline_n2_conforming',
        'pipeline',
        {'dimension': 2, 'grid': {'resolution': 24, 'stencil': 'spectral'}, 'delta': 0.1,
         'eps_schedule': [0.24, 0.2, 1.0 / 6], 'certificate': {'chart_radius': 0.45},
         'forms': {'beta': {'matrix': IDENTITY_2}, 'omega': {'matrix': IDENTITY_2}},
         'bumps': [{'center': [0.5, 0.5, 0.5, 0.5], 'weight': 0.5}]},
    ),
    TestCase(#3
        'pipeline_n2_over_budget',
        'pipeline',
        {'dimension': 2, 'grid': {'resolution': 24, 'stencil': 'spectral'}, 'delta': 0.1,
         'eps_schedule': [0.24, 1.0 / 6], 'certificate': {'chart_radius': 0.45},
         'forms': {'beta': {'matrix': IDENTITY_2}, 'omega': {'matrix': IDENTITY_2}},
         'bumps': [{'center': [0.5, 0.5, 0.5, 0.5], 'weight': 1.0}]},
    ),
    TestCase(#4
        'identities_n3',
        'identities',
        {'dimension': 3, 'grid': {'resolution': 8, 'stencil': 'spectral'}, 'delta': 0.5,
         'eps_schedule': [0.2, 0.1, 0.05], 'solver': {'tol': 1e-10},
         'forms': {'beta': {'matrix': IDENTITY_3,
                            'potential': {'trig': [{'amplitude': 0.01, 'wavevector': [1, 0, 0, 0, 0, 0]}]}},
                   'omega': {'matrix': IDENTITY_3}}},
    ),
    TestCase(#5
        'ehrhart_square',
        'ehrhart',
        {'polytope': {'vertices': [[0, 0], [1, 0], [0, 1], [1, 1]]}, 'k_max': 50,
         'tau': [0.8], 'delta': 0.01},
    ),
    TestCase(#6
        'ehrhart_simplex',
        'ehrhart',
        {'polytope': {'vertices': [[0, 0], [1, 0], [0, 1]]}, 'k_max': 50},
    ),
    TestCase(#7
        'morse_twisted',
        'morse',
        {'morse': {'dimension': 1, 'amplitude': 0.2, 'width': 0.1}},
    ),
]


def get_case_config(test_case):
    """
    The full config document of a test case, ready for ExperimentConfig.
    Args:
        test_case (TestCase): The test case object.
    Returns:
        dict: The config with schema_version, experiment and name filled in.
    """
    config = {
        'schema_version': SCHEMA_VERSION,
        'experiment': test_case.experiment,
        'name': test_case.name,
    }
    config.update(json.loads(json.dumps(test_case.config)))
    return config
