"""
Command-line front door of the laboratory: one subcommand per experiment.

    python Experiments.py <subcommand> --config CONFIG.json --out DIR [--threads T] [--seed S]
                          [--resolution-override M] [--verbose V]
    python Experiments.py <subcommand> --case ID      (a bundled config from TestCase.py)

Exit codes: 0 all assertions pass, 1 computation finished with assertion failures,
2 input rejected before any computation.
"""

import os
import sys
import time
import logging
import argparse

import numpy as np

from LAB_HELPERS.LAB_config import ExperimentConfig
from LAB_HELPERS.LAB_constants import EXIT_ASSERTION, EXIT_INPUT, GENERAL_INFO, LOG_FORMAT, RESULTS_PATH
from LAB_HELPERS.LAB_errors import InputError, LabError
from LAB_HELPERS.LAB_subcommands import SUBCOMMANDS, run_experiment
from TestCase import TEST_CASES, get_case_config

logger = logging.getLogger("LAB")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="Experiments.py",
        description="Monge-Ampere experiments on the flat torus.",
    )
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sub = subparsers.add_parser(name)
        source = sub.add_mutually_exclusive_group(required=True)
        source.add_argument("--config", help="path to the JSON experiment config")
        source.add_argument("--case", type=int, help="index of a bundled config in TestCase.py")
        sub.add_argument("--out", default=None, help="output directory (default RESULTS/<name>)")
        sub.add_argument("--threads", type=int, default=1, help="cap on concurrent solves")
        sub.add_argument("--seed", type=int, default=None)
        sub.add_argument("--resolution-override", type=int, default=None, dest="resolution_override")
        sub.add_argument("--verbose", type=int, default=0)
    return parser


def load_config(options):
    if options.config is not None:
        return ExperimentConfig.load(options.config)
    if not 0 <= options.case < len(TEST_CASES):
        raise InputError(f"no bundled case {options.case} (0..{len(TEST_CASES) - 1})")
    return ExperimentConfig(get_case_config(TEST_CASES[options.case]), os.getcwd())


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format=LOG_FORMAT)
    parser = build_parser()
    try:
        options = parser.parse_args(argv)
    except SystemExit as error:
        return EXIT_INPUT if error.code else 0

    start_time = time.time()
    try:
        config = load_config(options)
        if options.threads < 1:
            raise InputError(f"--threads must be >= 1, got {options.threads}")
        args = config.build_args(
            seed=options.seed,
            threads=options.threads,
            verbose=options.verbose,
            resolution_override=options.resolution_override,
        )
        np.random.seed(args.seed)
        out_dir = options.out or os.path.join(RESULTS_PATH, config.name)
        code = run_experiment(options.subcommand, config, args, out_dir)
    except InputError as error:
        logger.error(f"input rejected: {error}")
        return EXIT_INPUT
    except LabError as error:
        logger.error(f"{type(error).__name__}: {error}")
        return EXIT_ASSERTION

    if options.verbose:
        print(f"{GENERAL_INFO} {options.subcommand} finished with exit code {code} in {time.time() - start_time:.2f}s")
    return code


if __name__ == "__main__":
    sys.exit(main())
