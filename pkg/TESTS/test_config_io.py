import json
import math

import numpy as np
import pytest

from Hyperparameters import Hyperparameters, default_hyperparameters, get_hyperparameters
from LAB_HELPERS.LAB_config import ExperimentConfig, RunManifest, validate_config
from LAB_HELPERS.LAB_errors import ConfigSchemaError, FitError, InputError
from LAB_HELPERS.LAB_io import (
    read_form11, read_hdf5_bundle, read_scalar_field, save_json, to_builtin, write_csv,
    write_form11, write_hdf5_bundle, write_scalar_field,
)
from MODELS.CALCULUS.complex_calculus import Form11, ScalarField, ddbar, trig_field
from MODELS.HELPERS.Utils import linear_fit, ols_fit, power_law_exponent
from TestCase import TEST_CASES, get_case_config


def base_config(**changes):
    config = {"schema_version": 1, "experiment": "solve", "dimension": 1}
    config.update(changes)
    return config


def test_scalar_field_file(tmp_path, grid1):
    phi = trig_field(grid1, [{"amplitude": 0.3, "wavevector": [1, 1], "phase": 0.2}])
    path, sidecar = write_scalar_field(phi, str(tmp_path / "phi.bin"), provenance={"run": "test"})
    loaded = read_scalar_field(path)
    assert loaded.grid == grid1
    assert np.array_equal(loaded.values, phi.values)
    with open(sidecar) as file:
        meta = json.load(file)
    assert meta["kind"] == "scalar"
    assert meta["provenance"] == {"run": "test"}
    # 16-byte header plus the float64 payload
    assert (tmp_path / "phi.bin").stat().st_size == 16 + 8 * grid1.num_points


def test_form11_file(tmp_path, grid2):
    alpha = Form11.constant(grid2, np.array([[1.0, 0.5j], [-0.5j, 2.0]])) + ddbar(
        trig_field(grid2, [{"amplitude": 0.1, "wavevector": [1, 0, 0, 1]}]))
    path, _ = write_form11(alpha, str(tmp_path / "alpha.bin"))
    loaded = read_form11(path)
    assert np.array_equal(loaded.coeff, alpha.coeff)
    with pytest.raises(InputError):
        read_scalar_field(path)


def test_truncated_field_file(tmp_path, grid1):
    path, _ = write_scalar_field(ScalarField.zeros(grid1), str(tmp_path / "zero.bin"))
    with open(path, "rb") as file:
        payload = file.read()
    with open(path, "wb") as file:
        file.write(payload[:-8])
    with pytest.raises(InputError):
        read_scalar_field(path)
    with open(path, "wb") as file:
        file.write(payload[:10])
    with pytest.raises(InputError):
        read_scalar_field(path)


def test_hdf5_bundle(tmp_path, grid1):
    phi = trig_field(grid1, [{"amplitude": 1.0, "wavevector": [0, 1]}])
    path = write_hdf5_bundle(str(tmp_path / "fields.h5"), {"phi": phi}, {"constant": 1.5})
    assert np.array_equal(read_hdf5_bundle(path)["phi"], phi.values)


def test_json_and_csv_are_deterministic(tmp_path):
    payload = {"b": np.float64(1.0), "a": [np.int64(2), float("nan")], "c": np.bool_(True)}
    assert to_builtin(payload) == {"b": 1.0, "a": [2, None], "c": True}
    first = save_json(payload, str(tmp_path / "first.json"))
    second = save_json(dict(reversed(list(payload.items()))), str(tmp_path / "second.json"))
    assert open(first).read() == open(second).read()
    path = write_csv([{"k": 1, "value": 0.5}], str(tmp_path / "rows.csv"), columns=["k", "value"])
    assert open(path).read() == "k,value\n1,5.000000000000e-01\n"


def test_schema_rejections():
    validate_config(base_config())
    with pytest.raises(ConfigSchemaError):
        validate_config(base_config(colour="red"))
    with pytest.raises(ConfigSchemaError):
        validate_config(base_config(schema_version=2))
    with pytest.raises(ConfigSchemaError):
        validate_config(base_config(experiment="plot"))
    with pytest.raises(ConfigSchemaError):
        validate_config(base_config(dimension=True))
    with pytest.raises(ConfigSchemaError):
        validate_config({"schema_version": 1, "experiment": "solve"})
    with pytest.raises(ConfigSchemaError):
        validate_config(base_config(grid={"resolution": 64, "spacing": 0.1}))
    with pytest.raises(ConfigSchemaError):
        validate_config(base_config(rhs={"mode": "linear"}))
    with pytest.raises(ConfigSchemaError):
        validate_config(base_config(forms={"gamma": {"matrix": [[1.0]]}}))
    with pytest.raises(ConfigSchemaError):
        validate_config(base_config(rhs={"mode": "exponential", "F": {"file": "a.bin", "trig": []}}))
    with pytest.raises(ConfigSchemaError):
        validate_config({"schema_version": 1, "experiment": "ehrhart"})


def test_config_hash_ignores_key_order():
    a = ExperimentConfig(base_config(delta=0.1, eps=0.2))
    b = ExperimentConfig(dict(reversed(list(base_config(delta=0.1, eps=0.2).items()))))
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != ExperimentConfig(base_config(delta=0.2, eps=0.2)).config_hash()


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(InputError):
        ExperimentConfig.load(str(tmp_path / "missing.json"))
    broken = tmp_path / "broken.json"
    broken.write_text("{ not json")
    with pytest.raises(ConfigSchemaError):
        ExperimentConfig.load(str(broken))


def test_file_references_resolve_next_to_the_config(tmp_path, grid1):
    phi = trig_field(grid1, [{"amplitude": 0.2, "wavevector": [1, 0]}])
    (tmp_path / "fields").mkdir()
    write_scalar_field(phi, str(tmp_path / "fields" / "F.bin"))
    config_path = tmp_path / "solve.json"
    config_path.write_text(json.dumps(base_config(
        grid={"resolution": 64},
        rhs={"mode": "exponential", "F": {"file": "fields/F.bin"}},
    )))
    config = ExperimentConfig.load(str(config_path))
    args = config.build_args()
    F = config.build_potential(config.get("rhs")["F"], config.build_grid(args))
    assert np.array_equal(F.values, phi.values)
    with pytest.raises(InputError):
        config.build_potential(config.get("rhs")["F"], config.build_grid(args.updated(resolution=32)))


def test_builders_from_a_bundled_case():
    config = ExperimentConfig(get_case_config(TEST_CASES[2]))
    args = config.build_args(seed=7, threads=2, resolution_override=32)
    assert args.resolution == 32
    assert args.seed == 7
    instance = config.build_instance(args)
    assert instance.eps_schedule == [0.24, 0.2, 1.0 / 6]
    assert instance.delta == 0.1
    assert instance.bumps[0].weight == 0.5
    assert instance.grid.resolution == 32
    matrix = config.build_matrix({"re": [[1.0, 0.0], [0.0, 1.0]], "im": [[0.0, 0.5], [-0.5, 0.0]]}, 2)
    assert matrix[0, 1] == 0.5j
    with pytest.raises(InputError):
        config.build_matrix([[1.0]], 2)


def test_manifest_inventory(tmp_path):
    config = ExperimentConfig(base_config())
    manifest = RunManifest(config, 42, str(tmp_path))
    with manifest.stage("solve"):
        pass
    manifest.record(str(tmp_path / "report.json"))
    manifest.record(str(tmp_path / "report.json"))
    payload = manifest.to_dict()
    assert payload["outputs"] == ["report.json"]
    assert payload["seed"] == 42
    assert payload["stages"][0]["stage"] == "solve"
    assert payload["config_hash"] == config.config_hash()


def test_hyperparameter_grid():
    configurations = get_hyperparameters(2, resolution=[16, 32], tol=[1e-6, 1e-8])
    assert len(configurations) == 4
    assert all(isinstance(c, Hyperparameters) for c in configurations)
    assert default_hyperparameters(3).stencil == "spectral"
    assert default_hyperparameters(1).tol == 1e-8
    with pytest.raises(InputError):
        get_hyperparameters(2, learning_rate=[0.1])
    with pytest.raises(InputError):
        default_hyperparameters(2, stencil="upwind")
    with pytest.raises(InputError):
        default_hyperparameters(2, tol=-1.0)


def test_least_squares_helpers():
    x = np.arange(1.0, 6.0)
    fit = linear_fit(x, 3.0 * x - 1.0)
    assert fit["slope"] == pytest.approx(3.0)
    assert fit["intercept"] == pytest.approx(-1.0)
    power = power_law_exponent([0.2, 0.1, 0.05], [0.04, 0.01, 0.0025])
    assert power["exponent"] == pytest.approx(2.0)
    two_points = ols_fit(np.array([[1.0, 0.0], [1.0, 1.0]]), np.array([1.0, 2.0]))
    assert np.allclose(two_points["params"], [1.0, 1.0])
    assert np.all(np.isnan(two_points["stderr"]))
    with pytest.raises(FitError):
        ols_fit(np.ones((1, 2)), np.ones(1))
    with pytest.raises(FitError):
        power_law_exponent([1.0, 2.0], [1.0, -1.0])
    assert math.isfinite(fit["stderr"])
