"""Smoke tests for the _fkmc python module (built by CMake; ctest puts the
module directory on PYTHONPATH)."""

import json

import pytest

_fkmc = pytest.importorskip("_fkmc")


BASE = {
    "model": {"kind": "euclidean", "dim": 1},
    "fields": {
        "potential": {"builtin": "zero"},
        "drift": {"builtin": "zero"},
        "payoff": {"builtin": "const"},
    },
    "x0": [0.0],
    "T": 1.0,
    "dt": 0.01,
    "n_paths": 50,
    "seed": 1,
    "estimators": ["semigroup"],
}


def config(**patch):
    cfg = json.loads(json.dumps(BASE))
    cfg.update(patch)
    return json.dumps(cfg)


def test_version_and_doc():
    assert _fkmc.__version__ == "0.1.0"
    assert "Feynman-Kac" in _fkmc.__doc__


def test_run_json_trivial_semigroup():
    code, reports, message = _fkmc.run_json(config())
    assert code == 0, message
    assert len(reports) == 1
    rep = reports[0]
    assert rep["kind"] == "semigroup"
    assert rep["estimate"] == 1.0  # V = 0, f = 1: every sample is exactly 1
    assert rep["std_error"] == 0.0
    assert rep["n_paths_used"] == 50
    assert rep["n_paths_failed"] == 0
    assert "euclidean" in rep["model"]
    assert isinstance(rep["term_breakdown"], dict)
    assert rep["T"] == 1.0 and rep["dt"] == 0.01 and rep["seed"] == 1


def test_run_json_gradient_with_oracle():
    code, reports, message = _fkmc.run_json(
        config(
            fields={
                "potential": {"builtin": "zero"},
                "drift": {"builtin": "zero"},
                "payoff": {"builtin": "sin"},
            },
            estimators=["gradient"],
            n_paths=3000,
            dt=0.005,
            seed=2,
            oracle_compare=True,
        )
    )
    assert code == 0, message
    rep = reports[0]
    assert rep["kind"] == "gradient"
    assert "oracle_value" in rep and "error_se_ratio" in rep
    assert rep["error_se_ratio"] <= 3.0
    assert rep["schedule_k"] == "gradient-default"


def test_exit_codes_surface_without_raising():
    code, reports, message = _fkmc.run_json(
        config(
            fields={
                "potential": {"builtin": "constant", "c": -1.0},
                "drift": {"builtin": "zero"},
                "payoff": {"builtin": "const"},
            },
            v_min=0.0,
            n_paths=10,
        )
    )
    assert code == 3
    assert message


def test_validate_json_expands_defaults():
    resolved = json.loads(_fkmc.validate_json(config()))
    assert resolved["model"]["curvature"] == 0.0
    assert resolved["workers"] == "auto"
    assert resolved["schedules"]["k"]["times"] == [0.0, 1.0]
    assert resolved["oracle_compare"] is False
    # The resolved echo must itself be a valid config.
    again = json.loads(_fkmc.validate_json(json.dumps(resolved)))
    assert again == resolved


def test_config_error_is_value_error():
    assert issubclass(_fkmc.ConfigError, ValueError)
    with pytest.raises(ValueError, match="Tmax"):
        _fkmc.validate_json(config(Tmax=2.0))
    with pytest.raises(ValueError):
        _fkmc.run_json("not json")


def test_sweep_json_orders_reports_by_horizon():
    code, reports, message = _fkmc.sweep_json(
        config(
            fields={
                "potential": {"builtin": "zero"},
                "drift": {"builtin": "zero"},
                "payoff": {"builtin": "sin"},
            },
            estimators=["semigroup", "gradient"],
            n_paths=100,
            t_grid=[0.5, 1.0],
        )
    )
    assert code == 0, message
    assert [(r["T"], r["kind"]) for r in reports] == [
        (0.5, "semigroup"),
        (0.5, "gradient"),
        (1.0, "semigroup"),
        (1.0, "gradient"),
    ]
