import json

from settings import DEFAULT_TOLERANCES, Tolerances, default_settings, load_settings, resolve


def test_missing_file_gives_defaults(tmp_path):
    assert load_settings(str(tmp_path / "absent.json")) == default_settings()


def test_broken_file_gives_defaults(tmp_path):
    path = tmp_path / "settings.json"
    path.write_text("{oops", encoding="utf-8")
    assert load_settings(str(path)) == default_settings()


def test_invalid_keys_fall_back_one_by_one(tmp_path):
    path = tmp_path / "settings.json"
    path.write_text(json.dumps({"ODE_RTOL": 1e-9, "EPSILON_SCALE": -1, "THREADS": "many"}), encoding="utf-8")
    settings = load_settings(str(path))
    defaults = default_settings()
    assert settings["ODE_RTOL"] == 1e-9
    assert settings["EPSILON_SCALE"] == defaults["EPSILON_SCALE"]
    assert settings["THREADS"] == defaults["THREADS"]
    assert settings["LAMBDA_MAX"] == defaults["LAMBDA_MAX"]


def test_tolerances_from_settings():
    tol = Tolerances.from_settings({**default_settings(), "MAX_REFINE_DEPTH": 3.0, "LAMBDA_MAX": 50})
    assert tol.max_refine_depth == 3 and isinstance(tol.max_refine_depth, int)
    assert tol.lambda_max == 50
    assert tol.updated(epsilon_scale=1e-3).epsilon_scale == 1e-3
    assert resolve(None) is DEFAULT_TOLERANCES
    assert resolve(tol) is tol
