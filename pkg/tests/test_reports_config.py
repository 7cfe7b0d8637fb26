import json
import math

import numpy as np
import pytest

from mellin_bv.config import DEFAULTS, RunConfig
from mellin_bv.errors import ConfigError
from mellin_bv.reports import dumps, jsonable, write_csv, write_json, write_plot_data

ROWS = [{"lambda": 1.0, "w": 2.0, "error": 0.1, "lower_or_upper_flag": "lower"},
        {"lambda": 0.5, "w": 2.0, "error": math.inf, "lower_or_upper_flag": "lower"}]


def test_csv_layout_and_determinism(tmp_path):
    a = write_csv(tmp_path / "a.csv", ROWS).read_bytes()
    b = write_csv(tmp_path / "b.csv", ROWS).read_bytes()
    assert a == b
    assert a.split(b"\r\n")[0] == b"lambda,w,error,lower_or_upper_flag"
    assert b"0.5,2.0,inf,lower" in a


def test_floats_round_trip_exactly(tmp_path):
    x = 0.1 + 0.2
    path = write_csv(tmp_path / "x.csv", [{"lambda": x, "w": 1.0, "error": x,
                                           "lower_or_upper_flag": "upper"}])
    assert float(path.read_text().splitlines()[1].split(",")[0]) == x


def test_jsonable_handles_numpy_and_non_finite():
    out = jsonable({"a": np.float64(1.5), "b": np.arange(3), "c": (np.nan, -np.inf),
                    "d": np.bool_(True), 2: None})
    assert out == {"a": 1.5, "b": [0, 1, 2], "c": ["nan", "-inf"], "d": True, "2": None}
    assert json.loads(dumps(out)) == out


def test_json_document_embeds_config_and_version(tmp_path):
    path = write_json(tmp_path / "r.json", {"z": 1, "a": 2}, {"N": 1}, "0.1.0")
    doc = json.loads(path.read_text())
    assert doc == {"report": {"z": 1, "a": 2}, "config": {"N": 1}, "version": "0.1.0"}
    assert path.read_text().index('"a"') < path.read_text().index('"z"')


def test_plot_data(tmp_path):
    path = write_plot_data(tmp_path / "p.dat", [1.0, 2.0], [0.5, 0.25], "title\nsub", ("w", "E"))
    assert path.read_text().splitlines() == ["# title", "# sub", "# w E", "1.0 0.5", "2.0 0.25"]


def test_config_defaults_and_overrides(tmp_path):
    cfg = RunConfig.load(None, {"N": 2, "kernel": "picard", "lambda": None})
    assert cfg.N == 2 and cfg.kernel.dim == 2 and cfg["lambda"] == DEFAULTS["lambda"]
    assert set(cfg.var_options()) == {"box_ladder", "tol", "p_max", "section_depth"}
    assert "depth_max" in RunConfig.load().var_options()


def test_config_file_is_merged(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text('function = "clamplog"\n[phi]\nkind = "classical"\n'
                    '[op]\nw_ladder = [2, 4, 8, 16]\n[var]\ntol = 1e-3\n')
    cfg = RunConfig.load(str(path), {"alpha": 2.0})
    assert cfg.function.name == "clamplog" and cfg.phi.kind == "classical"
    assert cfg.w_ladder == (2.0, 4.0, 8.0, 16.0)
    assert cfg["var"]["depth_max"] == 12 and cfg["var"]["tol"] == 1e-3
    assert cfg["alpha"] == 2.0


@pytest.mark.parametrize("text", [
    "N = 5\n", "bogus = 1\n", "[var]\nbogus = 1\n", 'kernel = "nope"\n', 'function = "nope"\n',
    "alpha = -1.0\n", "[op]\nw_ladder = [4, 2]\n", '[phi]\nkind = "power"\np = 0.5\n',
    "not toml = = 1\n",
])
def test_config_errors(tmp_path, text):
    path = tmp_path / "bad.toml"
    path.write_text(text)
    with pytest.raises(ConfigError):
        RunConfig.load(str(path))


def test_missing_config_file():
    with pytest.raises(ConfigError):
        RunConfig.load("/nonexistent/run.toml")
