import json
import math

import pytest

from otoclab.config import ConfigError, config_from_dict, load, loads
from otoclab.experiments import KickedParams
from otoclab.results import ResultTable, read_csv, stream_range, write_table

SMALL = """
[experiment]
name = "small"
study = "kicked"
seed = 7

[params]
N = 4
j = 3
periods = 3
N_u = 20
N_M = 50
"""


def test_loads_and_defaults():
    cfg = loads(SMALL)
    assert cfg.name == "small" and cfg.seed == 7
    assert isinstance(cfg.params, KickedParams)
    assert cfg.params.N == 4 and cfg.params.N_M == 50.0 and cfg.params.h_z == 0.809


def test_round_trip():
    cfg = loads(SMALL)
    again = loads(cfg.to_toml())
    assert again.to_dict() == cfg.to_dict()
    assert cfg.with_seed(99).seed == 99 and cfg.with_seed(99).params == cfg.params


def test_infinite_shots_in_toml():
    cfg = loads(SMALL.replace("N_M = 50", "N_M = inf"))
    assert math.isinf(cfg.params.N_M)
    assert loads(cfg.to_toml()).to_dict() == cfg.to_dict()


@pytest.mark.parametrize(
    "text,field",
    [
        (SMALL.replace("N_u = 20", "N_uu = 20"), "params.N_uu"),
        (SMALL.replace("N_u = 20", 'N_u = "twenty"'), "params.N_u"),
        (SMALL.replace("N_u = 20", "N_u = 2.5"), "params.N_u"),
        (SMALL.replace("N = 4", "N = true"), "params.N"),
        (SMALL.replace("j = 3", "j = 9"), "params.j"),
        (SMALL.replace("seed = 7", "seed = -1"), "experiment.seed"),
        (SMALL.replace("seed = 7", "seed = 18446744073709551616"), "experiment.seed"),
        (SMALL.replace('study = "kicked"', 'study = "kikced"'), "experiment.study"),
        (SMALL.replace('name = "small"', 'name = "a/b"'), "experiment.name"),
        (SMALL.replace('name = "small"\n', ""), "experiment.name"),
        (SMALL + "\n[extra]\nx = 1\n", "extra"),
        (SMALL.replace("[params]", "[params]\nns = [1, 9]"), "params.ns"),
        ("[experiment\n", "syntax"),
    ],
)
def test_config_errors_name_field(text, field):
    with pytest.raises(ConfigError) as info:
        loads(text)
    assert str(info.value).startswith(field)


def test_max_seed_accepted():
    cfg = loads(SMALL.replace("seed = 7", "seed = 18446744073709551615"))
    assert cfg.seed == 2**64 - 1


def test_experiment_key_errors():
    with pytest.raises(ConfigError, match="experiment.colour"):
        config_from_dict({"experiment": {"name": "a", "study": "kicked", "seed": 1, "colour": "red"}})
    with pytest.raises(ConfigError, match="experiment: missing"):
        config_from_dict({"params": {}})


def test_load_from_file(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text(SMALL)
    assert load(p).name == "small"


# -------------------------------------------------------------------- results


def test_stream_range():
    assert stream_range(range(0, 5)) == "0-4"
    assert stream_range([3, 5]) == "3;5"
    assert stream_range([]) == ""


def test_csv_format_and_nulls(tmp_path):
    t = ResultTable(x_name="Jt")
    t.add_series("O", [0.0, 1.6], estimate=[1.0, float("nan")], sigma=[0.0, float("nan")], exact=[1.0, 0.5],
                 flags=[False, True], streams="0-9")
    t.add("O_0", 0.0, exact=1.0)
    csv_path, meta_path = write_table(t, tmp_path, "demo", SMALL, 7, {"study": "kicked"})
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "series,x,estimate,sigma,two_sigma,exact,oracle,flag,streams"
    assert lines[2].split(",")[2:5] == ["null", "null", "null"]
    assert lines[2].split(",")[7] == "degenerate"
    assert lines[3].split(",")[6] == "null"
    rows = read_csv(csv_path)
    assert rows[0]["two_sigma"] == 0.0 and rows[0]["exact"] == 1.0 and rows[1]["estimate"] is None
    meta = json.loads(meta_path.read_text())
    assert meta["seed"] == 7 and meta["config"] == SMALL and meta["rows"] == 3 and meta["study"] == "kicked"
    assert len(meta["config_sha256"]) == 64


def test_full_precision_values(tmp_path):
    t = ResultTable()
    t.add("O", 0.1, estimate=1 / 3)
    csv_path, _ = write_table(t, tmp_path, "p", "", 0)
    assert read_csv(csv_path)[0]["estimate"] == 1 / 3
