import json
import math

import numpy as np
import pandas as pd
import pytest

from errors import OutputError
from utils import emit_report, format_float, read_json, to_jsonable, write_csv, write_json


def test_format_float_round_trips():
    assert format_float(0.1) == "0.10000000000000001"
    assert float(format_float(1 / 3)) == 1 / 3


def test_to_jsonable():
    data = {"z": 1 + 2j, "arr": np.array([1.5, 2.5]), "n": np.int64(3), "flag": np.bool_(True),
            "bad": [math.inf, -math.inf, math.nan], 4: (1, 2)}
    assert to_jsonable(data) == {"z": {"re": 1.0, "im": 2.0}, "arr": [1.5, 2.5], "n": 3, "flag": True,
                                 "bad": ["inf", "-inf", "nan"], "4": [1, 2]}


def test_json_is_deterministic(tmp_path):
    payload = {"b": [0.1, 1e-300], "a": complex(0, -1)}
    first, second = tmp_path / "a.json", tmp_path / "nested" / "b.json"
    write_json(payload, str(first))
    write_json(payload, str(second))
    assert first.read_bytes() == second.read_bytes()
    assert read_json(str(first))["a"] == {"re": 0.0, "im": -1.0}


def test_header_only_csv(tmp_path):
    path = tmp_path / "scan.csv"
    emit_report([], "csv", str(path), ["R", "quantity", "value", "reference", "error"])
    assert path.read_text(encoding="utf-8") == "R,quantity,value,reference,error\n"


def test_csv_keeps_full_precision(tmp_path):
    path = tmp_path / "xi.csv"
    write_csv(pd.DataFrame({"lambda": [0.1, 2.0], "xi": [-1.0, 0.0]}), str(path))
    frame = pd.read_csv(path, float_precision="round_trip")
    assert frame["lambda"].tolist() == [0.1, 2.0]


def test_emit_rows_in_column_order(tmp_path):
    path = tmp_path / "rows.csv"
    emit_report([{"b": 2, "a": 1}], "csv", str(path), ["a", "b"])
    assert path.read_text(encoding="utf-8").splitlines() == ["a,b", "1,2"]
    emit_report([{"b": 2, "a": 1}], "json", str(tmp_path / "rows.json"))
    assert json.loads((tmp_path / "rows.json").read_text(encoding="utf-8")) == [{"b": 2, "a": 1}]


def test_output_errors(tmp_path):
    blocker = tmp_path / "file.txt"
    blocker.write_text("x", encoding="utf-8")
    with pytest.raises(OutputError) as info:
        write_json({}, str(blocker / "report.json"))
    assert info.value.path.endswith("file.txt")
    with pytest.raises(OutputError):
        emit_report([], "xml", str(tmp_path / "r.xml"))
    with pytest.raises(OutputError):
        read_json(str(tmp_path / "missing.json"))
