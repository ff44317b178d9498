"""报告序列化与输出"""

import io
import json
import math
from enum import Enum

import numpy as np
import pytest

from report_writer import (
    SCHEMA_VERSION, Report, ReportError, normalize, read_csv, read_report, render, render_csv,
    to_json_text, write_report,
)


class Status(Enum):
    OK = "ok"


def sample_report():
    return Report(command="ball", config={"preset": "paper"},
                  results={"rows": [{"r": 1.0, "volume": 4 * math.pi / 3}]},
                  table=[{"r": 1.0, "volume": 4 * math.pi / 3}, {"r": 2.0, "volume": 32 * math.pi / 3}],
                  summary=["两行"])


class TestJson:
    @pytest.mark.parametrize("value", [0.1, 1.0 / 3.0, math.pi, 1e-300, 2.0 ** -1074, 123456789.123])
    def test_floats_survive_text(self, value):
        assert json.loads(to_json_text({"x": value}))["x"] == value

    def test_seventeen_digits(self):
        assert "0.10000000000000001" in to_json_text([0.1])

    def test_integral_floats_keep_decimal_point(self):
        assert json.loads(to_json_text({"x": 2.0}))["x"] == 2.0
        assert "2.0" in to_json_text({"x": 2.0})

    def test_non_finite_tokens(self):
        text = to_json_text({"a": float("nan"), "b": float("inf"), "c": -float("inf")})
        assert "NaN" in text and "-Infinity" in text
        data = json.loads(text)
        assert math.isnan(data["a"]) and data["b"] == math.inf

    def test_normalize(self):
        data = normalize({"a": np.arange(3), "b": np.float64(0.5), "c": (1, Status.OK), "d": np.bool_(True)})
        assert data == {"a": [0, 1, 2], "b": 0.5, "c": [1, "ok"], "d": True}
        assert type(data["d"]) is bool

    def test_unknown_type(self):
        with pytest.raises(ReportError):
            normalize({"a": object()})


class TestReport:
    def test_schema_keys(self):
        data = json.loads(render(sample_report(), "json"))
        assert set(data) == {"schema_version", "command", "config", "results", "diagnostics"}
        assert data["schema_version"] == SCHEMA_VERSION

    def test_read_back(self, tmp_path):
        path = tmp_path / "out" / "ball.json"
        write_report(sample_report(), str(path), "json")
        data = read_report(str(path))
        assert data["results"]["rows"][0]["volume"] == 4 * math.pi / 3

    def test_wrong_schema(self, tmp_path):
        path = tmp_path / "old.json"
        path.write_text(json.dumps({"schema_version": 0, "command": "ball", "config": {}, "results": {}}))
        with pytest.raises(ReportError):
            read_report(str(path))

    def test_unreadable(self, tmp_path):
        with pytest.raises(ReportError):
            read_report(str(tmp_path / "missing.json"))

    def test_csv(self, tmp_path):
        path = tmp_path / "ball.csv"
        write_report(sample_report(), str(path), "csv")
        rows = read_csv(str(path))
        assert [row["r"] for row in rows] == ["1.0", "2.0"]
        assert float(rows[1]["volume"]) == 32 * math.pi / 3

    def test_csv_needs_table(self):
        with pytest.raises(ReportError):
            render_csv([])

    def test_text_goes_to_stream(self):
        stream = io.StringIO()
        report = sample_report()
        report.diagnostics.append("注意")
        write_report(report, None, "text", stream)
        text = stream.getvalue()
        assert "warpiso ball" in text and "两行" in text and "注意" in text

    def test_unknown_format(self):
        with pytest.raises(ReportError):
            render(sample_report(), "xml")
