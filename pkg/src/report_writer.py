#!/usr/bin/env python3
"""
报告输出模块
JSON（浮点 17 位有效数字，可无损回读）、CSV 表格与文本摘要
"""

import csv
import dataclasses
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
BANNER = "=" * 50


class ReportError(ValueError):
    """报告无法写出或读回"""


def normalize(value: Any) -> Any:
    """转换为只含 dict/list/str/int/float/bool/None 的结构"""
    if hasattr(value, "to_dict"):
        return normalize(value.to_dict())
    if isinstance(value, Enum):
        return value.value
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return normalize(dataclasses.asdict(value))
    if isinstance(value, dict):
        return {str(key): normalize(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [normalize(item) for item in value]
    if isinstance(value, np.ndarray):
        return [normalize(item) for item in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    if value is None or isinstance(value, str):
        return value
    raise ReportError(f"cannot serialize value of type {type(value).__name__}")


def _format_float(value: float) -> str:
    if math.isnan(value):
        return "NaN"
    if math.isinf(value):
        return "Infinity" if value > 0 else "-Infinity"
    text = format(value, ".17g")
    if all(ch in "-0123456789" for ch in text):
        text += ".0"
    return text


def _encode(value: Any, depth: int) -> str:
    pad = "  " * (depth + 1)
    end = "  " * depth
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(key, ensure_ascii=False)}: {_encode(item, depth + 1)}"
                 for key, item in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(value, list):
        if not value:
            return "[]"
        if all(isinstance(item, (int, float)) and not isinstance(item, bool) for item in value):
            return "[" + ", ".join(_encode(item, depth + 1) for item in value) + "]"
        return "[\n" + ",\n".join(pad + _encode(item, depth + 1) for item in value) + "\n" + end + "]"
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, float):
        return _format_float(value)
    return json.dumps(value, ensure_ascii=False)


def to_json_text(document: Any) -> str:
    """序列化为 JSON 文本，浮点数保留 17 位有效数字"""
    return _encode(normalize(document), 0) + "\n"


@dataclass
class Report:
    """命令输出：{schema_version, command, config, results, diagnostics}"""
    command: str
    config: Dict[str, Any]
    results: Dict[str, Any]
    diagnostics: List[str] = field(default_factory=list)
    table: Optional[List[Dict[str, Any]]] = None
    summary: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "config": normalize(self.config),
            "results": normalize(self.results),
            "diagnostics": list(self.diagnostics),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Report":
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ReportError(f"unsupported schema version {data.get('schema_version')!r}")
        return cls(command=data["command"], config=data["config"], results=data["results"],
                   diagnostics=list(data.get("diagnostics", [])))


def render_csv(rows: List[Dict[str, Any]]) -> str:
    """表格行转换为 CSV 文本"""
    if not rows:
        raise ReportError("no tabular data to write as csv")
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(rows[0].keys()), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({key: _format_float(value) if isinstance(value, float) else value
                         for key, value in normalize(row).items()})
    return buffer.getvalue()


def render_text(report: Report) -> str:
    """人读摘要"""
    lines = [BANNER, f"🧮 warpiso {report.command}", BANNER]
    lines.extend(report.summary)
    if report.table:
        keys = list(report.table[0].keys())
        lines.append("")
        lines.append("  ".join(f"{key:>14}" for key in keys))
        for row in report.table:
            cells = [f"{value:>14.8g}" if isinstance(value, float) else f"{str(value):>14}"
                     for value in (row[key] for key in keys)]
            lines.append("  ".join(cells))
    for message in report.diagnostics:
        lines.append(f"⚠️  {message}")
    lines.append(BANNER)
    return "\n".join(lines) + "\n"


def render(report: Report, fmt: str) -> str:
    if fmt == "json":
        return to_json_text(report.to_dict())
    if fmt == "csv":
        return render_csv(report.table or [])
    if fmt == "text":
        return render_text(report)
    raise ReportError(f"unknown output format {fmt!r}")


def write_report(report: Report, path: Optional[str], fmt: str, stream=None) -> str:
    """写出报告；path 为 None 时写到 stream（默认 stdout）"""
    text = render(report, fmt)
    if path is None:
        (stream or sys.stdout).write(text)
    else:
        target = Path(path)
        if target.parent and not target.parent.exists():
            target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text, encoding="utf-8")
        logger.info("报告已写入 %s", target)
    return text


def read_report(path: str) -> Dict[str, Any]:
    """读回 JSON 报告"""
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ReportError(f"cannot read report {path}: {exc}") from exc
    Report.from_dict(data)
    return data


def read_csv(path: str) -> List[Dict[str, str]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))
