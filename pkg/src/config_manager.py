#!/usr/bin/env python3
"""
配置管理模块
默认参数、用户配置文件、命令行运行配置与日志设置
"""

import copy
import json
import logging
import math
import os
import shutil
import sys
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

CONFIG_DIR_ENV = "WARPISO_CONFIG_DIR"
OUTPUT_FORMATS = ("json", "csv", "text")

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """配置无效"""


class ConfigManager:
    """配置管理器类"""

    def __init__(self, config_dir: Optional[str] = None):
        # 设置配置目录：参数 > 环境变量 > ~/.warpiso
        if config_dir:
            self.config_dir = Path(config_dir)
        elif os.environ.get(CONFIG_DIR_ENV):
            self.config_dir = Path(os.environ[CONFIG_DIR_ENV])
        else:
            self.config_dir = Path.home() / ".warpiso"

        self.main_config_file = self.config_dir / "config.json"

        # 默认配置
        self.default_config = {
            "version": "1.0",
            "scan": {
                "grid_size": 512,
                "tol": 0.0
            },
            "quadrature": {
                "tol": 1e-12
            },
            "perturbation": {
                "eps_cap_ratio": 0.1,
                "ladder_first": 4,
                "ladder_last": 10,
                "slope_tolerance": 0.15,
                "series_first": 5,
                "series_last": 12,
                "series_u1": math.pi / 4
            },
            "certify": {
                "phi_threshold": 1e-12,
                "agreement_tol": 1e-8
            },
            "output": {
                "format": "text"
            },
            "advanced": {
                "log_level": "INFO",
                "threads": None,
                "backup_config": True,
                "backup_count": 5
            }
        }

        self.config: Dict[str, Any] = {}
        self.load_main_config()

    def load_main_config(self) -> bool:
        """加载主配置文件；文件不存在时使用默认值，不写盘"""
        if not self.main_config_file.exists():
            self.config = copy.deepcopy(self.default_config)
            return True
        try:
            with open(self.main_config_file, 'r', encoding='utf-8') as f:
                loaded_config = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read {self.main_config_file}: {e}") from e
        if not isinstance(loaded_config, dict):
            raise ConfigError(f"{self.main_config_file} must contain a JSON object")

        # 合并默认配置和加载的配置
        self.config = self._merge_configs(self.default_config, loaded_config)
        logger.debug("已加载配置 %s", self.main_config_file)
        return True

    def save_main_config(self) -> bool:
        """保存主配置文件"""
        try:
            self.config_dir.mkdir(parents=True, exist_ok=True)
            if self.get("advanced.backup_config", True):
                self._backup_config_file(self.main_config_file)

            config_to_save = copy.deepcopy(self.config)
            config_to_save["last_saved"] = datetime.now().isoformat()

            with open(self.main_config_file, 'w', encoding='utf-8') as f:
                json.dump(config_to_save, f, ensure_ascii=False, indent=2)
            return True
        except OSError as e:
            logger.error("保存主配置失败: %s", e)
            return False

    def get(self, key_path: str, default: Any = None) -> Any:
        """获取配置值（支持点分隔的路径）"""
        value: Any = self.config
        for key in key_path.split('.'):
            if isinstance(value, dict) and key in value:
                value = value[key]
            else:
                return default
        return value

    def set(self, key_path: str, value: Any, auto_save: bool = False) -> bool:
        """设置配置值（支持点分隔的路径）"""
        keys = key_path.split('.')
        current = self.config
        for key in keys[:-1]:
            if not isinstance(current.get(key), dict):
                current[key] = {}
            current = current[key]
        current[keys[-1]] = value
        if auto_save:
            return self.save_main_config()
        return True

    def reset_to_defaults(self, save: bool = False) -> bool:
        """重置为默认配置"""
        self.config = copy.deepcopy(self.default_config)
        if save:
            return self.save_main_config()
        return True

    def _merge_configs(self, default: Dict, loaded: Dict) -> Dict:
        """合并配置（深度合并）"""
        result = copy.deepcopy(default)

        for key, value in loaded.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                result[key] = self._merge_configs(result[key], value)
            else:
                result[key] = value

        return result

    def _backup_config_file(self, config_file: Path):
        """备份配置文件，只保留最近 backup_count 份"""
        if not config_file.exists():
            return
        backup_dir = self.config_dir / "backups"
        backup_dir.mkdir(exist_ok=True)
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S_%f")
        shutil.copy2(config_file, backup_dir / f"{config_file.stem}_{timestamp}.json")

        max_backups = int(self.get("advanced.backup_count", 5))
        backups = sorted(backup_dir.glob(f"{config_file.stem}_*.json"), key=lambda p: p.name, reverse=True)
        for old_backup in backups[max_backups:]:
            old_backup.unlink()

    def get_config_summary(self) -> Dict:
        """获取配置摘要"""
        return {
            "config_dir": str(self.config_dir),
            "version": self.config.get("version", "unknown"),
            "grid_size": self.get("scan.grid_size"),
            "quadrature_tol": self.get("quadrature.tol"),
            "eps_cap_ratio": self.get("perturbation.eps_cap_ratio"),
            "output_format": self.get("output.format"),
            "log_level": self.get("advanced.log_level"),
            "threads": self.get("advanced.threads"),
        }


# ---------------------------------------------------------------------------
# 运行配置
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    """一次命令行运行的完整输入"""
    command: str
    preset: Optional[str] = None
    expression: Optional[str] = None
    is_squared: bool = True
    parameters: Dict[str, float] = field(default_factory=dict)
    n: int = 2
    r_min: Optional[float] = None
    r_max: Optional[float] = None
    anchor: Optional[float] = None
    radii: List[float] = field(default_factory=list)
    eps: Optional[float] = None
    ladder_powers: Tuple[int, int] = (4, 10)
    series_powers: Tuple[int, int] = (5, 12)
    series_u1: float = math.pi / 4
    grid_size: int = 512
    scan_tol: float = 0.0
    quadrature_tol: float = 1e-12
    slope_tolerance: float = 0.15
    eps_cap_ratio: float = 0.1
    phi_threshold: float = 1e-12
    agreement_tol: float = 1e-8
    threads: Optional[int] = None
    output: Optional[str] = None
    output_format: str = "text"
    log_level: str = "INFO"

    @classmethod
    def from_sources(cls, command: str, args: Any, manager: ConfigManager) -> "RunConfig":
        """argparse 结果优先，其次配置文件"""
        def pick(name: str, key_path: str):
            value = getattr(args, name, None)
            return manager.get(key_path) if value is None else value

        ladder = getattr(args, "ladder", None) or (manager.get("perturbation.ladder_first"),
                                                   manager.get("perturbation.ladder_last"))
        parameters = dict(getattr(args, "params", None) or {})
        radii = getattr(args, "r", None)
        if radii is None:
            radii = []
        elif not isinstance(radii, (list, tuple)):
            radii = [radii]
        config = cls(
            command=command,
            preset=getattr(args, "preset", None),
            expression=getattr(args, "f2", None) or getattr(args, "f", None),
            is_squared=getattr(args, "f", None) is None,
            parameters=parameters,
            n=getattr(args, "n", 2),
            r_min=getattr(args, "r_min", None),
            r_max=getattr(args, "r_max", None),
            anchor=getattr(args, "anchor", None),
            radii=[float(r) for r in radii],
            eps=getattr(args, "eps", None),
            ladder_powers=(int(ladder[0]), int(ladder[1])),
            series_powers=(int(manager.get("perturbation.series_first")),
                           int(manager.get("perturbation.series_last"))),
            series_u1=float(manager.get("perturbation.series_u1")),
            grid_size=int(pick("grid_size", "scan.grid_size")),
            scan_tol=float(pick("tol", "scan.tol")),
            quadrature_tol=float(manager.get("quadrature.tol")),
            slope_tolerance=float(manager.get("perturbation.slope_tolerance")),
            eps_cap_ratio=float(manager.get("perturbation.eps_cap_ratio")),
            phi_threshold=float(manager.get("certify.phi_threshold")),
            agreement_tol=float(manager.get("certify.agreement_tol")),
            threads=manager.get("advanced.threads"),
            output=getattr(args, "out", None),
            output_format=pick("format", "output.format"),
            log_level=pick("log_level", "advanced.log_level"),
        )
        config.validate()
        return config

    @property
    def has_metric(self) -> bool:
        return self.command != "selfcheck"

    def validate(self):
        """检查不变量，失败时抛出 ConfigError"""
        if self.has_metric:
            sources = [self.preset is not None, self.expression is not None]
            if sum(sources) != 1:
                raise ConfigError("exactly one metric source is required: --preset, --f2 or --f")
            if self.preset is not None and self.anchor is not None:
                raise ConfigError("--anchor only applies to custom metrics given by --f2 or --f")
        if self.output_format not in OUTPUT_FORMATS:
            raise ConfigError(f"output format must be one of {', '.join(OUTPUT_FORMATS)}, "
                              f"got {self.output_format!r}")
        for name in ("quadrature_tol", "slope_tolerance", "eps_cap_ratio", "phi_threshold", "agreement_tol"):
            if not getattr(self, name) > 0.0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.scan_tol < 0.0:
            raise ConfigError(f"scan tolerance must be non-negative, got {self.scan_tol}")
        if self.grid_size < 2:
            raise ConfigError(f"grid size must be at least 2, got {self.grid_size}")
        if self.n < 1:
            raise ConfigError(f"dimension n must be positive, got {self.n}")
        if self.ladder_powers[0] > self.ladder_powers[1]:
            raise ConfigError(f"ladder powers must be increasing, got {self.ladder_powers}")
        if self.eps is not None and self.eps < 0.0:
            raise ConfigError(f"eps must be non-negative, got {self.eps}")
        if any(r <= 0.0 for r in self.radii):
            raise ConfigError("radii must be positive")
        if self.output_format == "csv" and self.command not in ("analyze", "ball"):
            raise ConfigError(f"csv output is only available for analyze and ball, not {self.command}")
        if self.log_level.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ConfigError(f"unknown log level {self.log_level!r}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "preset": self.preset,
            "expression": self.expression,
            "is_squared": self.is_squared,
            "parameters": dict(self.parameters),
            "n": self.n,
            "r_min": self.r_min,
            "r_max": self.r_max,
            "anchor": self.anchor,
            "radii": list(self.radii),
            "eps": self.eps,
            "ladder_powers": list(self.ladder_powers),
            "series_powers": list(self.series_powers),
            "series_u1": self.series_u1,
            "grid_size": self.grid_size,
            "scan_tol": self.scan_tol,
            "quadrature_tol": self.quadrature_tol,
            "slope_tolerance": self.slope_tolerance,
            "eps_cap_ratio": self.eps_cap_ratio,
            "phi_threshold": self.phi_threshold,
            "agreement_tol": self.agreement_tol,
            "output_format": self.output_format,
        }


def setup_logging(level: str = "INFO"):
    """日志输出到 stderr"""
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


# 使用示例
if __name__ == "__main__":
    config = ConfigManager()

    summary = config.get_config_summary()
    print("📋 配置摘要:")
    for key, value in summary.items():
        print(f"  {key}: {value}")
