#!/usr/bin/env python3
"""
翘曲积空间模型
表示度量 ds² = dr²/f²(r) + r²·dS²，计算稳定性函数 Φ(r) 并判断条件 Φ(r) ≥ 0
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
from scipy.optimize import bisect

from expression_parser import (
    EvaluationError, Expression, bind_check, differentiate, evaluate, parse, to_text,
)

logger = logging.getLogger(__name__)

DEFAULT_GRID_SIZE = 512
DEFAULT_BISECT_REL_TOL = 1e-10
VALIDATION_POINTS = 2048
DEFAULT_INTERVAL = (0.05, 10.0)

Number = Union[float, np.ndarray]


class WarpSpecError(ValueError):
    """度量描述无效（f ≤ 0、区间错误、维数错误等）"""


class ConditionStatus(Enum):
    """条件判定结果"""
    HOLDS = "HOLDS"
    VIOLATED = "VIOLATED"


@dataclass(frozen=True)
class WarpSpec:
    """
    翘曲函数 f（或 f²）与维数、有效区间

    n 为超曲面维数（外围空间为 n+1 维）；anchor 为体积积分的下限，
    默认 0，表达式在 (0, r] 上无效时（如 AdS）取 r_min
    """
    expression: Expression
    source_text: str
    is_squared: bool
    parameters: Tuple[Tuple[str, float], ...]
    n: int
    r_min: float
    r_max: float
    anchor: float = 0.0
    name: str = "custom"
    derivative: Expression = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise WarpSpecError(f"dimension n must be a positive integer, got {self.n!r}")
        if not (0.0 < self.r_min < self.r_max) or not np.isfinite(self.r_max):
            raise WarpSpecError(f"invalid validity interval [{self.r_min}, {self.r_max}]")
        if not (0.0 <= self.anchor <= self.r_min):
            raise WarpSpecError(f"anchor {self.anchor} must lie in [0, r_min]")
        try:
            bind_check(self.expression, self.bindings)
        except EvaluationError as exc:
            raise WarpSpecError(str(exc)) from exc
        object.__setattr__(self, "derivative", differentiate(self.expression))
        grid = np.linspace(self.r_min, self.r_max, VALIDATION_POINTS)
        self.f(grid)

    @property
    def bindings(self) -> Dict[str, float]:
        return dict(self.parameters)

    @property
    def form(self) -> str:
        return "f2" if self.is_squared else "f"

    def _raw(self, r: Number) -> Number:
        try:
            return evaluate(self.expression, r, self.bindings)
        except EvaluationError as exc:
            raise WarpSpecError(f"cannot evaluate {self.form}={self.source_text}: {exc}") from exc

    def _raw_prime(self, r: Number) -> Number:
        try:
            return evaluate(self.derivative, r, self.bindings)
        except EvaluationError as exc:
            raise WarpSpecError(f"cannot evaluate d/dr of {self.source_text}: {exc}") from exc

    def f_squared(self, r: Number) -> Number:
        """f²(r)，要求处处为正"""
        raw = self._raw(r)
        value = raw if self.is_squared else raw * raw
        if np.any(np.asarray(raw) <= 0.0):
            bad = np.atleast_1d(np.asarray(r, dtype=float))[np.atleast_1d(np.asarray(raw)) <= 0.0]
            symbol = "f²" if self.is_squared else "f"
            raise WarpSpecError(f"{symbol} <= 0 at r={bad[0]:.17g} for {self.source_text}")
        return value

    def f(self, r: Number) -> Number:
        value = self.f_squared(r)
        return np.sqrt(value) if self.is_squared else self._raw(r)

    def f_prime(self, r: Number) -> Number:
        """f′(r)；平方形式下 f′ = (f²)′/(2f)"""
        if self.is_squared:
            return self._raw_prime(r) / (2.0 * self.f(r))
        return self._raw_prime(r)

    def f_times_f_prime(self, r: Number) -> Number:
        """f·f′，平方形式下直接取 (f²)′/2"""
        if self.is_squared:
            self.f_squared(r)
            return 0.5 * self._raw_prime(r)
        return self.f(r) * self._raw_prime(r)

    def contains(self, r: Number) -> bool:
        values = np.asarray(r, dtype=float)
        slack = 1e-12 * self.r_max
        return bool(np.all((values >= self.r_min - slack) & (values <= self.r_max + slack)))

    def describe(self) -> Dict[str, object]:
        """可序列化的完整输入描述"""
        return {
            "name": self.name,
            "form": self.form,
            "expression": self.source_text,
            "parameters": self.bindings,
            "n": int(self.n),
            "r_min": self.r_min,
            "r_max": self.r_max,
            "anchor": self.anchor,
        }


def make_warp_spec(text: str, is_squared: bool = True, parameters: Optional[Mapping[str, float]] = None,
                   n: int = 2, r_min: float = DEFAULT_INTERVAL[0], r_max: float = DEFAULT_INTERVAL[1],
                   anchor: float = 0.0, name: str = "custom") -> WarpSpec:
    """从表达式文本构造 WarpSpec"""
    expression = parse(text)
    bound = tuple(sorted((key, float(value)) for key, value in (parameters or {}).items()))
    return WarpSpec(expression=expression, source_text=text, is_squared=is_squared,
                    parameters=bound, n=n, r_min=float(r_min), r_max=float(r_max),
                    anchor=float(anchor), name=name)


# ---------------------------------------------------------------------------
# 预置度量
# ---------------------------------------------------------------------------

PRESETS: Dict[str, Dict[str, object]] = {
    "euclidean": {"text": "1", "is_squared": False, "defaults": {}},
    "spaceform": {"text": "1 + kappa*r^2", "is_squared": True, "defaults": {"kappa": 1.0}},
    "ads": {"text": "1 - m/r + kappa*r^2", "is_squared": True, "defaults": {"m": 1.0, "kappa": 1.0}},
    "paper": {"text": "1 + m/(r+1)", "is_squared": True, "defaults": {"m": 1.0}},
}


def _ads_horizon(m: float, kappa: float) -> float:
    """f² = 1 - m/r + κr² 的最大正根"""
    if m <= 0.0:
        return 0.0
    func = lambda r: r + kappa * r ** 3 - m  # noqa: E731  r·f² 与 f² 同号
    upper = m
    return float(bisect(func, 0.0, upper, xtol=1e-15 * max(1.0, m)))


def make_preset(name: str, n: int = 2, parameters: Optional[Mapping[str, float]] = None,
                r_min: Optional[float] = None, r_max: Optional[float] = None) -> WarpSpec:
    """
    构造预置度量：euclidean、spaceform(κ)、ads(m, κ)、paper(m)
    """
    if name not in PRESETS:
        raise WarpSpecError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    preset = PRESETS[name]
    values = dict(preset["defaults"])
    for key, value in (parameters or {}).items():
        if key not in values:
            raise WarpSpecError(f"preset {name!r} has no parameter {key!r}")
        values[key] = float(value)

    lo, hi = DEFAULT_INTERVAL
    anchor = 0.0
    if name == "spaceform" and values["kappa"] < 0.0:
        hi = min(hi, 0.95 / np.sqrt(-values["kappa"]))
    if name == "ads":
        if values["m"] < 0.0 or values["kappa"] < 0.0:
            raise WarpSpecError("ads preset needs m >= 0 and kappa >= 0")
        horizon = _ads_horizon(values["m"], values["kappa"])
        if horizon > 0.0:
            lo = 1.05 * horizon
            anchor = lo
        logger.debug("ads 视界 r_h=%.17g，有效区间起点 %.17g", horizon, lo)
    if r_min is not None:
        lo = float(r_min)
        if anchor > 0.0:
            anchor = min(anchor, lo)
    if r_max is not None:
        hi = float(r_max)
    return make_warp_spec(str(preset["text"]), bool(preset["is_squared"]), values, n=n,
                          r_min=lo, r_max=hi, anchor=anchor, name=name)


# ---------------------------------------------------------------------------
# f、Φ 与条件
# ---------------------------------------------------------------------------

def _check_inside(spec: WarpSpec, r: Number) -> None:
    if not spec.contains(r):
        raise WarpSpecError(f"r={r} outside validity interval [{spec.r_min}, {spec.r_max}]")


def f_value(spec: WarpSpec, r: Number) -> Number:
    _check_inside(spec, r)
    return spec.f(r)


def f_prime(spec: WarpSpec, r: Number) -> Number:
    _check_inside(spec, r)
    return spec.f_prime(r)


def phi_stability(spec: WarpSpec, r: Number) -> Number:
    """Φ(r) = f f′/r + (1 - f²)/r²"""
    _check_inside(spec, r)
    r = np.asarray(r, dtype=float) if np.ndim(r) else float(r)
    return spec.f_times_f_prime(r) / r + (1.0 - spec.f_squared(r)) / r ** 2


@dataclass(frozen=True)
class AlternateFormCondition:
    """
    ds² = dr̃² + φ²(r̃)dS² 形式下的量：φ = r，φ′ = f，φ″ = f f′
    value = (φ′)² - φ″φ = f² - r f f′
    """
    r: float
    phi_prime: float
    phi_double_prime: float
    value: float

    @property
    def upper_holds(self) -> bool:
        return self.value <= 1.0

    @property
    def lower_holds(self) -> bool:
        return self.value >= 0.0

    @property
    def r_squared_phi(self) -> float:
        """由恒等式 r²Φ = 1 - value 得到的 r²Φ"""
        return 1.0 - self.value


def alternate_form_value(spec: WarpSpec, r: float) -> AlternateFormCondition:
    _check_inside(spec, r)
    r = float(r)
    ff_prime = float(spec.f_times_f_prime(r))
    value = float(spec.f_squared(r)) - r * ff_prime
    return AlternateFormCondition(r=r, phi_prime=float(spec.f(r)), phi_double_prime=ff_prime, value=value)


@dataclass
class PhiProfile:
    """Φ 在网格上的采样及违反区间"""
    radii: np.ndarray
    values: np.ndarray
    violations: List[Tuple[float, float]]
    tol: float = 0.0

    @property
    def holds(self) -> bool:
        return not self.violations

    def to_dict(self) -> Dict[str, object]:
        return {
            "radii": [float(x) for x in self.radii],
            "phi": [float(x) for x in self.values],
            "violations": [[lo, hi] for lo, hi in self.violations],
            "tol": self.tol,
        }


def refine_violations(func: Callable[[float], float], radii: np.ndarray, values: np.ndarray,
                      tol: float = 0.0, bisect_tol: Optional[float] = None) -> List[Tuple[float, float]]:
    """
    找出 Φ < -tol 的极大连续网格段，并用二分法把两端的符号变化细化到 bisect_tol
    """
    if bisect_tol is None:
        bisect_tol = DEFAULT_BISECT_REL_TOL * (radii[-1] - radii[0])
    shifted = lambda x: float(func(x)) + tol  # noqa: E731
    bad = values < -tol
    intervals: List[Tuple[float, float]] = []
    i = 0
    count = len(radii)
    while i < count:
        if not bad[i]:
            i += 1
            continue
        j = i
        while j + 1 < count and bad[j + 1]:
            j += 1
        left = float(radii[i]) if i == 0 else float(bisect(shifted, radii[i - 1], radii[i], xtol=bisect_tol))
        right = float(radii[j]) if j == count - 1 else float(bisect(shifted, radii[j], radii[j + 1], xtol=bisect_tol))
        intervals.append((min(left, float(radii[i])), max(right, float(radii[j]))))
        i = j + 1
    return intervals


def build_phi_profile(spec: WarpSpec, interval: Optional[Tuple[float, float]] = None,
                      grid_size: int = DEFAULT_GRID_SIZE, tol: float = 0.0,
                      evaluator: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> PhiProfile:
    lo, hi = interval if interval is not None else (spec.r_min, spec.r_max)
    if not (lo < hi):
        raise WarpSpecError(f"empty interval [{lo}, {hi}]")
    _check_inside(spec, np.array([lo, hi]))
    if grid_size < 2:
        raise WarpSpecError("grid_size must be at least 2")
    if tol < 0.0:
        raise WarpSpecError("tol must be non-negative")
    radii = np.linspace(lo, hi, grid_size)
    values = evaluator(radii) if evaluator is not None else phi_stability(spec, radii)
    single = lambda x: float(phi_stability(spec, x))  # noqa: E731
    violations = refine_violations(single, radii, values, tol, DEFAULT_BISECT_REL_TOL * (hi - lo))
    return PhiProfile(radii=radii, values=np.asarray(values, dtype=float), violations=violations, tol=tol)


@dataclass
class ConditionReport:
    """条件 (1-f²)/r² + f f′/r ≥ 0 的判定报告"""
    status: ConditionStatus
    interval: Tuple[float, float]
    grid_size: int
    tol: float
    violations: List[Tuple[float, float]]
    min_phi: float
    argmin_r: float

    def to_dict(self) -> Dict[str, object]:
        return {
            "status": self.status.value,
            "interval": list(self.interval),
            "grid_size": self.grid_size,
            "tol": self.tol,
            "violations": [[lo, hi] for lo, hi in self.violations],
            "min_phi": self.min_phi,
            "argmin_r": self.argmin_r,
        }


def report_from_profile(profile: PhiProfile) -> ConditionReport:
    index = int(np.argmin(profile.values))
    status = ConditionStatus.HOLDS if profile.holds else ConditionStatus.VIOLATED
    return ConditionReport(status=status, interval=(float(profile.radii[0]), float(profile.radii[-1])),
                           grid_size=len(profile.radii), tol=profile.tol,
                           violations=list(profile.violations),
                           min_phi=float(profile.values[index]), argmin_r=float(profile.radii[index]))


def glw_condition(spec: WarpSpec, interval: Optional[Tuple[float, float]] = None,
                  grid_size: int = DEFAULT_GRID_SIZE, tol: float = 0.0) -> ConditionReport:
    """在区间上扫描 Φ；Φ ≥ -tol 处处成立则 HOLDS，否则 VIOLATED 并给出违反区间"""
    profile = build_phi_profile(spec, interval, grid_size, tol)
    report = report_from_profile(profile)
    logger.info("条件判定 %s：%s，违反区间 %d 个", to_text(spec.expression), report.status.value,
                len(report.violations))
    return report
