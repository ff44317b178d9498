#!/usr/bin/env python3
"""
分析模块
Φ 扫描、收敛阶拟合、反例证书与完整的阶律验证
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from geometry import ball_volume, sphere_area
from perturbation import (
    DEFAULT_EPS_CAP_RATIO, DEFAULT_SERIES_POWERS, DEFAULT_SERIES_U1, PerturbedSphere,
    default_ladder, defect_ladder, enclosed_volume_flux, enclosed_volume_radial,
    gphi_series_check, noise_floor, surface_area, volume_coefficient_analytic,
    volume_gap_coefficient,
)
from quadrature import DEFAULT_TOL
from task_pool import parallel_map, resolve_threads
from warp_model import (
    DEFAULT_GRID_SIZE, PhiProfile, WarpSpec, build_phi_profile, phi_stability,
)

logger = logging.getLogger(__name__)

DEFAULT_SLOPE_TOLERANCE = 0.15
DEFAULT_PHI_THRESHOLD = 1e-12
DEFAULT_AGREEMENT_TOL = 1e-8
SIGN_LAW_THRESHOLD = 1e-6
COEFFICIENT_RTOL = 1e-3
MIN_FIT_POINTS = 3


class ConvergenceError(ArithmeticError):
    """可用于拟合的阶梯点太少"""


class CertificationRefused(Exception):
    """Φ(r) ≥ -阈值，此处不预测反例"""

    def __init__(self, r: float, phi: float, threshold: float):
        super().__init__(f"Phi({r:.17g}) = {phi:.17g} is not below -{threshold:g}; "
                         f"no counterexample is predicted at this radius")
        self.r = r
        self.phi = phi
        self.threshold = threshold


class CertificationFailed(ArithmeticError):
    """证书的某个不变量不成立"""


class OrderMode(Enum):
    """阶检查模式"""
    EXACT = "exact"
    AT_LEAST = "at_least"


# ---------------------------------------------------------------------------
# 收敛阶
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceReport:
    """对数-对数最小二乘的收敛阶报告"""
    quantity: str
    ladder: List[float]
    defects: List[float]
    expected: float
    mode: OrderMode
    tolerance: float
    noise_floor: float
    usable: int
    slope: Optional[float] = None
    residual: Optional[float] = None
    exact: bool = False
    passed: bool = False

    def to_dict(self) -> Dict[str, object]:
        return {
            "quantity": self.quantity,
            "ladder": list(self.ladder),
            "defects": list(self.defects),
            "expected": self.expected,
            "mode": self.mode.value,
            "tolerance": self.tolerance,
            "noise_floor": self.noise_floor,
            "usable": self.usable,
            "slope": self.slope,
            "residual": self.residual,
            "exact": self.exact,
            "passed": self.passed,
        }


def fit_order(points: Sequence[Tuple[float, float]], expected: float,
              mode: OrderMode = OrderMode.EXACT, tolerance: float = DEFAULT_SLOPE_TOLERANCE,
              scale: float = 1.0, quantity: str = "defect") -> ConvergenceReport:
    """
    拟合 log(defect) = p·log(ε) + C

    低于噪声下限的点不参与拟合；全部点都低于下限时按精确相等处理并通过。
    AT_LEAST 模式下，若只有前几个（最大的 ε）点高于下限、其余都已落入下限，
    说明缺陷下降得比拟合所需还快，同样按精确相等通过；EXACT 模式此时仍报错
    """
    mode = OrderMode(mode)
    ordered = sorted(((float(e), float(d)) for e, d in points), key=lambda p: -p[0])
    ladder = [e for e, _ in ordered]
    defects = [d for _, d in ordered]
    if any(e <= 0.0 for e in ladder):
        raise ValueError("ladder values must be positive")
    if any(a <= b for a, b in zip(ladder, ladder[1:])):
        raise ValueError("ladder values must be distinct")
    if any(d < 0.0 or not math.isfinite(d) for d in defects):
        raise ValueError("defects must be finite and non-negative")

    floor = noise_floor(scale)
    usable = [(e, d) for e, d in ordered if d > floor]
    report = ConvergenceReport(quantity=quantity, ladder=ladder, defects=defects, expected=float(expected),
                               mode=mode, tolerance=tolerance, noise_floor=floor, usable=len(usable))
    if not usable:
        report.exact = True
        report.passed = True
        logger.debug("%s：全部缺陷低于噪声下限 %.3e，按精确相等通过", quantity, floor)
        return report
    if len(usable) < MIN_FIT_POINTS:
        dropped_tail = len(usable) < len(ordered) and usable == ordered[:len(usable)]
        if mode is OrderMode.AT_LEAST and dropped_tail:
            report.exact = True
            report.passed = True
            logger.debug("%s：ε ≤ %.3e 的缺陷已低于噪声下限 %.3e，按精确相等通过",
                         quantity, ordered[len(usable)][0], floor)
            return report
        raise ConvergenceError(f"{quantity}: only {len(usable)} ladder points above the noise floor "
                               f"{floor:.3e}, need {MIN_FIT_POINTS}")

    log_eps = np.log([e for e, _ in usable])
    log_defect = np.log([d for _, d in usable])
    coeffs = np.polyfit(log_eps, log_defect, 1)
    report.slope = float(coeffs[0])
    report.residual = float(np.sqrt(np.mean((np.polyval(coeffs, log_eps) - log_defect) ** 2)))
    if mode is OrderMode.EXACT:
        report.passed = abs(report.slope - expected) <= tolerance
    else:
        report.passed = report.slope >= expected - tolerance
    logger.debug("%s：斜率 %.4f（期望 %s %.1f）", quantity, report.slope, mode.value, expected)
    return report


# ---------------------------------------------------------------------------
# Φ 扫描
# ---------------------------------------------------------------------------

def scan_phi(spec: WarpSpec, interval: Optional[Tuple[float, float]] = None,
             grid_size: int = DEFAULT_GRID_SIZE, tol: float = 0.0,
             threads: Optional[int] = None) -> PhiProfile:
    """在网格上并行计算 Φ，按网格顺序汇总后细化违反区间"""
    count = resolve_threads(threads)

    def evaluator(radii: np.ndarray) -> np.ndarray:
        chunks = np.array_split(radii, max(1, min(count, len(radii))))
        parts = parallel_map(lambda chunk: np.asarray(phi_stability(spec, chunk), dtype=float), chunks, count)
        return np.concatenate(parts)

    profile = build_phi_profile(spec, interval, grid_size, tol, evaluator=evaluator)
    logger.info("Φ 扫描 [%.6g, %.6g]，%d 点，违反区间 %d 个", profile.radii[0], profile.radii[-1],
                len(profile.radii), len(profile.violations))
    return profile


# ---------------------------------------------------------------------------
# 反例证书
# ---------------------------------------------------------------------------

@dataclass
class CounterexampleCertificate:
    """Area(Y) 与测地球面高阶一致而 Vol(M_ε) > Vol(B(r)) 的可复核记录"""
    spec: Dict[str, object]
    r: float
    phi: float
    eps: float
    ball_volume: float
    flux_volume: float
    radial_volume: float
    volume_gap: float
    c_analytic: float
    predicted_gap: float
    prediction_error: float
    area_defect: float
    area_defect_ratio: float
    tolerances: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, object]:
        return {
            "spec": dict(self.spec),
            "r": self.r,
            "phi": self.phi,
            "eps": self.eps,
            "ball_volume": self.ball_volume,
            "flux_volume": self.flux_volume,
            "radial_volume": self.radial_volume,
            "volume_gap": self.volume_gap,
            "c_analytic": self.c_analytic,
            "predicted_gap": self.predicted_gap,
            "prediction_error": self.prediction_error,
            "area_defect": self.area_defect,
            "area_defect_ratio": self.area_defect_ratio,
            "tolerances": dict(self.tolerances),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> "CounterexampleCertificate":
        return cls(**{key: data[key] for key in (
            "spec", "r", "phi", "eps", "ball_volume", "flux_volume", "radial_volume", "volume_gap",
            "c_analytic", "predicted_gap", "prediction_error", "area_defect", "area_defect_ratio")},
            tolerances=dict(data.get("tolerances", {})))


def certify(spec: WarpSpec, r: float, eps: float, phi_threshold: float = DEFAULT_PHI_THRESHOLD,
            agreement_tol: float = DEFAULT_AGREEMENT_TOL, eps_cap_ratio: float = DEFAULT_EPS_CAP_RATIO,
            tol: float = DEFAULT_TOL) -> CounterexampleCertificate:
    """
    在半径 r 处构造反例证书

    Raises:
        CertificationRefused: Φ(r) ≥ -phi_threshold
        CertificationFailed: 体积差非正或两种体积不一致
    """
    r = float(r)
    phi = float(phi_stability(spec, r))
    if phi >= -phi_threshold:
        raise CertificationRefused(r, phi, phi_threshold)

    ps = PerturbedSphere(spec, r, eps, include_h1=True, eps_cap_ratio=eps_cap_ratio)
    ball = ball_volume(spec, r, tol)
    flux = enclosed_volume_flux(ps, tol=tol)
    radial = enclosed_volume_radial(ps, tol=tol)
    gap = flux - ball
    c_analytic = volume_coefficient_analytic(spec, r)
    predicted = c_analytic * ps.eps ** 2
    round_area = sphere_area(spec, r)
    area_defect = abs(surface_area(ps, tol=tol) - round_area)

    certificate = CounterexampleCertificate(
        spec=spec.describe(), r=r, phi=phi, eps=ps.eps, ball_volume=ball, flux_volume=flux,
        radial_volume=radial, volume_gap=gap, c_analytic=c_analytic, predicted_gap=predicted,
        prediction_error=abs(gap - predicted) / abs(predicted),
        area_defect=area_defect, area_defect_ratio=area_defect / (ps.eps ** 3 * round_area),
        tolerances={"phi_threshold": phi_threshold, "agreement_tol": agreement_tol,
                    "quadrature_tol": tol, "eps_cap_ratio": eps_cap_ratio},
    )
    if gap <= 0.0:
        raise CertificationFailed(f"volume gap {gap:.6e} is not positive at r={r}, eps={eps}")
    if abs(flux - radial) > agreement_tol * max(1.0, abs(flux)):
        raise CertificationFailed(f"flux volume {flux:.17g} and radial volume {radial:.17g} disagree")
    logger.info("证书 r=%.6g ε=%.6g：体积差 %.6e，预测误差 %.3e", r, eps, gap, certificate.prediction_error)
    return certificate


# ---------------------------------------------------------------------------
# 验证组
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    """单项检查结果"""
    name: str
    passed: bool
    detail: Dict[str, object] = field(default_factory=dict)
    note: str = ""

    def to_dict(self) -> Dict[str, object]:
        return {"name": self.name, "passed": self.passed, "note": self.note, "detail": self.detail}


@dataclass
class VerificationReport:
    """阶律验证组的汇总"""
    spec: Dict[str, object]
    r: float
    phi: float
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def to_dict(self) -> Dict[str, object]:
        return {
            "spec": dict(self.spec),
            "r": self.r,
            "phi": self.phi,
            "passed": self.passed,
            "checks": [check.to_dict() for check in self.checks],
        }


def _order_check(name: str, points, expected: float, mode: OrderMode, tolerance: float,
                 scale: float) -> CheckResult:
    try:
        report = fit_order(points, expected, mode, tolerance, scale, name)
    except ConvergenceError as exc:
        return CheckResult(name=name, passed=False, detail={"points": [list(p) for p in points]}, note=str(exc))
    note = "exact equality (defects reach the noise floor)" if report.exact else ""
    return CheckResult(name=name, passed=report.passed, detail=report.to_dict(), note=note)


def run_verification_suite(spec: WarpSpec, r: float, ladder: Optional[Sequence[float]] = None,
                           series_ladder: Optional[Sequence[float]] = None,
                           u1: float = DEFAULT_SERIES_U1, tolerance: float = DEFAULT_SLOPE_TOLERANCE,
                           agreement_tol: float = DEFAULT_AGREEMENT_TOL,
                           eps_cap_ratio: float = DEFAULT_EPS_CAP_RATIO, tol: float = DEFAULT_TOL,
                           threads: Optional[int] = None) -> VerificationReport:
    """
    完整的阶律检查：r(ε)、φ(ε) 展开，两种支撑函数一致性，有无 h¹ 的等距缺陷，
    面积缺陷，体积两种算法一致性，体积二阶系数，体积差符号与阶，g·φ 展开
    """
    r = float(r)
    ladder = default_ladder(r) if ladder is None else np.asarray(ladder, dtype=float)
    if series_ladder is None:
        series_ladder = default_ladder(r, *DEFAULT_SERIES_POWERS)
    ps = PerturbedSphere(spec, r, 0.0, include_h1=True, eps_cap_ratio=eps_cap_ratio)
    bare = ps.without_h1()
    phi = float(phi_stability(spec, r))
    round_area = sphere_area(spec, r)
    report = VerificationReport(spec=spec.describe(), r=r, phi=phi)
    exact, at_least = OrderMode.EXACT, OrderMode.AT_LEAST

    plans = [
        ("radial_expansion", ps, "radial_expansion", 3.0, at_least, r),
        ("support_expansion", ps, "support_expansion", 3.0, at_least, r),
        ("support_agreement", ps, "support_agreement", 3.0, at_least, r),
        ("isometry_without_h1", bare, "isometry", 2.0, exact, r ** 2),
        ("isometry_with_h1", ps, "isometry", 3.0, at_least, r ** 2),
        ("area_defect", ps, "area", 3.0, at_least, round_area),
    ]
    ladders = parallel_map(lambda plan: defect_ladder(plan[1], plan[2], ladder, u1), plans, threads)
    for (name, _, _, expected, mode, scale), points in zip(plans, ladders):
        report.checks.append(_order_check(name, points, expected, mode, tolerance, scale))

    gap_fit = volume_gap_coefficient(ps, ladder, threads, tol)
    report.checks.append(CheckResult(
        name="volume_oracle_agreement",
        passed=gap_fit.oracle_disagreement <= agreement_tol,
        detail={"max_relative_disagreement": gap_fit.oracle_disagreement, "tolerance": agreement_tol}))
    report.checks.append(CheckResult(
        name="volume_coefficient",
        passed=gap_fit.relative_discrepancy <= COEFFICIENT_RTOL,
        detail=gap_fit.to_dict(),
        note="all gaps below the noise floor" if gap_fit.noise_limited else ""))

    smallest = int(np.argmin(gap_fit.ladder))
    if abs(phi) > SIGN_LAW_THRESHOLD:
        gap = float(gap_fit.gaps[smallest])
        report.checks.append(CheckResult(
            name="gap_sign", passed=bool(np.sign(gap) == -np.sign(phi)),
            detail={"eps": float(gap_fit.ladder[smallest]), "gap": gap, "phi": phi}))
        gap_expected, gap_mode = 2.0, exact
    else:
        report.checks.append(CheckResult(name="gap_sign", passed=True, detail={"phi": phi},
                                         note=f"|Phi| <= {SIGN_LAW_THRESHOLD:g}, sign law not applicable"))
        gap_expected, gap_mode = 3.0, at_least
    gap_points = [(float(e), abs(float(g))) for e, g in zip(gap_fit.ladder, gap_fit.gaps)]
    report.checks.append(_order_check("gap_order", gap_points, gap_expected, gap_mode, tolerance,
                                      gap_fit.ball_volume))

    series = gphi_series_check(ps, u1, series_ladder, tol)
    report.checks.append(CheckResult(name="gphi_series", passed=series.passed, detail=series.to_dict()))

    failed = [check.name for check in report.checks if not check.passed]
    logger.info("验证组 r=%.6g：%d 项，失败 %s", r, len(report.checks), failed or "无")
    return report
