#!/usr/bin/env python3
"""
球面扰动模块
在测地球面 S(r) 上构造扰动曲面 Y(ε)，计算等距缺陷、支撑函数、面积、
两种方法的包围体积，以及体积二阶系数和 g·φ 展开系数
"""

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial

from geometry import (
    GWeights, axisym_integral, ball_volume, g_weight, inverse_metric_apply, metric_components,
    radial_mass, radial_mass_many, sphere_area, unit_sphere_area,
)
from quadrature import DEFAULT_TOL, integrate
from task_pool import parallel_map
from warp_model import WarpSpec, WarpSpecError, phi_stability

logger = logging.getLogger(__name__)

DEFAULT_EPS_CAP_RATIO = 0.1
DEFAULT_LADDER_POWERS = (4, 10)
DEFAULT_SERIES_POWERS = (5, 12)
DEFAULT_SERIES_U1 = math.pi / 4
NOISE_FACTOR = 1e3
PROFILE_POINTS = 513
STAR_CHECK_POINTS = 2049
NORMAL_RESIDUAL_TOL = 1e-10
MIN_GAP_POINTS = 5


class PerturbationError(ValueError):
    """扰动构造或计算失败（ε 超限、根号内为负、法向量退化等）"""


class StarShapeError(PerturbationError):
    """ψ(u₁) 不严格单调，曲面不是星形的"""

    def __init__(self, message: str, u_range: Tuple[float, float]):
        super().__init__(message)
        self.u_range = u_range


def noise_floor(scale: float) -> float:
    """舍入噪声下限：1e3 × 机器精度 × 量的尺度"""
    return NOISE_FACTOR * float(np.finfo(float).eps) * abs(float(scale))


def default_ladder(r: float, first: int = DEFAULT_LADDER_POWERS[0],
                   last: int = DEFAULT_LADDER_POWERS[1]) -> np.ndarray:
    """ε 阶梯 {r·2^-k : k = first … last}，严格递减"""
    if last < first:
        raise ValueError(f"ladder powers must satisfy first <= last, got {first}..{last}")
    return float(r) * 2.0 ** -np.arange(first, last + 1, dtype=float)


def _open_grid(points: int) -> np.ndarray:
    """(-π/2, π/2) 内部的均匀网格，不含两极"""
    return np.linspace(-0.5 * math.pi, 0.5 * math.pi, points + 2)[1:-1]


# ---------------------------------------------------------------------------
# 扰动曲面
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PerturbedSphere:
    """
    Y = r⃗ + (ε + ε²·h¹(sin u₁))·e_{n+1}，h¹(sin u₁) = α sin u₁ / r

    α = (f²(r) - 1) / (2 f²(r))；include_h1 为 False 时去掉 ε² 项
    """
    spec: WarpSpec
    r: float
    eps: float = 0.0
    include_h1: bool = True
    eps_cap_ratio: float = DEFAULT_EPS_CAP_RATIO
    alpha: float = field(init=False)
    base_mass: float = field(init=False, repr=False)

    def __post_init__(self):
        r = float(self.r)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "eps", float(self.eps))
        if not self.spec.contains(r):
            raise WarpSpecError(f"base radius r={r} outside validity interval "
                                f"[{self.spec.r_min}, {self.spec.r_max}]")
        if self.eps < 0.0 or not np.isfinite(self.eps):
            raise PerturbationError(f"eps must be a finite non-negative number, got {self.eps}")
        if self.eps > self.eps_cap * (1.0 + 1e-12):
            raise PerturbationError(f"eps={self.eps} exceeds cap {self.eps_cap} "
                                    f"({self.eps_cap_ratio}·r)")
        if r - self.eps <= self.spec.anchor:
            raise PerturbationError(f"perturbed surface would reach the anchor ball r <= {self.spec.anchor}")
        f2 = float(self.spec.f_squared(r))
        object.__setattr__(self, "alpha", (f2 - 1.0) / (2.0 * f2))
        object.__setattr__(self, "base_mass", radial_mass(self.spec, r))

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def eps_cap(self) -> float:
        return self.eps_cap_ratio * float(self.r)

    @property
    def h1_coefficient(self) -> float:
        """h¹(sin u₁) = h1_coefficient · sin u₁"""
        return self.alpha / self.r if self.include_h1 else 0.0

    def h1(self, sine):
        """h¹(sin u₁)；include_h1 为 False 时恒为 0"""
        return self.h1_coefficient * np.asarray(sine)

    def with_eps(self, eps: float) -> "PerturbedSphere":
        if eps == self.eps:
            return self
        return dataclasses.replace(self, eps=float(eps))

    def without_h1(self) -> "PerturbedSphere":
        return dataclasses.replace(self, include_h1=False)


def _resolve(ps: PerturbedSphere, eps: Optional[float]) -> PerturbedSphere:
    return ps if eps is None else ps.with_eps(eps)


def _sphere_chart(angles: Sequence[float]) -> np.ndarray:
    """递归球坐标：S^k 上的点 (cos a₁·S^{k-1}(a₂…), sin a₁)"""
    if not angles:
        return np.array([1.0])
    head, rest = angles[0], list(angles[1:])
    return np.append(math.cos(head) * _sphere_chart(rest), math.sin(head))


def embed(ps: PerturbedSphere, u1: float, other_angles: Sequence[float] = ()) -> np.ndarray:
    """
    曲面上 (u₁, u₂, …, u_n) 处的点

    Args:
        other_angles: u₂…u_n，不足部分补 0
    """
    others = list(other_angles)
    if len(others) > ps.n - 1:
        raise PerturbationError(f"expected at most {ps.n - 1} extra angles, got {len(others)}")
    others += [0.0] * (ps.n - 1 - len(others))
    point = ps.r * _sphere_chart([float(u1)] + others)
    # 递归坐标中 u₁ 对应最后一维
    point[-1] += ps.eps + ps.eps ** 2 * float(ps.h1(math.sin(u1)))
    return point


# ---------------------------------------------------------------------------
# 代表点 (u₁, 0, …, 0) 上的向量化剖面
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Profile:
    """
    代表点处的解析量；只涉及 e₁ 与 e_{n+1} 两个分量

    其余切向量 ∂Y/∂u_j = r cos u₁·e_{n+2-j} 与 Y、∂Y/∂u₁ 欧氏正交，
    诱导度量为对角阵 diag(G₁₁, r²cos²u₁, …)
    """
    u: np.ndarray
    y_first: np.ndarray
    y_last: np.ndarray
    t_first: np.ndarray
    t_last: np.ndarray
    radius: np.ndarray
    f_squared: np.ndarray
    rho_derivative: np.ndarray
    g11: np.ndarray
    area_density: np.ndarray
    support: np.ndarray
    psi_derivative: np.ndarray


def _profile(ps: PerturbedSphere, u: np.ndarray) -> _Profile:
    u = np.asarray(u, dtype=float)
    r, eps, k = ps.r, ps.eps, ps.h1_coefficient
    sine, cosine = np.sin(u), np.cos(u)
    offset = eps + eps ** 2 * ps.h1(sine)
    offset_prime = eps ** 2 * k * cosine

    y_first = r * cosine
    y_last = r * sine + offset
    t_first = -r * sine
    t_last = r * cosine + offset_prime
    radius = np.hypot(y_first, y_last)
    f2 = ps.spec.f_squared(radius)

    rho_derivative = t_first * y_first + t_last * y_last
    g11 = t_first ** 2 + t_last ** 2 + (1.0 / f2 - 1.0) * rho_derivative ** 2 / radius ** 2
    area_density = np.sqrt(g11) * (r * cosine) ** (ps.n - 1)

    # 余法向量 ξ = (t_last, -t_first) 零化全部切向量
    xi_dot_y = t_last * y_first - t_first * y_last
    xi_norm2 = t_last ** 2 + t_first ** 2
    radial_part = xi_dot_y / radius
    support = np.sqrt(f2) * radius * radial_part / np.sqrt(xi_norm2 + (f2 - 1.0) * radial_part ** 2)

    return _Profile(u=u, y_first=y_first, y_last=y_last, t_first=t_first, t_last=t_last,
                    radius=radius, f_squared=f2, rho_derivative=rho_derivative, g11=g11,
                    area_density=area_density, support=support,
                    psi_derivative=xi_dot_y / radius ** 2)


# ---------------------------------------------------------------------------
# 单点采样
# ---------------------------------------------------------------------------

@dataclass
class SurfaceSample:
    """代表点 (u₁, 0, …, 0) 上的完整几何数据"""
    u1: float
    point: np.ndarray
    radius: float
    rho: float
    tangents: np.ndarray
    normal: np.ndarray
    killing: np.ndarray
    support: float
    induced_metric: np.ndarray
    area_density: float
    orthogonality_residual: float
    normalization_residual: float

    def to_dict(self) -> Dict[str, object]:
        return {
            "u1": self.u1,
            "point": self.point.tolist(),
            "radius": self.radius,
            "rho": self.rho,
            "normal": self.normal.tolist(),
            "support": self.support,
            "area_density": self.area_density,
            "orthogonality_residual": self.orthogonality_residual,
            "normalization_residual": self.normalization_residual,
        }


def representative_tangents(ps: PerturbedSphere, u1: float) -> np.ndarray:
    """∂Y/∂u_i（i = 1…n），按行排列"""
    n, r = ps.n, ps.r
    sine, cosine = math.sin(u1), math.cos(u1)
    tangents = np.zeros((n, n + 1))
    tangents[0, 0] = -r * sine
    tangents[0, n] = r * cosine + ps.eps ** 2 * ps.h1_coefficient * cosine
    for j in range(2, n + 1):
        tangents[j - 1, n + 1 - j] = r * cosine
    return tangents


def sample_surface(ps: PerturbedSphere, u1: float, eps: Optional[float] = None) -> SurfaceSample:
    """
    计算代表点处的嵌入、切向量、外法向、共形 Killing 场与支撑函数

    法向量由切向量矩阵的零空间（SVD）得到，再按翘曲度量升指标并归一化
    """
    ps = _resolve(ps, eps)
    if not (-0.5 * math.pi < u1 < 0.5 * math.pi):
        raise PerturbationError(f"u1={u1} must lie strictly between the poles")
    point = embed(ps, u1)
    tangents = representative_tangents(ps, u1)
    radius = float(np.linalg.norm(point))
    f2 = float(ps.spec.f_squared(radius))
    components = metric_components(f2, point)

    _, singular, vt = np.linalg.svd(tangents)
    if singular[-1] <= 1e-12 * max(1.0, singular[0]):
        raise PerturbationError(f"degenerate tangent basis at u1={u1}")
    covector = vt[-1]
    if covector @ point < 0.0:
        covector = -covector
    raised = inverse_metric_apply(f2, point / radius, covector)
    normal = raised / math.sqrt(raised @ components @ raised)
    if normal @ point <= 0.0:
        raise PerturbationError(f"normal at u1={u1} is not outward")

    killing = math.sqrt(f2) * point
    induced = tangents @ components @ tangents.T
    orthogonality = float(np.max(np.abs(tangents @ components @ normal)))
    normalization = abs(float(normal @ components @ normal) - 1.0)
    if orthogonality > NORMAL_RESIDUAL_TOL * max(1.0, ps.r) or normalization > NORMAL_RESIDUAL_TOL:
        raise PerturbationError(f"normal residuals too large at u1={u1}: "
                                f"{orthogonality:.3e}, {normalization:.3e}")
    return SurfaceSample(u1=float(u1), point=point, radius=radius, rho=0.5 * radius ** 2,
                         tangents=tangents, normal=normal, killing=killing,
                         support=float(killing @ components @ normal),
                         induced_metric=induced,
                         area_density=math.sqrt(float(np.linalg.det(induced))),
                         orthogonality_residual=orthogonality, normalization_residual=normalization)


# ---------------------------------------------------------------------------
# 逐点量
# ---------------------------------------------------------------------------

def radial_expansion(ps: PerturbedSphere, u1, eps: Optional[float] = None):
    """r(ε) 的二阶展开 r + ε sin u₁ + ε²(cos²u₁ + 2α sin²u₁)/(2r)（无 h¹ 时去掉 2α 项）"""
    ps = _resolve(ps, eps)
    sine, cosine = np.sin(u1), np.cos(u1)
    weight = 2.0 * ps.alpha if ps.include_h1 else 0.0
    return ps.r + ps.eps * sine + ps.eps ** 2 * (cosine ** 2 + weight * sine ** 2) / (2.0 * ps.r)


def support_expansion(ps: PerturbedSphere, u1, eps: Optional[float] = None):
    """φ(ε) 的二阶展开 r + ε sin u₁ + αε²/r（无 h¹ 时为 α cos²u₁ ε²/r）"""
    ps = _resolve(ps, eps)
    sine, cosine = np.sin(u1), np.cos(u1)
    weight = sine ** 2 if ps.include_h1 else 0.0
    return ps.r + ps.eps * sine + ps.alpha * ps.eps ** 2 * (cosine ** 2 + weight) / ps.r


def radial_expansion_defect(ps: PerturbedSphere, u1: float, eps: Optional[float] = None) -> float:
    ps = _resolve(ps, eps)
    radius = float(_profile(ps, np.array([u1])).radius[0])
    return abs(radius - float(radial_expansion(ps, u1)))


def support_function(ps: PerturbedSphere, u1: float, eps: Optional[float] = None) -> float:
    """φ = g(X, ν)，X = f(|Y|)·Y"""
    ps = _resolve(ps, eps)
    return float(_profile(ps, np.array([u1])).support[0])


def support_function_via_rho(ps: PerturbedSphere, u1: float, eps: Optional[float] = None) -> float:
    """φ² = 2ρ - |∇ρ|²/f²(r(ε))，|∇ρ|² = (∂ρ/∂u₁)²/r²"""
    ps = _resolve(ps, eps)
    prof = _profile(ps, np.array([u1]))
    radicand = prof.radius[0] ** 2 - prof.rho_derivative[0] ** 2 / (ps.r ** 2 * prof.f_squared[0])
    if radicand < 0.0:
        raise PerturbationError(f"negative radicand {radicand:.3e} in the rho formula at u1={u1}, "
                                f"eps={ps.eps}")
    return math.sqrt(radicand)


def isometry_defect(ps: PerturbedSphere, eps: Optional[float] = None,
                    points: int = PROFILE_POINTS) -> float:
    """
    max_u₁ |G(ε) - r²·(标准度量)|

    诱导度量除 G₁₁ 外与 r²diag(1, cos²u₁, …) 精确一致，缺陷即 |G₁₁ - r²|
    """
    ps = _resolve(ps, eps)
    prof = _profile(ps, _open_grid(points))
    return float(np.max(np.abs(prof.g11 - ps.r ** 2)))


def surface_area(ps: PerturbedSphere, eps: Optional[float] = None, tol: float = DEFAULT_TOL) -> float:
    """ω_{n-1} ∫ sqrt(det G(u₁, 0, …, 0)) du₁"""
    ps = _resolve(ps, eps)
    area = unit_sphere_area(ps.n - 1) * integrate(
        lambda u: _profile(ps, u).area_density, -0.5 * math.pi, 0.5 * math.pi, tol=tol)
    if ps.eps == 0.0:
        # ε = 0 时约化必须给出 ω_n r^n
        exact = sphere_area(ps.spec, ps.r)
        if abs(area - exact) > 1e-10 * exact:
            raise ArithmeticError(f"axisymmetric area reduction failed: {area} vs {exact}")
    return area


def check_star_shaped(ps: PerturbedSphere, eps: Optional[float] = None,
                      points: int = STAR_CHECK_POINTS) -> None:
    """ψ(u₁) = atan2(Y^{n+1}, Y¹) 必须严格递增，且曲面不进入 anchor 球"""
    ps = _resolve(ps, eps)
    u = _open_grid(points)
    prof = _profile(ps, u)
    bad = prof.psi_derivative <= 0.0
    if np.any(bad):
        failing = u[bad]
        raise StarShapeError(f"psi is not monotone for u1 in [{failing.min():.6g}, {failing.max():.6g}]",
                             (float(failing.min()), float(failing.max())))
    if np.min(prof.radius) <= ps.spec.anchor:
        raise PerturbationError(f"surface enters the anchor ball r <= {ps.spec.anchor}")


def _mass(ps: PerturbedSphere, radius: np.ndarray, tol: float) -> np.ndarray:
    return radial_mass_many(ps.spec, radius, ps.r, ps.base_mass, tol=tol)


def enclosed_volume_flux(ps: PerturbedSphere, eps: Optional[float] = None, tol: float = DEFAULT_TOL) -> float:
    """Vol = ω_{n-1} ∫ g(|Y|)·φ·sqrt(det G) du₁"""
    ps = _resolve(ps, eps)
    check_star_shaped(ps)
    n = ps.n

    def integrand(u):
        prof = _profile(ps, u)
        weight = _mass(ps, prof.radius, tol) / prof.radius ** (n + 1)
        return weight * prof.support * prof.area_density

    return unit_sphere_area(n - 1) * integrate(integrand, -0.5 * math.pi, 0.5 * math.pi, tol=tol)


def enclosed_volume_radial(ps: PerturbedSphere, eps: Optional[float] = None, tol: float = DEFAULT_TOL) -> float:
    """Vol = ω_{n-1} ∫ [∫_anchor^{R} t^n/f dt]·cos^{n-1}ψ·ψ′ du₁"""
    ps = _resolve(ps, eps)
    check_star_shaped(ps)
    n = ps.n

    def integrand(u):
        prof = _profile(ps, u)
        cos_psi = prof.y_first / prof.radius
        return _mass(ps, prof.radius, tol) * cos_psi ** (n - 1) * prof.psi_derivative

    return unit_sphere_area(n - 1) * integrate(integrand, -0.5 * math.pi, 0.5 * math.pi, tol=tol)


def volume_coefficient_analytic(spec: WarpSpec, r: float) -> float:
    """c = -r^{n+1}·Φ(r)·ω_n / (2(n+1)·f³(r))"""
    n = spec.n
    phi = float(phi_stability(spec, r))
    f = float(spec.f(r))
    return -r ** (n + 1) * phi * unit_sphere_area(n) / (2.0 * (n + 1) * f ** 3)


# ---------------------------------------------------------------------------
# 体积二阶系数
# ---------------------------------------------------------------------------

@dataclass
class VolumeGapFit:
    """Vol(M_ε) - Vol(B(r)) 的拟合结果"""
    r: float
    ladder: np.ndarray
    ball_volume: float
    flux_volumes: np.ndarray
    radial_volumes: np.ndarray
    gaps: np.ndarray
    c_meas: float
    c_analytic: float
    discrepancy: float
    relative_discrepancy: float
    oracle_disagreement: float
    noise_floor: float
    noise_limited: bool
    fit_residual: float

    @property
    def coefficient_scale(self) -> float:
        return max(abs(self.c_analytic), 1e-3 * self.ball_volume / self.r ** 2)

    def to_dict(self) -> Dict[str, object]:
        return {
            "r": self.r,
            "ladder": self.ladder.tolist(),
            "ball_volume": self.ball_volume,
            "flux_volumes": self.flux_volumes.tolist(),
            "radial_volumes": self.radial_volumes.tolist(),
            "gaps": self.gaps.tolist(),
            "c_meas": self.c_meas,
            "c_analytic": self.c_analytic,
            "discrepancy": self.discrepancy,
            "relative_discrepancy": self.relative_discrepancy,
            "oracle_disagreement": self.oracle_disagreement,
            "noise_floor": self.noise_floor,
            "noise_limited": self.noise_limited,
            "fit_residual": self.fit_residual,
        }


def _check_ladder(ps: PerturbedSphere, ladder: Sequence[float], minimum: int) -> np.ndarray:
    values = np.asarray(ladder, dtype=float)
    if values.ndim != 1 or len(values) < minimum:
        raise PerturbationError(f"need at least {minimum} eps values, got {len(values)}")
    if np.any(values <= 0.0):
        raise PerturbationError("eps ladder values must be positive")
    if len(np.unique(values)) != len(values):
        raise PerturbationError("eps ladder values must be distinct")
    if np.any(values > ps.eps_cap * (1.0 + 1e-12)):
        raise PerturbationError(f"eps ladder exceeds cap {ps.eps_cap}")
    return np.sort(values)[::-1]


def volume_gap_coefficient(ps: PerturbedSphere, ladder: Optional[Sequence[float]] = None,
                           threads: Optional[int] = None, tol: float = DEFAULT_TOL) -> VolumeGapFit:
    """
    拟合二阶体积系数

    Vol(M_ε) 关于 ε 为偶函数，对 gap/ε² 做关于 ε² 的二次最小二乘，截距即 c_meas
    """
    if not ps.include_h1:
        raise PerturbationError("volume gap coefficient requires the h1 correction")
    ladder = _check_ladder(ps, default_ladder(ps.r) if ladder is None else ladder, MIN_GAP_POINTS)
    ball = ball_volume(ps.spec, ps.r, tol)

    def volumes(eps: float) -> Tuple[float, float]:
        member = ps.with_eps(eps)
        return enclosed_volume_flux(member, tol=tol), enclosed_volume_radial(member, tol=tol)

    pairs = parallel_map(volumes, ladder, threads)
    flux = np.array([p[0] for p in pairs])
    radial = np.array([p[1] for p in pairs])
    gaps = flux - ball

    design = np.column_stack([np.ones_like(ladder), ladder ** 2, ladder ** 4])
    target = gaps / ladder ** 2
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    residual = float(np.sqrt(np.mean((design @ coef - target) ** 2)))
    c_meas = float(coef[0])
    c_analytic = volume_coefficient_analytic(ps.spec, ps.r)
    floor = noise_floor(ball)
    noise_limited = bool(np.all(np.abs(gaps) <= floor))
    if noise_limited:
        logger.warning("全部体积差均低于噪声下限 %.3e，二阶系数不可辨识", floor)

    fit = VolumeGapFit(r=float(ps.r), ladder=ladder, ball_volume=ball, flux_volumes=flux,
                       radial_volumes=radial, gaps=gaps, c_meas=c_meas, c_analytic=c_analytic,
                       discrepancy=abs(c_meas - c_analytic), relative_discrepancy=0.0,
                       oracle_disagreement=float(np.max(np.abs(flux - radial) / np.maximum(1.0, np.abs(flux)))),
                       noise_floor=floor, noise_limited=noise_limited, fit_residual=residual)
    fit.relative_discrepancy = fit.discrepancy / fit.coefficient_scale
    logger.info("体积系数 r=%.6g：c_meas=%.10g，c_analytic=%.10g，相对偏差 %.3e",
                ps.r, c_meas, c_analytic, fit.relative_discrepancy)
    return fit


# ---------------------------------------------------------------------------
# g(r(ε))·φ(ε) 的展开系数
# ---------------------------------------------------------------------------

@dataclass
class SeriesCheck:
    """A(ε) = g(|Y|)·φ(ε) 的一阶、二阶系数与闭式比较"""
    u1: float
    ladder: np.ndarray
    values: np.ndarray
    linear: float
    expected_linear: float
    linear_error: float
    quadratic: float
    expected_quadratic: float
    quadratic_error: float
    integrated_quadratic: float
    c_analytic: float
    integrated_error: float
    tolerance: float = 1e-4

    @property
    def passed(self) -> bool:
        return (self.linear_error <= self.tolerance and self.quadratic_error <= self.tolerance
                and self.integrated_error <= 1e-9)

    def to_dict(self) -> Dict[str, object]:
        data = {key: getattr(self, key) for key in (
            "u1", "linear", "expected_linear", "linear_error", "quadratic", "expected_quadratic",
            "quadratic_error", "integrated_quadratic", "c_analytic", "integrated_error", "tolerance")}
        data["ladder"] = self.ladder.tolist()
        data["values"] = self.values.tolist()
        data["passed"] = self.passed
        return data


def expected_gphi_coefficients(ps: PerturbedSphere, u1, weights: Optional[GWeights] = None):
    """
    A(ε) = g r + ε·a₁ + ε²·a₂ + O(ε³)

    a₁ = (1/f - n g) sin u₁
    a₂ = g α/r + g′(sin²u₁ + (cos²u₁ + 2α sin²u₁)/2) + r g″ sin²u₁ / 2
    """
    if weights is None:
        weights = g_weight(ps.spec, ps.r)
    f = float(ps.spec.f(ps.r))
    sine, cosine = np.sin(u1), np.cos(u1)
    alpha, r, n = ps.alpha, ps.r, ps.n
    linear = (1.0 / f - n * weights.g) * sine
    quadratic = (weights.g * alpha / r
                 + weights.g_prime * (sine ** 2 + 0.5 * (cosine ** 2 + 2.0 * alpha * sine ** 2))
                 + 0.5 * r * weights.g_double_prime * sine ** 2)
    return linear, quadratic


def gphi_series_check(ps: PerturbedSphere, u1: float = DEFAULT_SERIES_U1,
                      ladder: Optional[Sequence[float]] = None, tol: float = DEFAULT_TOL,
                      tolerance: float = 1e-4) -> SeriesCheck:
    """
    在固定 u₁ 处数值计算 A(ε)，对 (A - A₀)/ε 做多项式拟合，常数项与一次项即 a₁、a₂
    """
    if not ps.include_h1:
        raise PerturbationError("g·phi series check requires the h1 correction")
    if ladder is None:
        ladder = default_ladder(ps.r, *DEFAULT_SERIES_POWERS)
    ladder = _check_ladder(ps, ladder, 4)
    n = ps.n
    nodes = np.array([u1], dtype=float)

    def weighted_support(eps: float) -> float:
        prof = _profile(ps.with_eps(eps), nodes)
        weight = _mass(ps, prof.radius, tol) / prof.radius ** (n + 1)
        return float(weight[0] * prof.support[0])

    base = weighted_support(0.0)
    values = np.array([weighted_support(eps) for eps in ladder])
    degree = min(5, len(ladder) - 2)
    coef = Polynomial.fit(ladder, (values - base) / ladder, degree).convert().coef
    coef = np.pad(coef, (0, max(0, 2 - len(coef))))
    linear, quadratic = float(coef[0]), float(coef[1])

    weights = g_weight(ps.spec, ps.r, tol)
    expected_linear, expected_quadratic = (float(v) for v in expected_gphi_coefficients(ps, u1, weights))
    integrated = ps.r ** n * axisym_integral(
        lambda u: expected_gphi_coefficients(ps, u, weights)[1], n, tol=tol)
    c_analytic = volume_coefficient_analytic(ps.spec, ps.r)
    g_scale = abs(weights.g)
    return SeriesCheck(
        u1=float(u1), ladder=ladder, values=values,
        linear=linear, expected_linear=expected_linear,
        linear_error=_relative_error(linear, expected_linear, g_scale),
        quadratic=quadratic, expected_quadratic=expected_quadratic,
        quadratic_error=_relative_error(quadratic, expected_quadratic, g_scale / ps.r),
        integrated_quadratic=integrated, c_analytic=c_analytic,
        integrated_error=_relative_error(integrated, c_analytic,
                                         unit_sphere_area(n) * ps.r ** (n - 1) * g_scale),
        tolerance=tolerance,
    )


def _relative_error(measured: float, expected: float, scale: float) -> float:
    """相对 |expected| 的误差；expected 落在舍入噪声内（如 0）时改用系数的自然尺度"""
    denominator = abs(expected) if abs(expected) > noise_floor(scale) else scale
    return abs(measured - expected) / denominator


def defect_ladder(ps: PerturbedSphere, quantity: str, ladder: Sequence[float],
                  u1: float = DEFAULT_SERIES_U1) -> List[Tuple[float, float]]:
    """在 ε 阶梯上计算指定缺陷，返回 (ε, defect) 列表"""
    measures = {
        "radial_expansion": lambda p: radial_expansion_defect(p, u1),
        "support_expansion": lambda p: abs(support_function(p, u1) - float(support_expansion(p, u1))),
        "support_agreement": lambda p: abs(support_function(p, u1) - support_function_via_rho(p, u1)),
        "isometry": isometry_defect,
        "area": lambda p: abs(surface_area(p) - sphere_area(p.spec, p.r)),
    }
    if quantity not in measures:
        raise ValueError(f"unknown defect quantity {quantity!r}")
    measure = measures[quantity]
    return [(float(eps), float(measure(ps.with_eps(eps)))) for eps in ladder]
