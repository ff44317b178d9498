#!/usr/bin/env python3
"""
几何模块
外围度量张量、权函数 g(r) 及其导数、测地球面面积、测地球体积和球面轴对称积分
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.special import gammaln

from quadrature import DEFAULT_TOL, QuadratureError, integrate, integrate_segments
from warp_model import WarpSpec, WarpSpecError

logger = logging.getLogger(__name__)

Number = Union[float, np.ndarray]

POSITIVITY_POINTS = 512
G_DERIVATIVE_CHECK_RTOL = 1e-9


def unit_sphere_area(k: int) -> float:
    """
    k 维单位球面面积 ω_k = 2π^((k+1)/2) / Γ((k+1)/2)，用对数 Γ 避免溢出；ω_0 = 2
    """
    if isinstance(k, bool) or int(k) != k or k < 0:
        raise ValueError(f"sphere dimension must be a non-negative integer, got {k!r}")
    half = 0.5 * (int(k) + 1)
    return float(np.exp(math.log(2.0) + half * math.log(math.pi) - gammaln(half)))


# ---------------------------------------------------------------------------
# 外围度量 g_ab = δ_ab + (1/f² - 1) z_a z_b / |z|²
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AmbientMetricTensor:
    point: np.ndarray
    radius: float
    f: float
    components: np.ndarray

    def inner(self, v: np.ndarray, w: np.ndarray) -> float:
        return float(np.asarray(v) @ self.components @ np.asarray(w))


def metric_at(spec: WarpSpec, z) -> AmbientMetricTensor:
    point = np.asarray(z, dtype=float)
    if point.shape != (spec.n + 1,):
        raise WarpSpecError(f"point must have {spec.n + 1} coordinates, got shape {point.shape}")
    radius = float(np.linalg.norm(point))
    if not spec.contains(radius):
        raise WarpSpecError(f"|z|={radius} outside validity interval [{spec.r_min}, {spec.r_max}]")
    f2 = float(spec.f_squared(radius))
    return AmbientMetricTensor(point=point, radius=radius, f=math.sqrt(f2),
                               components=metric_components(f2, point))


def metric_components(f_squared: float, point: np.ndarray) -> np.ndarray:
    """g_ab 分量矩阵，不检查有效区间"""
    unit = point / np.linalg.norm(point)
    return np.eye(len(point)) + (1.0 / f_squared - 1.0) * np.outer(unit, unit)


def inner(spec: WarpSpec, z, v, w) -> float:
    """外围度量下的内积 g(v, w)"""
    return metric_at(spec, z).inner(v, w)


def inverse_metric_apply(f_squared: Number, unit: np.ndarray, covector: np.ndarray) -> np.ndarray:
    """g⁻¹ξ = ξ + (f² - 1)(ξ·ẑ)ẑ，最后一维为坐标"""
    projection = np.sum(covector * unit, axis=-1, keepdims=True)
    return covector + (np.asarray(f_squared)[..., None] - 1.0) * projection * unit


# ---------------------------------------------------------------------------
# 权函数 g(r) = r^-(n+1) ∫_anchor^r t^n / f(t) dt
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GWeights:
    r: float
    g: float
    g_prime: float
    g_double_prime: float
    anchor: float = 0.0


def _check_positive_below(spec: WarpSpec, r: float) -> None:
    lower = spec.anchor
    grid = lower + (r - lower) * np.arange(1, POSITIVITY_POINTS + 1) / POSITIVITY_POINTS
    try:
        values = spec.f(grid)
    except WarpSpecError as exc:
        raise WarpSpecError(f"f must be positive on ({lower}, {r}] for volume integrals: {exc}") from exc
    if np.any(values <= 0.0):
        raise WarpSpecError(f"f <= 0 somewhere on ({lower}, {r}]")


def radial_mass(spec: WarpSpec, r: float, tol: float = DEFAULT_TOL) -> float:
    """
    ∫_anchor^r t^n / f(t) dt

    用 t = r·s 换元后积分 r^(n+1) ∫ s^n / f(r s) ds，被积函数量级为 1
    """
    if r <= spec.anchor:
        raise WarpSpecError(f"r={r} must exceed the volume anchor {spec.anchor}")
    _check_positive_below(spec, r)
    n = spec.n
    integrand = lambda s: s ** n / spec.f(r * s)  # noqa: E731
    try:
        scaled = integrate(integrand, spec.anchor / r, 1.0, tol=tol)
    except QuadratureError as exc:
        raise QuadratureError(f"g(r) quadrature failed at r={r}: {exc}") from exc
    return scaled * r ** (n + 1)


def radial_mass_many(spec: WarpSpec, radii: np.ndarray, base_r: float, base_mass: float,
                     tol: float = DEFAULT_TOL) -> np.ndarray:
    """从已知的 ∫_anchor^base_r 出发，批量计算 ∫_anchor^R_i（只积短区间 [base_r, R_i]）"""
    n = spec.n
    radii = np.asarray(radii, dtype=float)
    if np.any(radii <= spec.anchor):
        raise WarpSpecError(f"radius {radii.min()} falls inside the volume anchor {spec.anchor}")
    integrand = lambda t: t ** n / spec.f(t)  # noqa: E731
    return base_mass + integrate_segments(integrand, base_r, radii, tol=tol)


def g_weight(spec: WarpSpec, r: float, tol: float = DEFAULT_TOL) -> GWeights:
    """
    g(r) 由积分得到；g′、g″ 用闭式

    g′ = 1/(r f) - (n+1) g / r
    g″ = -(f + r f′)/(r² f²) - (n+1)(g′/r - g/r²)
    """
    r = float(r)
    n = spec.n
    g = radial_mass(spec, r, tol) / r ** (n + 1)
    f = float(spec.f(r))
    fp = float(spec.f_prime(r))
    g_prime = 1.0 / (r * f) - (n + 1) * g / r
    g_double_prime = -(f + r * fp) / (r ** 2 * f ** 2) - (n + 1) * (g_prime / r - g / r ** 2)
    # 第二种闭式（代入 g′ 后展开）作为一致性检查
    expanded = (-(f + r * fp) / (r ** 2 * f ** 2) - (n + 1) / (r ** 2 * f)
                + (n + 1) * (n + 2) * g / r ** 2)
    scale = max(1.0, abs(g_double_prime), (n + 1) * (n + 2) * abs(g) / r ** 2)
    if abs(expanded - g_double_prime) > G_DERIVATIVE_CHECK_RTOL * scale:
        raise ArithmeticError(f"inconsistent g'' forms at r={r}: {g_double_prime} vs {expanded}")
    return GWeights(r=r, g=g, g_prime=g_prime, g_double_prime=g_double_prime, anchor=spec.anchor)


def ball_volume(spec: WarpSpec, r: float, tol: float = DEFAULT_TOL) -> float:
    """测地球 B(r) 的体积 ω_n ∫_anchor^r t^n/f dt（anchor > 0 时为 B(r) 去掉 B(anchor)）"""
    return unit_sphere_area(spec.n) * radial_mass(spec, float(r), tol)


def sphere_area(spec: WarpSpec, r: float) -> float:
    """测地球面 S(r) 的诱导度量为 r² 乘标准度量，面积 ω_n r^n"""
    return unit_sphere_area(spec.n) * float(r) ** spec.n


def axisym_integral(func: Callable[[np.ndarray], np.ndarray], n: int, tol: float = DEFAULT_TOL,
                    order: Optional[int] = None) -> float:
    """
    只依赖 u₁ 的函数在 S^n 上的积分
    ∫_{S^n} F(u₁) dS_n = ω_{n-1} ∫_{-π/2}^{π/2} F(u₁) cos^{n-1}(u₁) du₁
    """
    if n < 1:
        raise ValueError("axisymmetric reduction needs n >= 1")
    weight = lambda u: np.asarray(func(u), dtype=float) * np.cos(u) ** (n - 1)  # noqa: E731
    kwargs = {} if order is None else {"order": order}
    return unit_sphere_area(n - 1) * integrate(weight, -0.5 * math.pi, 0.5 * math.pi, tol=tol, **kwargs)
