#!/usr/bin/env python3
"""
warpiso 自检脚本
球面积分恒等式、度量张量不变量、g 的导数恒等式与条件等价式
"""

import logging
import math
from typing import Callable, Dict, List, Optional

import numpy as np

from geometry import axisym_integral, g_weight, metric_at, unit_sphere_area
from warp_model import PRESETS, WarpSpec, alternate_form_value, make_preset, phi_stability

logger = logging.getLogger(__name__)

SPHERE_DIMENSIONS = (1, 2, 3, 4, 5)
DERIVATIVE_STEP = 5e-4


def preset_specs(n: int = 2) -> List[WarpSpec]:
    """全部预置度量（默认参数）"""
    return [make_preset(name, n=n) for name in PRESETS]


def sample_radii(spec: WarpSpec, count: int) -> np.ndarray:
    """有效区间内、远离 anchor 的几何分布半径"""
    lo = max(spec.r_min, 1.2 * spec.anchor, 0.2)
    hi = min(spec.r_max, 5.0)
    return np.geomspace(lo, hi, count)


def richardson_derivative(func: Callable[[float], float], r: float, step: float = DERIVATIVE_STEP) -> float:
    """
    步长 h = step·r 的中心差分做一次 Richardson 外推，截断误差 O(h⁴)

    anchor 附近 g 的高阶导数很大，单纯的中心差分达不到 1e-7 的相对精度
    """
    h = step * r
    coarse = (func(r + h) - func(r - h)) / (2.0 * h)
    fine = (func(r + 0.5 * h) - func(r - 0.5 * h)) / h
    return (4.0 * fine - coarse) / 3.0


class InvariantChecker:
    """不变量检查器"""

    def __init__(self, verbose: bool = True, seed: int = 20240613):
        self.verbose = verbose
        self.rng = np.random.default_rng(seed)
        self.check_results: Dict[str, str] = {}
        self.failures: Dict[str, List[str]] = {}

    def _say(self, message: str):
        if self.verbose:
            print(message)

    def _run(self, name: str, title: str, body: Callable[[], List[str]]):
        self._say(f"\n📋 {title}...")
        try:
            problems = body()
        except Exception as e:
            problems = [f"{type(e).__name__}: {e}"]
        self.failures[name] = problems
        if problems:
            self.check_results[name] = f"❌ 失败: {problems[0]}"
            self._say(f"  ❌ {title}失败: {problems[0]}")
        else:
            self.check_results[name] = "✅ 通过"
            self._say(f"  ✅ {title}通过")

    def run_all_checks(self) -> bool:
        """运行所有检查"""
        self._say("🧪 warpiso 自检开始")
        self._say("=" * 50)

        self._run("unit_sphere_area", "单位球面面积", self.check_unit_sphere_area)
        self._run("sphere_identities", "球面积分恒等式", self.check_sphere_identities)
        self._run("metric_tensor", "度量张量不变量", self.check_metric_tensor)
        self._run("g_derivatives", "g 的导数恒等式", self.check_g_derivatives)
        self._run("condition_identity", "条件等价式", self.check_condition_identity)

        return self.show_check_results()

    def check_unit_sphere_area(self) -> List[str]:
        problems = []
        expected = {0: 2.0, 1: 2.0 * math.pi, 2: 4.0 * math.pi, 3: 2.0 * math.pi ** 2}
        for k, value in expected.items():
            got = unit_sphere_area(k)
            if abs(got - value) > 1e-13 * value:
                problems.append(f"omega_{k} = {got!r}, expected {value!r}")
        return problems

    def check_sphere_identities(self) -> List[str]:
        problems = []
        for n in SPHERE_DIMENSIONS:
            omega = unit_sphere_area(n)
            cases = {
                "cos^2": (lambda u: np.cos(u) ** 2, n / (n + 1) * omega),
                "sin^2": (lambda u: np.sin(u) ** 2, omega / (n + 1)),
                "sin": (np.sin, 0.0),
                "1": (np.ones_like, omega),
            }
            for label, (func, expected) in cases.items():
                got = axisym_integral(func, n)
                if abs(got - expected) > 1e-12 * max(1.0, omega):
                    problems.append(f"n={n} {label}: {got!r} vs {expected!r}")
        return problems

    def check_metric_tensor(self) -> List[str]:
        problems = []
        for spec in preset_specs(n=2):
            for r in sample_radii(spec, 5):
                direction = self.rng.normal(size=spec.n + 1)
                unit = direction / np.linalg.norm(direction)
                z = r * unit
                tensor = metric_at(spec, z)
                radial = tensor.inner(unit, unit)
                expected = 1.0 / float(spec.f_squared(r))
                if abs(radial - expected) > 1e-12 * max(1.0, expected):
                    problems.append(f"{spec.name} r={r:.4g}: g(dr, dr)={radial!r} vs 1/f^2={expected!r}")
                v = self.rng.normal(size=spec.n + 1)
                w = self.rng.normal(size=spec.n + 1)
                v -= (v @ unit) * unit
                w -= (w @ unit) * unit
                if abs(tensor.inner(v, w) - v @ w) > 1e-12 * max(1.0, abs(v @ w)):
                    problems.append(f"{spec.name} r={r:.4g}: tangential inner product is not Euclidean")
                if np.min(np.linalg.eigvalsh(tensor.components)) <= 0.0:
                    problems.append(f"{spec.name} r={r:.4g}: metric is not positive definite")
        return problems

    def check_g_derivatives(self) -> List[str]:
        problems = []
        for spec in preset_specs(n=2):
            for r in sample_radii(spec, 4):
                center = g_weight(spec, r)
                fd_prime = richardson_derivative(lambda t: g_weight(spec, t).g, r)
                fd_second = richardson_derivative(lambda t: g_weight(spec, t).g_prime, r)
                if abs(center.g_prime - fd_prime) > 1e-7 * max(1.0, abs(fd_prime)):
                    problems.append(f"{spec.name} r={r:.4g}: g' {center.g_prime!r} vs FD {fd_prime!r}")
                if abs(center.g_double_prime - fd_second) > 1e-7 * max(1.0, abs(fd_second)):
                    problems.append(f"{spec.name} r={r:.4g}: g'' {center.g_double_prime!r} vs FD {fd_second!r}")
        return problems

    def check_condition_identity(self) -> List[str]:
        problems = []
        for spec in preset_specs(n=2):
            for r in np.linspace(spec.r_min, spec.r_max, 200):
                lhs = r ** 2 * float(phi_stability(spec, r))
                rhs = 1.0 - alternate_form_value(spec, r).value
                if abs(lhs - rhs) > 1e-10 * max(1.0, abs(lhs)):
                    problems.append(f"{spec.name} r={r:.4g}: r^2 Phi={lhs!r} vs 1-value={rhs!r}")
                    break
        return problems

    def show_check_results(self) -> bool:
        """显示检查结果"""
        self._say("\n" + "=" * 50)
        self._say("📊 自检结果汇总")
        self._say("=" * 50)

        passed = sum(1 for result in self.check_results.values() if "✅" in result)
        failed = len(self.check_results) - passed
        for name, result in self.check_results.items():
            self._say(f"  {name}: {result}")

        self._say(f"\n✅ 通过: {passed}")
        self._say(f"❌ 失败: {failed}")
        if failed == 0:
            self._say("\n🎉 所有不变量检查都通过了！")
        else:
            self._say(f"\n⚠️ 有 {failed} 项检查失败")
        logger.info("自检：通过 %d，失败 %d", passed, failed)
        return failed == 0

    def to_dict(self) -> Dict[str, object]:
        return {
            "passed": all(not problems for problems in self.failures.values()),
            "checks": {name: {"passed": not problems, "problems": problems}
                       for name, problems in self.failures.items()},
        }


def main(verbose: Optional[bool] = True) -> bool:
    """主函数"""
    checker = InvariantChecker(verbose=bool(verbose))
    return checker.run_all_checks()


if __name__ == "__main__":
    raise SystemExit(0 if main() else 1)
