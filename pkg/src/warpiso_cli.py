#!/usr/bin/env python3
"""
warpiso 命令行
analyze / verify / certify / ball / selfcheck 五个子命令，输出 text、json 或 csv
"""

import argparse
import logging
import sys
from typing import Dict, List, Optional

from analysis import (
    CertificationFailed, CertificationRefused, certify, run_verification_suite, scan_phi,
)
from config_manager import OUTPUT_FORMATS, ConfigError, ConfigManager, RunConfig, setup_logging
from expression_parser import parse_bindings
from geometry import ball_volume, g_weight, sphere_area
from perturbation import default_ladder, noise_floor
from report_writer import Report, write_report
from self_check import InvariantChecker
from warp_model import (
    DEFAULT_INTERVAL, PRESETS, ConditionStatus, WarpSpec, alternate_form_value, f_value,
    make_preset, make_warp_spec, phi_stability, report_from_profile,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_VIOLATED = 10
EXIT_ERROR = 11
EXIT_REFUSED = 20


def _output_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument('--out', type=str, default=None, help='输出文件（默认 stdout）')
    parent.add_argument('--format', type=str, default=None, choices=OUTPUT_FORMATS, help='输出格式')
    parent.add_argument('--config-dir', type=str, default=None, help='配置目录（默认 ~/.warpiso）')
    parent.add_argument('--log-level', type=str, default=None, help='日志级别')
    return parent


def _metric_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    source = parent.add_mutually_exclusive_group()
    source.add_argument('--preset', type=str, default=None, choices=list(PRESETS), help='预置度量')
    source.add_argument('--f2', type=str, default=None, help='f²(r) 表达式')
    source.add_argument('--f', type=str, default=None, help='f(r) 表达式')
    parent.add_argument('--param', action='append', default=[], metavar='NAME=VALUE', help='表达式参数，可重复')
    parent.add_argument('--m', type=float, default=None, help='参数 m 的简写')
    parent.add_argument('--kappa', type=float, default=None, help='参数 kappa 的简写')
    parent.add_argument('--n', type=int, default=2, help='超曲面维数 n（外围空间 n+1 维）')
    parent.add_argument('--r-min', type=float, default=None, help='有效区间下端')
    parent.add_argument('--r-max', type=float, default=None, help='有效区间上端')
    parent.add_argument('--anchor', type=float, default=None, help='体积积分下限（仅自定义度量）')
    return parent


def build_parser() -> argparse.ArgumentParser:
    output, metric = _output_options(), _metric_options()
    parser = argparse.ArgumentParser(prog='warpiso', description='翘曲积空间等周不等式数值验证工具')
    commands = parser.add_subparsers(dest='command', required=True)

    analyze = commands.add_parser('analyze', parents=[metric, output], help='扫描 Φ(r) 并判定条件')
    analyze.add_argument('--grid-size', type=int, default=None, help='网格点数')
    analyze.add_argument('--tol', type=float, default=None, help='判定阈值：Φ < -tol 视为违反')

    verify = commands.add_parser('verify', parents=[metric, output], help='运行阶律验证组')
    verify.add_argument('--r', type=float, required=True, help='球面半径')
    verify.add_argument('--ladder', type=int, nargs=2, default=None, metavar=('FIRST', 'LAST'),
                        help='ε 阶梯 r·2^-FIRST … r·2^-LAST')

    cert = commands.add_parser('certify', parents=[metric, output], help='构造反例证书')
    cert.add_argument('--r', type=float, required=True, help='球面半径')
    cert.add_argument('--eps', type=float, required=True, help='扰动幅度 ε')

    ball = commands.add_parser('ball', parents=[metric, output], help='列出测地球的 f、Φ、g、面积与体积')
    ball.add_argument('--r', type=float, nargs='+', required=True, help='一个或多个半径')

    commands.add_parser('selfcheck', parents=[output], help='运行不变量自检')
    return parser


def collect_parameters(args: argparse.Namespace) -> Dict[str, float]:
    """--param NAME=VALUE 与 --m/--kappa 简写合并"""
    parameters = parse_bindings(list(getattr(args, 'param', None) or []))
    for name in ('m', 'kappa'):
        value = getattr(args, name, None)
        if value is not None:
            parameters[name] = value
    return parameters


def build_spec(config: RunConfig) -> WarpSpec:
    """由运行配置构造度量"""
    if config.preset is not None:
        return make_preset(config.preset, n=config.n, parameters=config.parameters,
                           r_min=config.r_min, r_max=config.r_max)
    r_min = DEFAULT_INTERVAL[0] if config.r_min is None else config.r_min
    r_max = DEFAULT_INTERVAL[1] if config.r_max is None else config.r_max
    return make_warp_spec(config.expression, is_squared=config.is_squared, parameters=config.parameters,
                          n=config.n, r_min=r_min, r_max=r_max,
                          anchor=0.0 if config.anchor is None else config.anchor)


def _single_radius(config: RunConfig) -> float:
    if len(config.radii) != 1:
        raise ConfigError(f"{config.command} needs exactly one radius")
    return config.radii[0]


def _report(config: RunConfig, spec: Optional[WarpSpec], results: Dict[str, object]) -> Report:
    document = config.to_dict()
    if spec is not None:
        document["spec"] = spec.describe()
    return Report(command=config.command, config=document, results=results)


# ---------------------------------------------------------------------------
# 子命令
# ---------------------------------------------------------------------------

def cmd_analyze(config: RunConfig, spec: WarpSpec):
    """Φ 扫描：HOLDS 返回 0，VIOLATED 返回 10"""
    profile = scan_phi(spec, None, config.grid_size, config.scan_tol, config.threads)
    condition = report_from_profile(profile)
    forms = [alternate_form_value(spec, r) for r in profile.radii]
    alternate = {
        "upper_holds": all(form.upper_holds for form in forms),
        "lower_holds": all(form.lower_holds for form in forms),
        "max_value": max(form.value for form in forms),
        "min_value": min(form.value for form in forms),
    }
    report = _report(config, spec, {"condition": condition.to_dict(), "alternate_form": alternate,
                                    "profile": profile.to_dict()})
    if config.output_format == "csv":
        report.table = [{"r": float(r), "phi": float(v)} for r, v in zip(profile.radii, profile.values)]
    report.summary = [
        f"📐 度量: {spec.form}={spec.source_text}  参数 {spec.bindings}  n={spec.n}",
        f"📏 区间: [{condition.interval[0]:.6g}, {condition.interval[1]:.6g}]，{condition.grid_size} 点",
        f"📊 条件: {condition.status.value}",
        f"📉 最小 Φ = {condition.min_phi:.6e}（r = {condition.argmin_r:.6g}）",
    ]
    for lo, hi in condition.violations:
        report.summary.append(f"  ❌ Φ < 0 于 [{lo:.10g}, {hi:.10g}]")
    if not alternate["lower_holds"]:
        report.diagnostics.append("(phi')^2 - phi'' phi < 0 somewhere on the grid")
    if condition.status is ConditionStatus.VIOLATED:
        r = condition.argmin_r
        floor = noise_floor(max(1.0, float(spec.f_squared(r)) / r ** 2))
        if abs(condition.min_phi) <= floor:
            report.diagnostics.append(
                f"min Phi = {condition.min_phi:.3e} is within rounding noise ({floor:.3e}); "
                f"pass --tol to treat such values as zero")
    code = EXIT_OK if condition.status is ConditionStatus.HOLDS else EXIT_VIOLATED
    return report, code


def cmd_verify(config: RunConfig, spec: WarpSpec):
    """阶律验证组：全部通过返回 0"""
    r = _single_radius(config)
    ladder = default_ladder(r, *config.ladder_powers)
    series_ladder = default_ladder(r, *config.series_powers)
    suite = run_verification_suite(spec, r, ladder, series_ladder, config.series_u1, config.slope_tolerance,
                                   config.agreement_tol, config.eps_cap_ratio, config.quadrature_tol,
                                   config.threads)
    report = _report(config, spec, suite.to_dict())
    report.summary = [f"📐 度量: {spec.form}={spec.source_text}  r={r:.6g}  Φ(r)={suite.phi:.6e}"]
    for check in suite.checks:
        mark = "✅" if check.passed else "❌"
        slope = check.detail.get("slope") if isinstance(check.detail, dict) else None
        extra = f"  斜率 {slope:.3f}" if isinstance(slope, float) else ""
        report.summary.append(f"  {mark} {check.name}{extra}")
        if check.note:
            report.diagnostics.append(f"{check.name}: {check.note}")
    report.summary.append(f"🎯 结果: {'全部通过' if suite.passed else '存在失败项'}")
    return report, EXIT_OK if suite.passed else EXIT_FAILED


def cmd_certify(config: RunConfig, spec: WarpSpec):
    """反例证书：成功 0，拒绝 20，不变量失败 1"""
    r = _single_radius(config)
    if config.eps is None:
        raise ConfigError("certify needs --eps")
    try:
        certificate = certify(spec, r, config.eps, config.phi_threshold, config.agreement_tol,
                              config.eps_cap_ratio, config.quadrature_tol)
    except CertificationRefused as refusal:
        report = _report(config, spec, {"status": "REFUSED", "r": refusal.r, "phi": refusal.phi,
                                        "phi_threshold": refusal.threshold})
        report.summary = [f"🚫 拒绝: Φ({refusal.r:.6g}) = {refusal.phi:.6e}，此处不预测反例"]
        report.diagnostics.append(str(refusal))
        return report, EXIT_REFUSED
    except CertificationFailed as failure:
        report = _report(config, spec, {"status": "FAILED", "r": r, "eps": config.eps, "reason": str(failure)})
        report.summary = [f"❌ 证书失败: {failure}"]
        report.diagnostics.append(str(failure))
        return report, EXIT_FAILED

    results = certificate.to_dict()
    results["status"] = "CERTIFIED"
    report = _report(config, spec, results)
    report.summary = [
        f"📐 度量: {spec.form}={spec.source_text}  r={r:.6g}  ε={certificate.eps:.6g}",
        f"📉 Φ(r) = {certificate.phi:.6e}",
        f"📦 Vol(B(r)) = {certificate.ball_volume:.12g}",
        f"📦 Vol(M_ε)  = {certificate.flux_volume:.12g}（径向切片 {certificate.radial_volume:.12g}）",
        f"➕ 体积差 = {certificate.volume_gap:.6e}，预测 {certificate.predicted_gap:.6e}，"
        f"相对误差 {certificate.prediction_error:.3e}",
        f"📏 面积缺陷 = {certificate.area_defect:.3e}（/ε³·Area = {certificate.area_defect_ratio:.3e}）",
        "✅ 证书已生成",
    ]
    return report, EXIT_OK


def cmd_ball(config: RunConfig, spec: WarpSpec):
    """测地球表：r, f, Φ, g, Area, Vol"""
    if not config.radii:
        raise ConfigError("ball needs at least one radius")
    rows = []
    for r in config.radii:
        rows.append({
            "r": r,
            "f": float(f_value(spec, r)),
            "phi": float(phi_stability(spec, r)),
            "g": g_weight(spec, r, config.quadrature_tol).g,
            "area": sphere_area(spec, r),
            "volume": ball_volume(spec, r, config.quadrature_tol),
        })
    report = _report(config, spec, {"rows": rows})
    report.table = rows
    report.summary = [f"📐 度量: {spec.form}={spec.source_text}  n={spec.n}  anchor={spec.anchor:.6g}"]
    return report, EXIT_OK


def cmd_selfcheck(config: RunConfig):
    """不变量自检：全部通过返回 0"""
    checker = InvariantChecker(verbose=False)
    passed = checker.run_all_checks()
    report = _report(config, None, checker.to_dict())
    report.summary = [f"  {name}: {result}" for name, result in checker.check_results.items()]
    report.summary.append("🎉 所有不变量检查都通过了！" if passed else "⚠️ 存在失败的检查")
    return report, EXIT_OK if passed else EXIT_FAILED


HANDLERS = {
    "analyze": cmd_analyze,
    "verify": cmd_verify,
    "certify": cmd_certify,
    "ball": cmd_ball,
}


def run(args: argparse.Namespace) -> int:
    manager = ConfigManager(getattr(args, 'config_dir', None))
    args.params = collect_parameters(args)
    config = RunConfig.from_sources(args.command, args, manager)
    setup_logging(config.log_level)
    logger.debug("运行配置 %s", config.to_dict())

    if config.command == "selfcheck":
        report, code = cmd_selfcheck(config)
    else:
        spec = build_spec(config)
        report, code = HANDLERS[config.command](config, spec)

    write_report(report, config.output, config.output_format)
    for message in report.diagnostics:
        if code != EXIT_OK:
            print(f"⚠️  {message}", file=sys.stderr)
    return code


def main(argv: Optional[List[str]] = None) -> int:
    """命令行入口，返回退出码"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_ERROR

    try:
        return run(args)
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"❌ {type(exc).__name__}: {exc}", file=sys.stderr)
        logger.debug("命令失败", exc_info=True)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
