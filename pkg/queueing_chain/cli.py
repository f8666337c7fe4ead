"""명령행 진입점: analyze / sweep / optimize / simulate / compare

종료 코드: 0 성공, 1 입력 오류, 2 불안정 노드가 있지만 분석 완료, 3 비교 실패.
결과는 stdout, 진행 로그는 stderr 로 나간다.
"""

import argparse
import csv
import io
import json
import math
import sys
from typing import Any, Dict, List, Optional, Sequence

from common_utils import get_default_seed, log_event, send_slack_notification
from queueing_chain.analytic import ChainMetrics, chain_metrics
from queueing_chain.errors import (
    ConfigError,
    InfeasibleAllocationError,
    QueueingChainError,
    UnstableError,
)
from queueing_chain.model import PRESETS, NetworkSpec, build_network
from queueing_chain.optimizer import (
    allocation_chain_response,
    allocation_problem_from,
    allocation_to_instances,
    solve_allocation,
    verify_allocation,
)
from queueing_chain.simulator import (
    DEFAULT_REPLICATIONS,
    DEFAULT_WARMUP,
    ServiceDistribution,
    SimConfig,
    compare,
    simulate,
)
from queueing_chain.sweep import (
    TIME_SCALE,
    SweepMetric,
    SweepParameter,
    SweepSpec,
    format_cell,
    parse_grid,
    parse_values,
    run_sweep,
)
from queueing_chain.traffic import solve

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_UNSTABLE = 2
EXIT_COMPARISON = 3

TIME_METRICS = ("EW", "ET")


class _Parser(argparse.ArgumentParser):
    """argparse 오류도 종료 코드 1 로 보내기 위해 예외로 바꾼다"""

    def error(self, message):
        raise ConfigError(message, key="argv")


def _float_list(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"쉼표로 구분한 숫자 목록이어야 합니다: {text}")


def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"쉼표로 구분한 정수 목록이어야 합니다: {text}")


def _count(text: str) -> int:
    """``1e6`` 같은 표기도 받는 양의 정수"""
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"숫자가 아닙니다: {text}")
    if value < 1 or value != int(value):
        raise argparse.ArgumentTypeError(f"양의 정수여야 합니다: {text}")
    return int(value)


def _add_network_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", nargs="?", help="네트워크 설정 JSON 경로")
    parser.add_argument("--preset", choices=sorted(PRESETS), help="설정 파일 대신 내장 프리셋 사용")
    arrival = parser.add_mutually_exclusive_group()
    arrival.add_argument("--interarrival", type=float, help="외부 도착 간격 1/λ (초)")
    arrival.add_argument("--rate", type=float, help="외부 도착률 λ (초당)")
    parser.add_argument("--capacity", type=_float_list, help="노드별 용량 계수 c (예: 3,3,3,3,3,3)")
    parser.add_argument("--servers", type=_int_list, help="노드별 서버 수 m")
    parser.add_argument("--bulk", help="입구 노드 벌크 도착 (예: uniform:100)")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="개별 필드 덮어쓰기 (예: nodes.HSS1.servers=2)")


def _add_output_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--units", choices=sorted(TIME_SCALE), default="ms", help="시간 단위 (기본 ms)")
    parser.add_argument("--format", choices=("table", "csv", "json"), default="table")
    parser.add_argument("--output", help="결과를 파일로도 저장")


def _add_simulation_arguments(parser: argparse.ArgumentParser) -> None:
    horizon = parser.add_mutually_exclusive_group()
    horizon.add_argument("--jobs", type=_count, help="외부 도착 사건 수 horizon (기본 100000)")
    horizon.add_argument("--horizon-time", type=float, help="시뮬레이션 시간 horizon (초)")
    parser.add_argument("--reps", type=int, default=DEFAULT_REPLICATIONS,
                        help=f"복제 횟수 (기본 {DEFAULT_REPLICATIONS})")
    parser.add_argument("--warmup", type=float, default=DEFAULT_WARMUP,
                        help=f"버리는 warmup 비율 (기본 {DEFAULT_WARMUP})")
    parser.add_argument("--seed", type=int, default=None,
                        help="난수 seed (기본: QUEUEING_CHAIN_SEED 환경 변수, 없으면 20190526)")
    parser.add_argument("--workers", type=int, default=1, help="복제 병렬 프로세스 수")
    parser.add_argument("--service", action="append", default=[], metavar="NODE=DIST",
                        help="노드 서비스 분포 (exponential, deterministic, empirical:0.004,0.006)")
    parser.add_argument("--trace", help="복제 0 의 사건 기록 CSV 경로")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="queueing-chain", description="열린 큐잉 네트워크 해석/시뮬레이션 도구")
    commands = parser.add_subparsers(dest="command", required=True)

    analyze = commands.add_parser("analyze", help="노드/체인 지표 계산")
    _add_network_arguments(analyze)
    _add_output_arguments(analyze)

    sweep = commands.add_parser("sweep", help="파라미터 스윕 표 (CSV)")
    _add_network_arguments(sweep)
    _add_output_arguments(sweep)
    sweep.add_argument("--parameter", required=True, choices=[p.value for p in SweepParameter])
    sweep.add_argument("--values", help="스윕 값 (1:50:1, 1,2,5, 1,1,1;3,3,3, preset:<이름>)")
    sweep.add_argument("--metrics", default=",".join(m.value for m in SweepMetric),
                       help="EQ,EW,ET,rho,bound 중 일부")
    sweep.add_argument("--grid", help="값마다 반복할 도착 간격 격자 (예: 1:50:1)")
    sweep.add_argument("--workers", type=int, default=1, help="스윕 점 병렬 프로세스 수")
    sweep.set_defaults(format="csv")

    optimize = commands.add_parser("optimize", help="예산 C 아래 용량 배분")
    _add_network_arguments(optimize)
    _add_output_arguments(optimize)
    optimize.add_argument("--budget", type=float, required=True, help="총 예산 C (요청/초)")
    optimize.add_argument("--no-verify", action="store_true", help="수치 검증 생략")
    optimize.add_argument("--samples", type=_count, default=10_000, help="검증 섭동 수")
    optimize.add_argument("--grid-step", type=float, default=1e-3, help="최소 섭동 크기")
    optimize.add_argument("--seed", type=int, default=None, help="검증 seed (기본: QUEUEING_CHAIN_SEED)")

    for name, help_text in (("simulate", "이산 사건 시뮬레이션"), ("compare", "해석값과 시뮬레이션 비교")):
        sub = commands.add_parser(name, help=help_text)
        _add_network_arguments(sub)
        _add_output_arguments(sub)
        _add_simulation_arguments(sub)
    return parser


def _network_from(args) -> NetworkSpec:
    return build_network(
        preset=args.preset,
        config_path=args.config,
        interarrival=args.interarrival,
        rate=args.rate,
        capacity=args.capacity,
        servers=args.servers,
        bulk=args.bulk,
        overrides=args.set,
    )


def _json_value(value: Any) -> Any:
    if isinstance(value, float) and (math.isinf(value) or math.isnan(value)):
        return format_cell(value)
    return value


def _render(columns: Sequence[str], rows: Sequence[Sequence[Any]], fmt: str, extra: Optional[Dict[str, Any]] = None) -> str:
    out = io.StringIO()
    if fmt == "json":
        document = {k: _json_value(v) for k, v in (extra or {}).items()}
        document["rows"] = [
            {c: _json_value(v) for c, v in zip(columns, row)} for row in rows
        ]
        json.dump(document, out, ensure_ascii=False, indent=2)
        out.write("\n")
    elif fmt == "csv":
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_cell(v) for v in row])
    else:
        def cell(value):
            if isinstance(value, float) and math.isfinite(value):
                return f"{value:.6g}"
            return "∞" if value == math.inf else format_cell(value)

        cells = [list(columns)] + [[cell(v) for v in row] for row in rows]
        widths = [max(len(r[i]) for r in cells) for i in range(len(columns))]
        for r in cells:
            out.write("  ".join(v.rjust(w) if i else v.ljust(w) for i, (v, w) in enumerate(zip(r, widths))).rstrip())
            out.write("\n")
    return out.getvalue()


def _emit(args, text: str) -> None:
    sys.stdout.write(text)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as f:
            f.write(text)


def _metrics_rows(metrics: ChainMetrics, scale: float) -> List[List[Any]]:
    rows = []
    for node in metrics.per_node:
        rows.append([node.node_id, node.arrival_rate, node.visit_ratio, node.utilization,
                     node.mean_queue_length, node.mean_waiting * scale, node.mean_response * scale])
        if len(metrics.class_ids) > 1:
            for cls in node.per_class:
                rows.append([f"{node.node_id}:{cls.class_id}", cls.arrival_rate, "", cls.utilization,
                             cls.mean_queue_length, cls.mean_waiting * scale, cls.mean_response * scale])
    rows.append(["chain", metrics.request_rate, "", "", "", "", metrics.chain_response * scale])
    if len(metrics.class_ids) > 1:
        for class_id, value in zip(metrics.class_ids, metrics.class_response):
            rows.append([f"chain:{class_id}", "", "", "", "", "", value * scale])
    rows.append(["bound", "", "", "", "", "", metrics.response_lower_bound * scale])
    return rows


def cmd_analyze(args) -> int:
    spec = _network_from(args)
    metrics = chain_metrics(spec, strict=False)
    units = args.units
    columns = ["node", "lambda", "visits", "rho", "EQ", f"EW_{units}", f"ET_{units}"]
    rows = _metrics_rows(metrics, TIME_SCALE[units])
    _emit(args, _render(columns, rows, args.format, {"model": metrics.model, "bottleneck": metrics.bottleneck}))

    if not metrics.stable:
        unstable = [n.node_id for n in metrics.per_node if not n.stable]
        log_event("ANALYZE", f"불안정 노드 (ρ >= 1): {', '.join(unstable)}", "warning")
        return EXIT_UNSTABLE
    log_event("ANALYZE", f"체인 E[T]={metrics.chain_response * TIME_SCALE[units]:.6g}{units}, 병목={metrics.bottleneck}", "success")
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = _network_from(args)
    parameter = SweepParameter(args.parameter)
    text = args.values
    if text is None:
        if parameter != SweepParameter.INTERARRIVAL_TIME:
            raise ConfigError("--values 가 필요합니다", key="values")
        text = "1:50:1"
    sweep = SweepSpec(
        parameter=parameter,
        values=tuple(parse_values(parameter, text)),
        metrics=tuple(m.strip() for m in args.metrics.split(",") if m.strip()),
        grid=tuple(parse_grid(args.grid)) if args.grid else None,
    )
    table = run_sweep(spec, sweep, units=args.units, workers=args.workers)
    _emit(args, _render(table.columns, table.rows, args.format, {"parameter": parameter.value}))
    return EXIT_OK


def cmd_optimize(args) -> int:
    spec = _network_from(args)
    traffic = solve(spec)
    problem = allocation_problem_from(spec, traffic, args.budget)
    try:
        solution = solve_allocation(problem)
    except InfeasibleAllocationError as e:
        log_event("OPTIMIZE", f"{e} (최소 예산: C > {e.minimum_budget:g})", "error")
        return EXIT_INPUT

    extra: Dict[str, Any] = {"budget": problem.budget, "multiplier": solution.multiplier}
    if not args.no_verify:
        seed = get_default_seed() if args.seed is None else args.seed
        report = verify_allocation(problem, solution, grid_step=args.grid_step, samples=args.samples, seed=seed)
        extra.update({"verify_seed": report.seed, "verify_samples": report.samples, "verify_min_gap": report.min_gap})

    base_rates = [node.service_rate for node in spec.nodes]
    plan = allocation_to_instances(solution, base_rates)
    scale = TIME_SCALE[args.units]
    chain = allocation_chain_response(solution, traffic.visit_ratios)

    units = args.units
    columns = ["node", "lambda", "capacity", "mu", "c_mu", "base_mu", "instances", "slack",
               f"objective_{units}", f"chain_ET_{units}"]
    rows = [
        [node_id, lam, c, mu, c_mu, base, count, slack, "", ""]
        for node_id, lam, c, mu, c_mu, base, count, slack in zip(
            problem.node_ids, problem.arrival_rates, problem.capacity_factors, solution.service_rates,
            solution.effective_rates, base_rates, plan.instances, plan.slack,
        )
    ]
    rows.append(["total", problem.total_arrival_rate, "", "", sum(solution.effective_rates), "",
                 sum(plan.instances), sum(plan.slack), solution.objective * scale, chain * scale])
    _emit(args, _render(columns, rows, args.format, extra))
    return EXIT_OK


def _sim_config(args, spec: NetworkSpec) -> SimConfig:
    overrides = {}
    for item in args.service:
        node_id, sep, text = item.partition("=")
        if not sep:
            raise ConfigError("expected NODE=DIST", key="service")
        overrides[node_id] = ServiceDistribution.parse(text)
    seed = get_default_seed() if args.seed is None else args.seed
    return SimConfig(
        spec=spec,
        horizon_arrivals=args.jobs,
        horizon_time=args.horizon_time,
        warmup=args.warmup,
        replications=args.reps,
        seed=seed,
        service_overrides=overrides,
        trace_path=args.trace,
        workers=args.workers,
    )


def _estimate_cells(estimate, scale: float = 1.0) -> List[float]:
    return [estimate.mean * scale, estimate.half_width * scale]


def cmd_simulate(args) -> int:
    spec = _network_from(args)
    cfg = _sim_config(args, spec)
    result = simulate(cfg)
    scale = TIME_SCALE[args.units]
    units = args.units
    columns = ["node", "rho", "rho_hw", "EQ", "EQ_hw", f"EW_{units}", f"EW_hw_{units}",
               f"ET_{units}", f"ET_hw_{units}", "throughput", "throughput_hw"]
    rows = []
    for node in result.per_node:
        targets = [(node.node_id, node)]
        if spec.is_multiclass:
            targets += [(f"{node.node_id}:{c.class_id}", c) for c in node.per_class]
        for name, est in targets:
            rows.append([name]
                        + _estimate_cells(est.utilization)
                        + _estimate_cells(est.mean_queue_length)
                        + _estimate_cells(est.mean_waiting, scale)
                        + _estimate_cells(est.mean_response, scale)
                        + _estimate_cells(est.throughput))
    blank = ["", "", "", ""]
    rows.append(["chain"] + blank + ["", ""] + _estimate_cells(result.chain_response, scale) + ["", ""])
    if spec.is_multiclass:
        for class_id, est in zip(spec.class_ids, result.class_chain_response):
            rows.append([f"chain:{class_id}"] + blank + ["", ""] + _estimate_cells(est, scale) + ["", ""])

    extra = {"seed": result.seed, "replications": result.replications,
             "arrivals": result.arrivals, "departures": result.departures}
    log_event("SIM", f"seed={result.seed}", "info")
    _emit(args, _render(columns, rows, args.format, extra))
    return EXIT_OK


def cmd_compare(args) -> int:
    spec = _network_from(args)
    cfg = _sim_config(args, spec)
    analytic = chain_metrics(spec, strict=False)
    report = compare(cfg, analytic)
    scale = TIME_SCALE[args.units]

    columns = ["target", "metric", "unit", "analytic", "simulated", "half_width", "relative_error", "status"]
    rows = []
    for row in report.rows:
        is_time = row.metric in TIME_METRICS
        factor = scale if is_time else 1.0
        status = "skip" if not row.checked else ("pass" if row.passed else "fail")
        rows.append([row.target, row.metric, args.units if is_time else "",
                     row.analytic * factor, row.simulated * factor, row.half_width * factor,
                     row.relative_error, status])
    log_event("COMPARE", f"seed={report.seed}", "info")
    _emit(args, _render(columns, rows, args.format, {"seed": report.seed, "passed": report.passed}))

    if not report.passed:
        failed = ", ".join(f"{r.target}.{r.metric}" for r in report.failures())
        send_slack_notification(f"해석/시뮬레이션 비교 실패: {failed} (seed={report.seed})", "queueing_chain.cli.compare")
        return EXIT_COMPARISON
    return EXIT_OK


COMMANDS = {
    "analyze": cmd_analyze,
    "sweep": cmd_sweep,
    "optimize": cmd_optimize,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UnstableError as e:
        log_event("CLI", str(e), "warning")
        return EXIT_UNSTABLE
    except QueueingChainError as e:
        log_event("CLI", str(e), "error")
        return EXIT_INPUT
    except Exception as e:
        error_msg = f"예상하지 못한 오류: {e}"
        log_event("CLI", error_msg, "error")
        send_slack_notification(error_msg, "queueing_chain.cli")
        return EXIT_INPUT
