import os

from common_utils import get_default_seed, log_event
from handler_utils import (
    allocation_to_dict,
    chain_metrics_to_dict,
    comparison_to_dict,
    make_response,
    parse_event,
    send_analysis_handler_error_notification,
    spec_from_event,
)
from queueing_chain.analytic import chain_metrics
from queueing_chain.errors import InfeasibleAllocationError, QueueingChainError
from queueing_chain.optimizer import (
    allocation_chain_response,
    allocation_problem_from,
    allocation_to_instances,
    solve_allocation,
    verify_allocation,
)
from queueing_chain.simulator import SimConfig, compare
from queueing_chain.traffic import solve


def handler(event, context):
    """
    Analysis Lambda Handler
    이벤트의 action(analyze / optimize / compare)에 따라 네트워크를 분석하는 진입점
    """

    try:
        current_stage = os.environ.get("STAGE", "dev")
        payload = parse_event(event)
        action = payload.get("action", "analyze")
        log_event("HANDLER", f"Analysis Handler 시작 (Stage: {current_stage}, action: {action})", "start")

        spec = spec_from_event(payload)
        if action == "analyze":
            result = run_analyze(spec)
        elif action == "optimize":
            result = run_optimize(spec, payload)
        elif action == "compare":
            result = run_compare(spec, payload)
        else:
            return make_response(400, {"error": f"알 수 없는 action: {action}"})

        log_event("HANDLER", f"{action} 실행 완료", "success")
        return make_response(200, {"action": action, **result})

    except InfeasibleAllocationError as e:
        log_event("HANDLER", str(e), "error")
        return make_response(400, {"error": str(e), "minimum_budget": e.minimum_budget})
    except QueueingChainError as e:
        log_event("HANDLER", str(e), "error")
        return make_response(400, {"error": str(e)})
    except Exception as e:
        error_msg = f"Analysis Handler 실행 중 오류: {str(e)}"
        log_event("HANDLER", error_msg, "error")
        send_analysis_handler_error_notification("handler", error_msg)
        return make_response(
            500,
            {
                "error": "Analysis Lambda Handler 실행 중 오류가 발생했습니다.",
                "details": str(e),
            },
        )


def run_analyze(spec):
    """해석 지표 (불안정 노드는 inf 로 표기)"""
    return chain_metrics_to_dict(chain_metrics(spec, strict=False))


def run_optimize(spec, payload):
    if "budget" not in payload:
        raise QueueingChainError("optimize 에는 budget 이 필요합니다")
    traffic = solve(spec)
    problem = allocation_problem_from(spec, traffic, float(payload["budget"]))
    solution = solve_allocation(problem)
    result = allocation_to_dict(
        solution,
        allocation_to_instances(solution, [node.service_rate for node in spec.nodes]),
        allocation_chain_response(solution, traffic.visit_ratios),
    )
    if payload.get("verify", True):
        report = verify_allocation(
            problem, solution, samples=int(payload.get("samples", 10_000)), seed=payload.get("seed")
        )
        result["verification"] = {"seed": report.seed, "samples": report.samples, "min_gap": report.min_gap}
    return result


def run_compare(spec, payload):
    """짧은 시뮬레이션으로 해석값을 확인. 실패하면 Slack 알림"""

    cfg = SimConfig(
        spec=spec,
        horizon_arrivals=int(float(payload.get("jobs", 20_000))),
        warmup=float(payload.get("warmup", 0.2)),
        replications=int(payload.get("reps", 5)),
        seed=int(payload.get("seed", get_default_seed())),
    )
    report = compare(cfg, chain_metrics(spec, strict=False))
    if not report.passed:
        failed = ", ".join(f"{r.target}.{r.metric}" for r in report.failures())
        send_analysis_handler_error_notification("run_compare", f"비교 실패: {failed}", f"seed={report.seed}")
    return comparison_to_dict(report)
