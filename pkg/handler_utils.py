import json
import math
import os
from typing import Any, Dict

from common_utils import log_event, send_slack_notification
from queueing_chain.analytic import ChainMetrics, NodeMetrics
from queueing_chain.model import NetworkSpec, build_network
from queueing_chain.optimizer import AllocationSolution, InstancePlan
from queueing_chain.simulator import ComparisonReport

METADATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "metadata")
CANONICAL_NETWORK_PATH = os.path.join(METADATA_DIR, "cims_network.json")


def send_analysis_handler_error_notification(
    function_name: str, error: str, additional_info: str = None
) -> bool:
    """analysis_handler.py에서 발생한 에러를 위한 전용 알림 함수"""

    message = f"Analysis Handler 에러\n*함수명:* {function_name}\n*에러:* {error}"
    if additional_info:
        message += f"\n*추가 정보:* {additional_info}"
    return send_slack_notification(message, f"analysis_handler_{function_name}")


def parse_event(event: Any) -> Dict[str, Any]:
    """API Gateway 처럼 body 가 문자열로 들어오는 경우도 dict 로 맞춘다"""
    if event is None:
        return {}
    if isinstance(event, dict) and isinstance(event.get("body"), str):
        return json.loads(event["body"])
    return dict(event)


def spec_from_event(event: Dict[str, Any]) -> NetworkSpec:
    """이벤트의 preset 또는 network 문서에서 NetworkSpec 을 만든다

    둘 다 없으면 metadata/cims_network.json 을 쓴다.
    """

    preset = event.get("preset")
    document = event.get("network")
    config_path = None
    if preset is None and document is None:
        config_path = CANONICAL_NETWORK_PATH
        log_event("HANDLER", "네트워크 지정이 없어 기본 설정 파일을 사용합니다", "debug")
    return build_network(
        preset=preset,
        config_path=config_path,
        document=document,
        interarrival=event.get("interarrival"),
        rate=event.get("rate"),
        capacity=event.get("capacity"),
        servers=event.get("servers"),
        bulk=event.get("bulk"),
        overrides=event.get("set", {}),
    )


def json_safe(value: float) -> Any:
    """JSON 에 쓸 수 없는 inf/nan 은 문자열로"""
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return value


def node_metrics_to_dict(node: NodeMetrics) -> Dict[str, Any]:
    result = {
        "node": node.node_id,
        "arrival_rate": json_safe(node.arrival_rate),
        "visit_ratio": json_safe(node.visit_ratio),
        "utilization": json_safe(node.utilization),
        "mean_queue_length": json_safe(node.mean_queue_length),
        "mean_waiting": json_safe(node.mean_waiting),
        "mean_response": json_safe(node.mean_response),
        "stable": node.stable,
        "exact": node.exact,
    }
    if len(node.per_class) > 1:
        result["classes"] = [
            {
                "class": c.class_id,
                "arrival_rate": json_safe(c.arrival_rate),
                "utilization": json_safe(c.utilization),
                "mean_waiting": json_safe(c.mean_waiting),
                "mean_response": json_safe(c.mean_response),
            }
            for c in node.per_class
        ]
    return result


def chain_metrics_to_dict(metrics: ChainMetrics) -> Dict[str, Any]:
    return {
        "model": metrics.model,
        "stable": metrics.stable,
        "request_rate": metrics.request_rate,
        "chain_response": json_safe(metrics.chain_response),
        "response_lower_bound": json_safe(metrics.response_lower_bound),
        "bottleneck": metrics.bottleneck,
        "nodes": [node_metrics_to_dict(n) for n in metrics.per_node],
    }


def allocation_to_dict(solution: AllocationSolution, plan: InstancePlan, chain_response: float) -> Dict[str, Any]:
    problem = solution.problem
    return {
        "budget": problem.budget,
        "objective": json_safe(solution.objective),
        "chain_response": json_safe(chain_response),
        "multiplier": solution.multiplier,
        "nodes": [
            {"node": node_id, "service_rate": mu, "instances": count, "slack": slack}
            for node_id, mu, count, slack in zip(
                problem.node_ids, solution.service_rates, plan.instances, plan.slack
            )
        ],
    }


def comparison_to_dict(report: ComparisonReport) -> Dict[str, Any]:
    return {
        "passed": report.passed,
        "seed": report.seed,
        "rows": [
            {
                "target": row.target,
                "metric": row.metric,
                "analytic": json_safe(row.analytic),
                "simulated": json_safe(row.simulated),
                "half_width": json_safe(row.half_width),
                "checked": row.checked,
                "passed": row.passed,
            }
            for row in report.rows
        ],
    }


def make_response(status_code: int, body: Dict[str, Any]) -> Dict[str, Any]:
    return {
        "statusCode": status_code,
        "body": json.dumps(body, ensure_ascii=False, default=str),
    }
