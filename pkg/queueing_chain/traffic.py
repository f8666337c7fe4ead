"""단일/다중 클래스 열린 네트워크의 트래픽(균형) 방정식과 방문비"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from common_utils import log_event
from queueing_chain.errors import ClassMismatchError
from queueing_chain.model import Discipline, NetworkSpec, solve_balance

# ρ >= 1 - 1e-9 이면 불안정으로 본다
STABILITY_MARGIN = 1e-9


def is_stable(utilization: float) -> bool:
    return utilization < 1.0 - STABILITY_MARGIN


@dataclass(frozen=True)
class TrafficSolution:
    node_ids: Tuple[str, ...]
    request_rate: float
    arrival_rates: Tuple[float, ...]
    visit_ratios: Tuple[float, ...]
    utilizations: Tuple[float, ...]
    stable: Tuple[bool, ...]
    class_ids: Tuple[str, ...] = ()
    # [노드][클래스], 다중 클래스 해에서만 채워짐
    class_arrival_rates: Optional[Tuple[Tuple[float, ...], ...]] = None
    class_visit_ratios: Optional[Tuple[Tuple[float, ...], ...]] = None
    class_utilizations: Optional[Tuple[Tuple[float, ...], ...]] = None

    @property
    def all_stable(self) -> bool:
        return all(self.stable)

    @property
    def is_multiclass(self) -> bool:
        return self.class_arrival_rates is not None

    def unstable_nodes(self) -> Tuple[str, ...]:
        return tuple(n for n, ok in zip(self.node_ids, self.stable) if not ok)

    def arrival_rate(self, node_id: str) -> float:
        return self.arrival_rates[self.node_ids.index(node_id)]


def _single_class_utilizations(spec: NetworkSpec, arrivals: np.ndarray) -> np.ndarray:
    return np.array([
        lam / (node.servers * node.effective_rate())
        for node, lam in zip(spec.nodes, arrivals)
    ])


def solve_traffic(spec: NetworkSpec) -> TrafficSolution:
    """λ_i = λ·p0[i] + Σ_j λ_j·p_ji 를 풀고 v_i = λ_i/λ, ρ_i = λ_i/(m_i·c_i·μ_i)

    열린 네트워크가 아니면 SingularRoutingError. 불안정은 오류가 아니라 stable 플래그로 보고.
    """

    rate = spec.request_rate
    arrivals = solve_balance(spec.routing.matrix(), rate * spec.routing.entry_vector())
    visits = arrivals / rate
    rho = _single_class_utilizations(spec, arrivals)
    stable = tuple(bool(is_stable(r)) for r in rho)

    if not all(stable):
        unstable = [n for n, ok in zip(spec.node_ids, stable) if not ok]
        log_event("TRAFFIC", f"불안정 노드: {', '.join(unstable)}", "warning")

    return TrafficSolution(
        node_ids=spec.node_ids,
        request_rate=rate,
        arrival_rates=tuple(float(x) for x in arrivals),
        visit_ratios=tuple(float(x) for x in visits),
        utilizations=tuple(float(x) for x in rho),
        stable=stable,
        class_ids=spec.class_ids,
    )


def check_class_rates(spec: NetworkSpec) -> None:
    """FCFS 노드에서 클래스별 서비스율이 다르면 ClassMismatchError"""
    for node in spec.nodes:
        if node.discipline == Discipline.FCFS and node.has_class_dependent_rates():
            raise ClassMismatchError(
                f"FCFS 노드 '{node.id}' 에 클래스별로 다른 서비스율이 지정되었습니다"
            )


def class_utilization_matrix(spec: NetworkSpec, class_arrivals: np.ndarray) -> np.ndarray:
    """BCMP 이용률 ρ_il (행: 노드, 열: 클래스)

    FCFS 는 클래스 공통율 μ_i, PS 는 클래스별 μ_il 을 쓴다.
    """

    rho = np.zeros_like(class_arrivals)
    for i, node in enumerate(spec.nodes):
        for l, class_id in enumerate(spec.class_ids):
            if node.discipline == Discipline.PS:
                rate = node.effective_rate(class_id)
            else:
                rate = node.effective_rate()
            rho[i, l] = class_arrivals[i, l] / (node.servers * rate)
    return rho


def solve_traffic_multiclass(spec: NetworkSpec) -> TrafficSolution:
    """λ_il = λ·p0[i]·p_{0,l} + Σ_j Σ_r λ_jr·p_{jr,il} 를 (노드, 클래스) 평탄화 인덱스로 푼다"""

    check_class_rates(spec)
    rate = spec.request_rate
    num_nodes, num_classes = spec.num_nodes, spec.num_classes
    external = rate * np.kron(spec.routing.entry_vector(), spec.class_entry_vector())
    flat = solve_balance(spec.class_routing(), external)

    class_arrivals = flat.reshape(num_nodes, num_classes)
    arrivals = class_arrivals.sum(axis=1)
    class_rho = class_utilization_matrix(spec, class_arrivals)
    rho = class_rho.sum(axis=1)
    stable = tuple(bool(is_stable(r)) for r in rho)

    log_event(
        "TRAFFIC",
        f"다중 클래스 트래픽 해: 노드 {num_nodes}개 x 클래스 {num_classes}개",
        "debug",
    )
    if not all(stable):
        unstable = [n for n, ok in zip(spec.node_ids, stable) if not ok]
        log_event("TRAFFIC", f"불안정 노드: {', '.join(unstable)}", "warning")

    def rows(matrix):
        return tuple(tuple(float(x) for x in row) for row in matrix)

    return TrafficSolution(
        node_ids=spec.node_ids,
        request_rate=rate,
        arrival_rates=tuple(float(x) for x in arrivals),
        visit_ratios=tuple(float(x) for x in arrivals / rate),
        utilizations=tuple(float(x) for x in rho),
        stable=stable,
        class_ids=spec.class_ids,
        class_arrival_rates=rows(class_arrivals),
        class_visit_ratios=rows(class_arrivals / rate),
        class_utilizations=rows(class_rho),
    )


def solve(spec: NetworkSpec) -> TrafficSolution:
    """클래스 수에 따라 단일/다중 클래스 해를 고른다"""
    if spec.is_multiclass or spec.routing.class_switching is not None:
        return solve_traffic_multiclass(spec)
    return solve_traffic(spec)
