"""닫힌 형태 성능 지표

단일 노드(M/M/1, M/M/m, 벌크 M^X/M/1, M/G/1 P-K), Jackson 체인, BCMP 다중 클래스
체인. 불안정 노드의 지표는 +∞ 로 보고하고, 체인 합산에 +∞ 가 하나라도 있으면 +∞.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import gammaln, logsumexp

from common_utils import log_event
from queueing_chain.errors import (
    MultiClassNotSupportedError,
    NonPositiveServiceRateError,
    UnstableError,
)
from queueing_chain.model import BulkSpec, Discipline, NetworkSpec, NodeSpec
from queueing_chain.traffic import (
    TrafficSolution,
    check_class_rates,
    class_utilization_matrix,
    is_stable,
    solve,
    solve_traffic_multiclass,
)

INF = math.inf
# 누적확률이 1 - 1e-10 에 닿는 가장 작은 k 까지, 최대 10^6 항
MARGINAL_TAIL = 1e-10
MARGINAL_CAP = 10**6


def _empty_pmf() -> np.ndarray:
    return np.zeros(0)


@dataclass(frozen=True)
class ClassMetrics:
    class_id: str
    arrival_rate: float
    utilization: float
    mean_in_system: float
    mean_queue_length: float
    mean_waiting: float
    mean_response: float
    service_time: float


@dataclass(frozen=True)
class NodeMetrics:
    node_id: str
    arrival_rate: float
    utilization: float
    mean_queue_length: float
    mean_waiting: float
    mean_response: float
    service_time: float
    stable: bool
    marginal_pmf: np.ndarray = field(default_factory=_empty_pmf, compare=False, repr=False)
    visit_ratio: float = 1.0
    # 벌크 입구 하류 노드처럼 곱 형태 근사인 경우 False
    exact: bool = True
    per_class: Tuple[ClassMetrics, ...] = ()

    @property
    def mean_in_system(self) -> float:
        return self.mean_queue_length + self.arrival_rate * self.service_time

    @property
    def tail_mass(self) -> float:
        if self.marginal_pmf.size == 0:
            return math.nan
        return 1.0 - float(self.marginal_pmf.sum())


@dataclass(frozen=True)
class ChainMetrics:
    node_ids: Tuple[str, ...]
    request_rate: float
    per_node: Tuple[NodeMetrics, ...]
    chain_response: float
    response_lower_bound: float
    bottleneck: str
    model: str = "jackson"
    class_ids: Tuple[str, ...] = ()
    # 클래스 l 로 들어온 요청의 체인 응답시간 (p_{0,l} = 0 이면 nan)
    class_response: Tuple[float, ...] = ()

    @property
    def stable(self) -> bool:
        return all(n.stable for n in self.per_node)

    def node(self, node_id: str) -> NodeMetrics:
        return self.per_node[self.node_ids.index(node_id)]


def _check_rates(arrival_rate: float, service_rate: float) -> None:
    if not service_rate > 0.0:
        raise NonPositiveServiceRateError(f"서비스율은 0보다 커야 합니다: μ={service_rate}")
    if arrival_rate < 0.0:
        raise ValueError(f"도착률은 음수일 수 없습니다: λ={arrival_rate}")


def _unstable(node_id: str, arrival_rate: float, utilization: float, service_time: float) -> NodeMetrics:
    return NodeMetrics(
        node_id=node_id,
        arrival_rate=arrival_rate,
        utilization=utilization,
        mean_queue_length=INF,
        mean_waiting=INF,
        mean_response=INF,
        service_time=service_time,
        stable=False,
    )


def _marginal_pmf(head: np.ndarray, ratio: float) -> np.ndarray:
    """head(π(0..m)) 뒤에 π(m+j) = π(m)·ratio^j 꼬리를 붙여 컷오프까지 실체화"""

    target = 1.0 - MARGINAL_TAIL
    cumulative = np.cumsum(head)
    index = int(np.searchsorted(cumulative, target))
    if index < head.size or ratio <= 0.0 or head[-1] <= 0.0:
        return head[: index + 1].copy()

    needed = math.log(MARGINAL_TAIL * (1.0 - ratio) / head[-1]) / math.log(ratio)
    extra = int(min(max(math.ceil(needed) + 2, 1), MARGINAL_CAP - head.size))
    tail = head[-1] * ratio ** np.arange(1, extra + 1)
    pmf = np.concatenate([head, tail])
    index = int(np.searchsorted(np.cumsum(pmf), target))
    return pmf[: index + 1] if index < pmf.size else pmf


def mm1_metrics(arrival_rate: float, service_rate: float, node_id: str = "") -> NodeMetrics:
    """M/M/1: E[W]=ρ/(μ(1-ρ)), E[Q]=ρ²/(1-ρ), E[T]=1/(μ-λ), π(k)=(1-ρ)ρ^k"""

    _check_rates(arrival_rate, service_rate)
    rho = arrival_rate / service_rate
    if not is_stable(rho):
        return _unstable(node_id, arrival_rate, rho, 1.0 / service_rate)

    waiting = rho / (service_rate * (1.0 - rho))
    return NodeMetrics(
        node_id=node_id,
        arrival_rate=arrival_rate,
        utilization=rho,
        mean_queue_length=rho * rho / (1.0 - rho),
        mean_waiting=waiting,
        mean_response=1.0 / (service_rate - arrival_rate),
        service_time=1.0 / service_rate,
        stable=True,
        marginal_pmf=_marginal_pmf(np.array([1.0 - rho]), rho),
    )


def mmm_metrics(arrival_rate: float, service_rate: float, servers: int, node_id: str = "") -> NodeMetrics:
    """M/M/m (Erlang-C). m=1 이면 mm1_metrics 와 동일한 결과"""

    if servers < 1:
        raise ValueError(f"서버 수는 1 이상이어야 합니다: m={servers}")
    if servers == 1:
        return mm1_metrics(arrival_rate, service_rate, node_id)

    _check_rates(arrival_rate, service_rate)
    offered = arrival_rate / service_rate
    rho = offered / servers
    if not is_stable(rho):
        return _unstable(node_id, arrival_rate, rho, 1.0 / service_rate)
    if arrival_rate == 0.0:
        return NodeMetrics(node_id, 0.0, 0.0, 0.0, 0.0, 1.0 / service_rate, 1.0 / service_rate,
                           True, marginal_pmf=np.array([1.0]))

    # log(a^k / k!) 로 계산해 큰 m 에서도 넘치지 않게 한다
    k = np.arange(servers + 1)
    log_terms = k * math.log(offered) - gammaln(k + 1)
    log_wait_term = log_terms[-1] - math.log1p(-rho)
    log_norm = logsumexp(np.append(log_terms[:-1], log_wait_term))
    erlang_c = math.exp(log_wait_term - log_norm)

    waiting = erlang_c / (servers * service_rate - arrival_rate)
    head = np.exp(log_terms - log_norm)
    return NodeMetrics(
        node_id=node_id,
        arrival_rate=arrival_rate,
        utilization=rho,
        mean_queue_length=erlang_c * rho / (1.0 - rho),
        mean_waiting=waiting,
        mean_response=waiting + 1.0 / service_rate,
        service_time=1.0 / service_rate,
        stable=True,
        marginal_pmf=_marginal_pmf(head, rho),
    )


def residual_time(arrival_rate: float, service_second_moment: float) -> float:
    """평균 잔여 서비스 시간 R = λ·E[S²]/2 (M/M/1 에서는 ρ/μ)"""
    return arrival_rate * service_second_moment / 2.0


def pk_waiting(arrival_rate: float, mean_service: float, service_second_moment: float) -> float:
    """Pollaczek-Khinchin: E[W] = λ·E[S²] / (2(1-ρ)), ρ = λ·E[S]"""

    if not mean_service > 0.0:
        raise NonPositiveServiceRateError(f"평균 서비스 시간은 0보다 커야 합니다: {mean_service}")
    if arrival_rate == 0.0:
        return 0.0
    rho = arrival_rate * mean_service
    if not is_stable(rho):
        raise UnstableError(f"M/G/1 불안정: ρ={rho:.6f}")
    return residual_time(arrival_rate, service_second_moment) / (1.0 - rho)


def service_moments(kind: str, mean: float, samples: Optional[Sequence[float]] = None) -> Tuple[float, float]:
    """서비스 시간 분포의 (E[S], E[S²])"""
    if kind == "exponential":
        return mean, 2.0 * mean * mean
    if kind == "deterministic":
        return mean, mean * mean
    if kind == "empirical":
        values = np.asarray(samples, dtype=float)
        return float(values.mean()), float(np.mean(values * values))
    raise ValueError(f"알 수 없는 서비스 분포: {kind}")


def bulk_moment_ratio(bulk: BulkSpec) -> float:
    """E[b²]/E[b] - 1 (벌크 도착으로 인한 추가 대기 항의 계수)"""
    return bulk.second_moment / bulk.first_moment - 1.0


def bulk_waiting(bulk_rate: float, service_rate: float, bulk: BulkSpec) -> float:
    """벌크 도착 M^X/M/1 의 임의 요청 평균 대기시간

    E[W] = ρ/(μ(1-ρ)) + (E[b²]/E[b] - 1)/(2μ(1-ρ)),  ρ = λ_b·E[b]/μ
    """

    _check_rates(bulk_rate, service_rate)
    rho = bulk_rate * bulk.first_moment / service_rate
    if not is_stable(rho):
        raise UnstableError(f"벌크 노드 불안정: ρ={rho:.6f}")
    return rho / (service_rate * (1.0 - rho)) + bulk_moment_ratio(bulk) / (
        2.0 * service_rate * (1.0 - rho)
    )


def bulk_node_metrics(bulk_rate: float, service_rate: float, bulk: BulkSpec, node_id: str = "") -> NodeMetrics:
    """벌크 입구 노드의 NodeMetrics (불안정하면 +∞)"""

    _check_rates(bulk_rate, service_rate)
    arrival_rate = bulk_rate * bulk.first_moment
    rho = arrival_rate / service_rate
    if not is_stable(rho):
        return _unstable(node_id, arrival_rate, rho, 1.0 / service_rate)
    waiting = bulk_waiting(bulk_rate, service_rate, bulk)
    return NodeMetrics(
        node_id=node_id,
        arrival_rate=arrival_rate,
        utilization=rho,
        mean_queue_length=arrival_rate * waiting,
        mean_waiting=waiting,
        mean_response=waiting + 1.0 / service_rate,
        service_time=1.0 / service_rate,
        stable=True,
    )


def _visit_weighted_sum(weights, values) -> float:
    total = 0.0
    for weight, value in zip(weights, values):
        if weight == 0.0:
            continue
        if math.isinf(value):
            return INF
        total += weight * value
    return total


def _station_metrics(node: NodeSpec, arrival_rate: float) -> NodeMetrics:
    """단일 클래스 노드: FCFS 는 c·μ 율의 M/M/m, PS 는 m·c·μ 율의 M/M/1-PS"""
    if node.discipline == Discipline.PS:
        return mm1_metrics(arrival_rate, node.servers * node.effective_rate(), node.id)
    return mmm_metrics(arrival_rate, node.effective_rate(), node.servers, node.id)


def _raise_if_unstable(node_ids, stable) -> None:
    unstable = [n for n, ok in zip(node_ids, stable) if not ok]
    if unstable:
        raise UnstableError(f"불안정 노드: {', '.join(unstable)}", unstable)


def jackson_chain_metrics(spec: NetworkSpec, traffic: TrafficSolution, strict: bool = True) -> ChainMetrics:
    """Jackson 곱 형태 지표와 방문 가중 체인 응답시간 E[T] = Σ v_i·E[T_i]

    strict=False 이면 불안정 노드를 UnstableError 대신 +∞ 로 채운다.
    """

    if spec.is_multiclass:
        raise MultiClassNotSupportedError("Jackson 지표는 단일 클래스 네트워크 전용입니다")
    if strict:
        _raise_if_unstable(traffic.node_ids, traffic.stable)

    per_node = tuple(
        replace(_station_metrics(node, lam), visit_ratio=visits)
        for node, lam, visits in zip(spec.nodes, traffic.arrival_rates, traffic.visit_ratios)
    )
    visits = traffic.visit_ratios
    bottleneck = max(per_node, key=lambda m: m.utilization).node_id
    return ChainMetrics(
        node_ids=spec.node_ids,
        request_rate=traffic.request_rate,
        per_node=per_node,
        chain_response=_visit_weighted_sum(visits, [m.mean_response for m in per_node]),
        response_lower_bound=math.fsum(
            v * node.visit_service_time() for v, node in zip(visits, spec.nodes)
        ),
        bottleneck=bottleneck,
        model="jackson",
        class_ids=spec.class_ids,
    )


def _bcmp_ps_node(node: NodeSpec, class_ids, class_arrivals, class_rho) -> NodeMetrics:
    """PS 노드: E[K_il] = ρ_il/(1-ρ_i), E[T_il] = S_il/(1-ρ_i), E[W_il] = S_il·ρ_i/(1-ρ_i)"""

    rho = float(sum(class_rho))
    arrival_rate = float(sum(class_arrivals))
    service_times = [node.visit_service_time(c) for c in class_ids]
    if not is_stable(rho):
        metrics = _unstable(node.id, arrival_rate, rho, service_times[0])
        per_class = tuple(
            ClassMetrics(c, lam, r, INF, INF, INF, INF, s)
            for c, lam, r, s in zip(class_ids, class_arrivals, class_rho, service_times)
        )
        return replace(metrics, per_class=per_class)

    per_class = []
    for class_id, lam, r, s in zip(class_ids, class_arrivals, class_rho, service_times):
        waiting = s * rho / (1.0 - rho)
        per_class.append(ClassMetrics(
            class_id=class_id,
            arrival_rate=lam,
            utilization=r,
            mean_in_system=r / (1.0 - rho),
            mean_queue_length=lam * waiting,
            mean_waiting=waiting,
            mean_response=s / (1.0 - rho),
            service_time=s,
        ))

    queue = math.fsum(c.mean_queue_length for c in per_class)
    if arrival_rate > 0.0:
        service_time = math.fsum(c.arrival_rate * c.service_time for c in per_class) / arrival_rate
        waiting = queue / arrival_rate
    else:
        service_time = service_times[0]
        waiting = 0.0
    return NodeMetrics(
        node_id=node.id,
        arrival_rate=arrival_rate,
        utilization=rho,
        mean_queue_length=queue,
        mean_waiting=waiting,
        mean_response=waiting + service_time,
        service_time=service_time,
        stable=True,
        marginal_pmf=_marginal_pmf(np.array([1.0 - rho]), rho),
        per_class=tuple(per_class),
    )


def _bcmp_fcfs_node(node: NodeSpec, class_ids, class_arrivals, class_rho) -> NodeMetrics:
    """FCFS 노드: 클래스 공통율이므로 집계 M/M/m 의 대기시간을 모든 클래스가 공유"""

    aggregate = mmm_metrics(float(sum(class_arrivals)), node.effective_rate(), node.servers, node.id)
    per_class = tuple(
        ClassMetrics(
            class_id=class_id,
            arrival_rate=lam,
            utilization=r,
            mean_in_system=lam * aggregate.mean_response if aggregate.stable else INF,
            mean_queue_length=lam * aggregate.mean_waiting if aggregate.stable else INF,
            mean_waiting=aggregate.mean_waiting,
            mean_response=aggregate.mean_response,
            service_time=aggregate.service_time,
        )
        for class_id, lam, r in zip(class_ids, class_arrivals, class_rho)
    )
    return replace(aggregate, per_class=per_class)


def bcmp_chain_metrics(spec: NetworkSpec, traffic: TrafficSolution, strict: bool = True) -> ChainMetrics:
    """BCMP 다중 클래스 지표 (FCFS/PS 노드)

    FCFS ρ_i = Σ_l λ_il/(m·c·μ_i), PS ρ_i = Σ_l λ_il/(m·c·μ_il).
    체인 응답시간은 Σ_i Σ_l v_il·E[T_il].
    """

    check_class_rates(spec)
    if traffic.class_arrival_rates is None:
        traffic = solve_traffic_multiclass(spec)
    class_arrivals = np.array(traffic.class_arrival_rates, dtype=float)
    class_rho = class_utilization_matrix(spec, class_arrivals)
    if strict:
        _raise_if_unstable(spec.node_ids, [is_stable(r) for r in class_rho.sum(axis=1)])

    class_ids = spec.class_ids
    rate = traffic.request_rate
    per_node = []
    for i, node in enumerate(spec.nodes):
        if node.discipline == Discipline.PS:
            metrics = _bcmp_ps_node(node, class_ids, class_arrivals[i], class_rho[i])
        else:
            metrics = _bcmp_fcfs_node(node, class_ids, class_arrivals[i], class_rho[i])
        per_node.append(replace(metrics, visit_ratio=traffic.visit_ratios[i]))
    per_node = tuple(per_node)

    class_visits = class_arrivals / rate
    weights, responses, bound = [], [], []
    for i, node in enumerate(spec.nodes):
        for l, class_id in enumerate(class_ids):
            weights.append(class_visits[i, l])
            responses.append(per_node[i].per_class[l].mean_response)
            bound.append(class_visits[i, l] * node.visit_service_time(class_id))

    class_response = []
    for l, cls in enumerate(spec.classes):
        if cls.entry_probability > 0.0:
            value = _visit_weighted_sum(
                class_visits[:, l],
                [per_node[i].per_class[l].mean_response for i in range(spec.num_nodes)],
            )
            class_response.append(value / cls.entry_probability)
        else:
            class_response.append(math.nan)

    bottleneck = max(per_node, key=lambda m: m.utilization).node_id
    return ChainMetrics(
        node_ids=spec.node_ids,
        request_rate=rate,
        per_node=per_node,
        chain_response=_visit_weighted_sum(weights, responses),
        response_lower_bound=math.fsum(bound),
        bottleneck=bottleneck,
        model="bcmp",
        class_ids=class_ids,
        class_response=tuple(class_response),
    )


def _with_bulk_entry(spec: NetworkSpec, metrics: ChainMetrics, strict: bool) -> ChainMetrics:
    """입구 노드를 벌크 M^X/M/1 결과로 바꾸고 하류 노드는 근사로 표시"""

    entry = spec.entry_node_index()
    node = spec.nodes[entry]
    bulk_metrics = bulk_node_metrics(spec.external_rate, node.effective_rate(), spec.bulk, node.id)
    if strict and not bulk_metrics.stable:
        raise UnstableError(f"불안정 노드: {node.id}", [node.id])

    old = metrics.per_node[entry]
    per_class = tuple(
        replace(
            c,
            mean_queue_length=c.arrival_rate * bulk_metrics.mean_waiting,
            mean_in_system=c.arrival_rate * bulk_metrics.mean_response,
            mean_waiting=bulk_metrics.mean_waiting,
            mean_response=bulk_metrics.mean_response,
        )
        for c in old.per_class
    )
    entry_metrics = replace(bulk_metrics, visit_ratio=old.visit_ratio, per_class=per_class)
    per_node = tuple(
        entry_metrics if i == entry else replace(m, exact=False)
        for i, m in enumerate(metrics.per_node)
    )
    chain = metrics.chain_response
    if not math.isinf(chain):
        chain += old.visit_ratio * (entry_metrics.mean_response - old.mean_response)
    if math.isinf(entry_metrics.mean_response):
        chain = INF
    return replace(metrics, per_node=per_node, chain_response=chain)


def chain_metrics(spec: NetworkSpec, traffic: Optional[TrafficSolution] = None, strict: bool = True) -> ChainMetrics:
    """네트워크 종류에 맞춰 Jackson/BCMP 를 고르고 벌크 입구를 반영한다"""

    if traffic is None:
        traffic = solve(spec)
    if spec.is_multiclass or traffic.is_multiclass:
        metrics = bcmp_chain_metrics(spec, traffic, strict)
    else:
        metrics = jackson_chain_metrics(spec, traffic, strict)
    if spec.bulk is not None:
        metrics = _with_bulk_entry(spec, metrics, strict)
    log_event(
        "ANALYTIC",
        f"{metrics.model} 체인 E[T]={metrics.chain_response:.6g}s, 하한={metrics.response_lower_bound:.6g}s, "
        f"병목={metrics.bottleneck}",
        "debug",
    )
    return metrics
