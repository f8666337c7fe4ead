"""예산 제약 하의 서비스 용량 배분

목적함수 Σ 1/(c_i·μ_i - λ_i) 를 Σ c_i·μ_i = C 아래에서 최소화하는 닫힌 해와
제약면 위의 무작위 섭동으로 최적성을 확인하는 수치 검증기.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import null_space

from common_utils import get_default_seed, log_event
from queueing_chain.errors import (
    InfeasibleAllocationError,
    NonPositiveServiceRateError,
    OracleViolationError,
)
from queueing_chain.model import NetworkSpec
from queueing_chain.traffic import TrafficSolution

FEASIBILITY_MARGIN = 1e-9
ORACLE_TOLERANCE = 1e-12
ORACLE_BATCH = 10_000


@dataclass(frozen=True)
class AllocationProblem:
    arrival_rates: Tuple[float, ...]
    capacity_factors: Tuple[float, ...]
    budget: float
    node_ids: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "arrival_rates", tuple(float(x) for x in self.arrival_rates))
        object.__setattr__(self, "capacity_factors", tuple(float(x) for x in self.capacity_factors))
        object.__setattr__(self, "budget", float(self.budget))
        if len(self.arrival_rates) != len(self.capacity_factors):
            raise ValueError("arrival_rates 와 capacity_factors 의 길이가 다릅니다")
        if any(c <= 0.0 for c in self.capacity_factors):
            raise ValueError("용량 계수는 모두 0보다 커야 합니다")
        if any(lam < 0.0 for lam in self.arrival_rates):
            raise ValueError("도착률은 음수일 수 없습니다")
        if not self.node_ids:
            object.__setattr__(
                self, "node_ids", tuple(f"node{i + 1}" for i in range(len(self.arrival_rates)))
            )

    @property
    def size(self) -> int:
        return len(self.arrival_rates)

    @property
    def total_arrival_rate(self) -> float:
        return math.fsum(self.arrival_rates)


@dataclass(frozen=True)
class AllocationSolution:
    service_rates: Tuple[float, ...]
    objective: float
    # 1/√𝓛: 모든 노드가 공유하는 여유 용량 c_i·μ_i - λ_i
    multiplier: float
    problem: AllocationProblem

    @property
    def effective_rates(self) -> Tuple[float, ...]:
        return tuple(c * mu for c, mu in zip(self.problem.capacity_factors, self.service_rates))

    @property
    def constraint_residual(self) -> float:
        return abs(math.fsum(self.effective_rates) - self.problem.budget)


@dataclass(frozen=True)
class VerificationReport:
    seed: int
    samples: int
    min_gap: float
    passed: bool = True


@dataclass(frozen=True)
class InstancePlan:
    instances: Tuple[int, ...]
    # 정수 인스턴스로 올림하면서 생기는 초과 용량 (요청/초)
    slack: Tuple[float, ...]


def allocation_objective(problem: AllocationProblem, service_rates: Sequence[float]) -> float:
    """Σ 1/(c_i·μ_i - λ_i), 어떤 노드든 c_i·μ_i <= λ_i 이면 +∞"""
    total = 0.0
    for lam, c, mu in zip(problem.arrival_rates, problem.capacity_factors, service_rates):
        spare = c * mu - lam
        if spare <= 0.0:
            return math.inf
        total += 1.0 / spare
    return total


def extra_capacity_term(problem: AllocationProblem) -> float:
    """노드당 추가 용량 (C - Σλ)/N. Σλ 가 유한할 때 N → ∞ 이면 0으로 간다"""
    return (problem.budget - problem.total_arrival_rate) / problem.size


def solve_allocation(problem: AllocationProblem) -> AllocationSolution:
    """μ_i = λ_i/c_i + (C - Σλ)/(c_i·N)

    C < Σλ·(1 + 1e-9) 이면 InfeasibleAllocationError (최소 예산 포함).
    """

    total = problem.total_arrival_rate
    if problem.budget <= total or problem.budget < total * (1.0 + FEASIBILITY_MARGIN):
        raise InfeasibleAllocationError(
            f"예산 C={problem.budget:g} 로는 부족합니다: C > {total:g} 이어야 합니다",
            minimum_budget=total,
        )

    extra = extra_capacity_term(problem)
    rates = tuple(
        (lam + extra) / c for lam, c in zip(problem.arrival_rates, problem.capacity_factors)
    )
    solution = AllocationSolution(
        service_rates=rates,
        objective=allocation_objective(problem, rates),
        multiplier=extra,
        problem=problem,
    )
    log_event(
        "OPTIMIZE",
        f"N={problem.size}, C={problem.budget:g}, 노드당 추가 용량={extra:.6g}, 목적함수={solution.objective:.6g}s",
        "debug",
    )
    return solution


def allocation_chain_response(solution: AllocationSolution, visit_ratios: Sequence[float]) -> float:
    """배분 결과에서의 방문 가중 체인 응답시간 Σ v_i/(c_i·μ_i - λ_i)"""
    total = 0.0
    for v, lam, rate in zip(visit_ratios, solution.problem.arrival_rates, solution.effective_rates):
        if v == 0.0:
            continue
        spare = rate - lam
        if spare <= 0.0:
            return math.inf
        total += v / spare
    return total


def allocation_problem_from(spec: NetworkSpec, traffic: TrafficSolution, budget: float) -> AllocationProblem:
    return AllocationProblem(
        arrival_rates=traffic.arrival_rates,
        capacity_factors=tuple(node.capacity_factor for node in spec.nodes),
        budget=budget,
        node_ids=spec.node_ids,
    )


def verify_allocation(
    problem: AllocationProblem,
    solution: AllocationSolution,
    grid_step: float = 1e-3,
    samples: int = 10_000,
    seed: Optional[int] = None,
) -> VerificationReport:
    """제약면(c 의 영공간) 위 무작위 방향으로 섭동해 목적함수가 나아지지 않는지 확인

    섭동 크기는 [grid_step, 0.99·t_max] 에서 로그 균등으로 뽑는다.
    t_max 는 모든 노드가 c_i·μ_i > λ_i 를 유지하는 최대 거리.
    """

    seed = get_default_seed() if seed is None else int(seed)
    if problem.size <= 1:
        return VerificationReport(seed=seed, samples=0, min_gap=0.0, passed=True)

    c = np.array(problem.capacity_factors)
    lam = np.array(problem.arrival_rates)
    mu = np.array(solution.service_rates)
    spare = c * mu - lam
    baseline = solution.objective
    basis = null_space(c[None, :])
    rng = np.random.default_rng(seed)

    min_gap = math.inf
    remaining = samples
    while remaining > 0:
        batch = min(remaining, ORACLE_BATCH)
        remaining -= batch

        directions = basis @ rng.standard_normal((basis.shape[1], batch))
        directions /= np.linalg.norm(directions, axis=0)
        with np.errstate(divide="ignore"):
            limits = np.where(
                directions < 0.0,
                spare[:, None] / (c[:, None] * -directions),
                np.inf,
            )
        upper = 0.99 * limits.min(axis=0)
        lower = np.minimum(grid_step, upper)
        steps = np.exp(rng.uniform(np.log(lower), np.log(upper)))

        perturbed = mu[:, None] + steps * directions
        objectives = np.sum(1.0 / (c[:, None] * perturbed - lam[:, None]), axis=0)
        gaps = objectives - baseline
        batch_min = float(gaps.min())
        min_gap = min(min_gap, batch_min)
        if batch_min < -ORACLE_TOLERANCE:
            raise OracleViolationError(
                f"닫힌 해보다 목적함수가 {-batch_min:.3e} 만큼 작은 점이 있습니다 (seed={seed})"
            )

    log_event("OPTIMIZE", f"검증 통과: 섭동 {samples}개, 최소 차이={min_gap:.3e}, seed={seed}", "success")
    return VerificationReport(seed=seed, samples=samples, min_gap=min_gap, passed=True)


def allocation_to_instances(solution: AllocationSolution, base_rates: Sequence[float]) -> InstancePlan:
    """ceil(c_i·μ_i / μ_i⁰) 개 인스턴스 (최소 1개)"""

    counts, slack = [], []
    for needed, base in zip(solution.effective_rates, base_rates):
        if not base > 0.0:
            raise NonPositiveServiceRateError(f"기준 서비스율은 0보다 커야 합니다: {base}")
        count = max(1, math.ceil(needed / base - FEASIBILITY_MARGIN))
        counts.append(count)
        slack.append(count * base - needed)
    return InstancePlan(tuple(counts), tuple(slack))
