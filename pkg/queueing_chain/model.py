"""네트워크 도메인 타입, 검증, 프리셋, 설정 문서 입출력

모든 타입은 생성 후 불변(frozen dataclass)이며 스레드 간 공유해도 안전하다.
서비스율은 항상 요청/초 단위로 저장하고, 설정 문서의 ``time:`` 접두사 값과
``service_time`` 키는 읽을 때 율로 변환한다.
"""

import json
import math
import warnings
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from common_utils import load_json_document, log_event
from queueing_chain.errors import ConfigError, SingularRoutingError, ValidationError

ROW_SUM_TOLERANCE = 1e-9
# 이 값 이하의 초과분은 부동소수점 잡음으로 보고 건드리지 않는다
ROW_SUM_NOISE = 1e-12
BALANCE_RESIDUAL = 1e-10
TIME_PREFIX = "time:"
DEFAULT_CLASS_ID = "default"


class Discipline(str, Enum):
    FCFS = "FCFS"
    PS = "PS"


class BulkKind(str, Enum):
    DETERMINISTIC = "deterministic"
    UNIFORM = "uniform"
    GEOMETRIC = "geometric"
    EMPIRICAL = "empirical"


def _as_float_rows(rows) -> Tuple[Tuple[float, ...], ...]:
    return tuple(tuple(float(x) for x in row) for row in rows)


def _renormalize_rows(rows: Tuple[Tuple[float, ...], ...]):
    """행 합이 (1, 1+1e-9] 이면 조용히 1로 맞춘다"""
    fixed = []
    for row in rows:
        total = math.fsum(row)
        if 1.0 + ROW_SUM_NOISE < total <= 1.0 + ROW_SUM_TOLERANCE:
            row = tuple(x / total for x in row)
        fixed.append(row)
    return tuple(fixed)


@dataclass(frozen=True)
class NodeSpec:
    id: str
    service_rate: float
    servers: int = 1
    discipline: Discipline = Discipline.FCFS
    capacity_factor: float = 1.0
    per_class_service_rates: Optional[Tuple[Tuple[str, float], ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "discipline", Discipline(self.discipline))
        object.__setattr__(self, "service_rate", float(self.service_rate))
        object.__setattr__(self, "capacity_factor", float(self.capacity_factor))
        rates = self.per_class_service_rates
        if rates is not None:
            items = rates.items() if isinstance(rates, Mapping) else rates
            object.__setattr__(
                self,
                "per_class_service_rates",
                tuple((str(k), float(v)) for k, v in items),
            )

    def service_rate_for(self, class_id: Optional[str] = None) -> float:
        if class_id is not None and self.per_class_service_rates:
            for key, rate in self.per_class_service_rates:
                if key == class_id:
                    return rate
        return self.service_rate

    def effective_rate(self, class_id: Optional[str] = None) -> float:
        """용량 계수가 적용된 서버 한 대의 서비스율 c·μ"""
        return self.capacity_factor * self.service_rate_for(class_id)

    def visit_service_time(self, class_id: Optional[str] = None) -> float:
        """대기 없이 방문 한 번에 걸리는 시간

        FCFS는 서버 한 대가 처리하므로 1/(c·μ), PS는 m대의 용량 전체를
        공유하므로 혼자일 때 1/(m·c·μ).
        """
        rate = self.effective_rate(class_id)
        if self.discipline == Discipline.PS:
            rate *= self.servers
        return 1.0 / rate

    def has_class_dependent_rates(self) -> bool:
        if not self.per_class_service_rates:
            return False
        return len({rate for _, rate in self.per_class_service_rates}) > 1


@dataclass(frozen=True)
class RoutingMatrix:
    """p[j][i]: 노드 j를 떠난 작업이 노드 i로 갈 확률

    class_switching 은 (노드, 클래스) 평탄화 인덱스 ``node * L + class`` 위의
    (N·L)x(N·L) 행렬이다. 없으면 클래스 보존 라우팅으로 확장한다.
    """

    probabilities: Tuple[Tuple[float, ...], ...]
    entry: Tuple[float, ...]
    class_switching: Optional[Tuple[Tuple[float, ...], ...]] = None

    def __post_init__(self):
        object.__setattr__(
            self, "probabilities", _renormalize_rows(_as_float_rows(self.probabilities))
        )
        object.__setattr__(self, "entry", tuple(float(x) for x in self.entry))
        if self.class_switching is not None:
            object.__setattr__(
                self,
                "class_switching",
                _renormalize_rows(_as_float_rows(self.class_switching)),
            )

    @property
    def size(self) -> int:
        return len(self.entry)

    def matrix(self) -> np.ndarray:
        return np.array(self.probabilities, dtype=float).reshape(self.size, self.size)

    def entry_vector(self) -> np.ndarray:
        return np.array(self.entry, dtype=float)

    def exit_probabilities(self) -> np.ndarray:
        return 1.0 - self.matrix().sum(axis=1)

    def expanded(self, num_classes: int) -> np.ndarray:
        """(N·L)x(N·L) 클래스 전환 행렬"""
        if self.class_switching is not None:
            return np.array(self.class_switching, dtype=float)
        return np.kron(self.matrix(), np.eye(num_classes))


def solve_balance(routing: np.ndarray, external: np.ndarray) -> np.ndarray:
    """x = external + routingᵀ·x 를 부분 피벗 LU로 푼다

    열린 네트워크가 아니면(특이 행렬, 잔차 초과, 음수 해) SingularRoutingError.
    """

    size = routing.shape[0]
    if size == 0:
        return np.zeros(0)
    system = np.eye(size) - routing.T
    scale = max(1.0, float(np.max(np.abs(external))))
    with warnings.catch_warnings():
        warnings.simplefilter("error", LinAlgWarning)
        try:
            lu_piv = lu_factor(system)
            solution = lu_solve(lu_piv, external)
        except (LinAlgWarning, np.linalg.LinAlgError, ValueError) as e:
            raise SingularRoutingError(f"트래픽 방정식이 특이 행렬입니다: {e}") from e

    if not np.all(np.isfinite(solution)):
        raise SingularRoutingError("트래픽 방정식 해가 유한하지 않습니다")
    residual = float(np.max(np.abs(system @ solution - external)))
    if residual > BALANCE_RESIDUAL * scale:
        raise SingularRoutingError(f"트래픽 방정식 잔차가 큽니다: {residual:.3e}")
    if np.any(solution < -BALANCE_RESIDUAL * scale):
        raise SingularRoutingError("트래픽 방정식 해에 음수가 있습니다")
    return np.maximum(solution, 0.0)


@dataclass(frozen=True)
class ClassSpec:
    id: str
    entry_probability: float = 1.0


@dataclass(frozen=True)
class BulkSpec:
    """벌크 크기 분포 (지지집합은 양의 정수)"""

    kind: BulkKind
    size: Optional[int] = None
    success_probability: Optional[float] = None
    pmf: Optional[Tuple[Tuple[int, float], ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", BulkKind(self.kind))
        if self.pmf is not None:
            items = self.pmf.items() if isinstance(self.pmf, Mapping) else self.pmf
            object.__setattr__(
                self, "pmf", tuple(sorted((int(k), float(p)) for k, p in items))
            )

    @classmethod
    def deterministic(cls, size: int) -> "BulkSpec":
        return cls(BulkKind.DETERMINISTIC, size=int(size))

    @classmethod
    def uniform(cls, max_size: int) -> "BulkSpec":
        return cls(BulkKind.UNIFORM, size=int(max_size))

    @classmethod
    def geometric(cls, success_probability: float) -> "BulkSpec":
        return cls(BulkKind.GEOMETRIC, success_probability=float(success_probability))

    @classmethod
    def empirical(cls, pmf: Mapping[int, float]) -> "BulkSpec":
        return cls(BulkKind.EMPIRICAL, pmf=pmf)

    @classmethod
    def parse(cls, text: str) -> "BulkSpec":
        """``uniform:100``, ``deterministic:5``, ``geometric:0.2``, ``empirical:1=0.5,3=0.5``"""
        kind, _, arg = text.partition(":")
        try:
            kind = BulkKind(kind.strip().lower())
            if kind == BulkKind.EMPIRICAL:
                pmf = {}
                for pair in arg.split(","):
                    size, _, prob = pair.partition("=")
                    pmf[int(size)] = float(prob)
                return cls.empirical(pmf)
            if kind == BulkKind.GEOMETRIC:
                return cls.geometric(float(arg))
            return cls(kind, size=int(arg))
        except ValueError as e:
            raise ConfigError(f"벌크 분포 형식 오류 ({e})", key="bulk") from e

    def describe(self) -> str:
        if self.kind == BulkKind.GEOMETRIC:
            return f"geometric:{self.success_probability!r}"
        if self.kind == BulkKind.EMPIRICAL:
            return "empirical:" + ",".join(f"{k}={p!r}" for k, p in self.pmf)
        return f"{self.kind.value}:{self.size}"

    def support(self) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        """유한 지지집합의 (크기, 확률) 배열. 기하분포는 None"""
        if self.kind == BulkKind.DETERMINISTIC:
            return np.array([self.size]), np.array([1.0])
        if self.kind == BulkKind.UNIFORM:
            sizes = np.arange(1, self.size + 1)
            return sizes, np.full(self.size, 1.0 / self.size)
        if self.kind == BulkKind.EMPIRICAL:
            sizes = np.array([k for k, _ in self.pmf])
            return sizes, np.array([p for _, p in self.pmf])
        return None

    @property
    def first_moment(self) -> float:
        if self.kind == BulkKind.DETERMINISTIC:
            return float(self.size)
        if self.kind == BulkKind.UNIFORM:
            return (self.size + 1) / 2.0
        if self.kind == BulkKind.GEOMETRIC:
            return 1.0 / self.success_probability
        return math.fsum(k * p for k, p in self.pmf)

    @property
    def second_moment(self) -> float:
        if self.kind == BulkKind.DETERMINISTIC:
            return float(self.size) ** 2
        if self.kind == BulkKind.UNIFORM:
            n = self.size
            return (n + 1) * (2 * n + 1) / 6.0
        if self.kind == BulkKind.GEOMETRIC:
            p = self.success_probability
            return (2.0 - p) / (p * p)
        return math.fsum(k * k * p for k, p in self.pmf)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if self.kind == BulkKind.DETERMINISTIC:
            return np.full(count, self.size, dtype=np.int64)
        if self.kind == BulkKind.UNIFORM:
            return rng.integers(1, self.size + 1, size=count)
        if self.kind == BulkKind.GEOMETRIC:
            return rng.geometric(self.success_probability, size=count)
        sizes, probs = self.support()
        return rng.choice(sizes, size=count, p=probs / probs.sum())

    def violations(self) -> List[str]:
        problems = []
        if self.kind in (BulkKind.DETERMINISTIC, BulkKind.UNIFORM):
            if self.size is None or self.size < 1:
                problems.append("bulk size must be a positive integer")
        elif self.kind == BulkKind.GEOMETRIC:
            p = self.success_probability
            if p is None or not 0.0 < p <= 1.0:
                problems.append("geometric bulk probability must be in (0, 1]")
        else:
            if not self.pmf:
                problems.append("empirical bulk pmf is empty")
            else:
                if any(k < 1 for k, _ in self.pmf):
                    problems.append("bulk support must be positive integers")
                if any(p < 0.0 for _, p in self.pmf):
                    problems.append("bulk pmf has negative probability")
                if abs(math.fsum(p for _, p in self.pmf) - 1.0) > 1e-9:
                    problems.append("bulk pmf does not sum to 1")
        return problems


@dataclass(frozen=True)
class NetworkSpec:
    nodes: Tuple[NodeSpec, ...]
    routing: RoutingMatrix
    classes: Tuple[ClassSpec, ...] = (ClassSpec(DEFAULT_CLASS_ID, 1.0),)
    external_rate: float = 1.0
    bulk: Optional[BulkSpec] = None

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "external_rate", float(self.external_rate))

    @property
    def node_ids(self) -> Tuple[str, ...]:
        return tuple(node.id for node in self.nodes)

    @property
    def class_ids(self) -> Tuple[str, ...]:
        return tuple(c.id for c in self.classes)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @property
    def is_multiclass(self) -> bool:
        return self.num_classes > 1

    @property
    def request_rate(self) -> float:
        """외부 요청률 λ. 벌크가 있으면 이벤트율 λ_b·E[b]"""
        if self.bulk is None:
            return self.external_rate
        return self.external_rate * self.bulk.first_moment

    def node_index(self, node_id: str) -> int:
        for index, node in enumerate(self.nodes):
            if node.id == node_id:
                return index
        raise KeyError(node_id)

    def entry_node_index(self) -> Optional[int]:
        """외부 도착이 한 노드로만 들어오면 그 인덱스"""
        positive = [i for i, p in enumerate(self.routing.entry) if p > 0.0]
        return positive[0] if len(positive) == 1 else None

    def class_entry_vector(self) -> np.ndarray:
        return np.array([c.entry_probability for c in self.classes], dtype=float)

    def class_routing(self) -> np.ndarray:
        return self.routing.expanded(self.num_classes)

    def with_external_rate(self, rate: float) -> "NetworkSpec":
        return replace(self, external_rate=float(rate))

    def with_interarrival_time(self, seconds: float) -> "NetworkSpec":
        return replace(self, external_rate=1.0 / float(seconds))

    def with_capacity_factors(self, factors: Sequence[float]) -> "NetworkSpec":
        if len(factors) != self.num_nodes:
            raise ConfigError(
                f"용량 벡터 길이 {len(factors)} 가 노드 수 {self.num_nodes} 와 다릅니다",
                key="capacity",
            )
        nodes = tuple(replace(n, capacity_factor=float(c)) for n, c in zip(self.nodes, factors))
        return replace(self, nodes=nodes)

    def with_servers(self, servers: Sequence[int]) -> "NetworkSpec":
        if len(servers) != self.num_nodes:
            raise ConfigError(
                f"서버 수 벡터 길이 {len(servers)} 가 노드 수 {self.num_nodes} 와 다릅니다",
                key="servers",
            )
        nodes = tuple(replace(n, servers=int(m)) for n, m in zip(self.nodes, servers))
        return replace(self, nodes=nodes)

    def with_bulk(self, bulk: Optional[BulkSpec]) -> "NetworkSpec":
        return replace(self, bulk=bulk)


@dataclass(frozen=True)
class Violation:
    location: str
    message: str

    def __str__(self) -> str:
        return f"{self.location}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: Tuple[Violation, ...] = ()

    @property
    def is_valid(self) -> bool:
        return not self.violations

    def messages(self) -> List[str]:
        return [str(v) for v in self.violations]


def _check_rows(rows, labels, location: str, problems: List[Violation]) -> None:
    for label, row in zip(labels, rows):
        if any(p < 0.0 or p > 1.0 for p in row):
            problems.append(Violation(f"{location}[{label}]", "probability outside [0, 1]"))
        total = math.fsum(row)
        if total > 1.0 + ROW_SUM_TOLERANCE:
            problems.append(Violation(f"{location}[{label}]", f"row sum > 1 ({total:.12g})"))


def validate(spec: NetworkSpec) -> ValidationReport:
    """모든 불변식 위반을 모아 반환 (예외를 던지지 않음)"""

    problems: List[Violation] = []
    n = spec.num_nodes
    class_ids = spec.class_ids

    if n == 0:
        problems.append(Violation("nodes", "network has no nodes"))
    if len(set(spec.node_ids)) != n:
        problems.append(Violation("nodes", "duplicate node id"))

    for node in spec.nodes:
        where = f"nodes[{node.id}]"
        if not node.service_rate > 0.0:
            problems.append(Violation(where, "service rate must be > 0"))
        if not isinstance(node.servers, int) or node.servers < 1:
            problems.append(Violation(where, "servers must be an integer >= 1"))
        if not node.capacity_factor > 0.0:
            problems.append(Violation(where, "capacity factor must be > 0"))
        if node.per_class_service_rates is not None:
            if node.discipline != Discipline.PS:
                problems.append(Violation(where, "per-class service rates require PS discipline"))
                if node.has_class_dependent_rates() and spec.is_multiclass:
                    problems.append(
                        Violation(where, "class-dependent service rates at an FCFS node")
                    )
            for class_id, rate in node.per_class_service_rates:
                if class_id not in class_ids:
                    problems.append(Violation(where, f"unknown class '{class_id}'"))
                if not rate > 0.0:
                    problems.append(Violation(where, f"class '{class_id}' service rate must be > 0"))

    routing = spec.routing
    if len(routing.probabilities) != n or any(len(r) != n for r in routing.probabilities):
        problems.append(Violation("routing", f"matrix must be {n}x{n}"))
    else:
        _check_rows(routing.probabilities, spec.node_ids, "routing", problems)
    if len(routing.entry) != n:
        problems.append(Violation("routing.entry", f"entry vector must have {n} entries"))
    else:
        if any(p < 0.0 or p > 1.0 for p in routing.entry):
            problems.append(Violation("routing.entry", "probability outside [0, 1]"))
        if abs(math.fsum(routing.entry) - 1.0) > ROW_SUM_TOLERANCE:
            problems.append(Violation("routing.entry", "entry probabilities must sum to 1"))

    if not spec.classes:
        problems.append(Violation("classes", "at least one class is required"))
    if len(set(class_ids)) != len(class_ids):
        problems.append(Violation("classes", "duplicate class id"))
    for cls in spec.classes:
        if not 0.0 <= cls.entry_probability <= 1.0:
            problems.append(Violation(f"classes[{cls.id}]", "entry probability outside [0, 1]"))
    if spec.classes and abs(math.fsum(c.entry_probability for c in spec.classes) - 1.0) > ROW_SUM_TOLERANCE:
        problems.append(Violation("classes", "class entry probabilities must sum to 1"))

    if routing.class_switching is not None:
        size = n * spec.num_classes
        if not spec.is_multiclass:
            problems.append(Violation("class_routing", "class switching requires more than one class"))
        elif len(routing.class_switching) != size or any(
            len(r) != size for r in routing.class_switching
        ):
            problems.append(Violation("class_routing", f"matrix must be {size}x{size}"))
        else:
            labels = [f"{node}:{cls}" for node in spec.node_ids for cls in class_ids]
            _check_rows(routing.class_switching, labels, "class_routing", problems)

    if not spec.external_rate > 0.0:
        problems.append(Violation("arrival", "external rate must be > 0"))

    if spec.bulk is not None:
        for message in spec.bulk.violations():
            problems.append(Violation("arrival.bulk", message))
        entry = spec.entry_node_index()
        if entry is None:
            problems.append(Violation("arrival.bulk", "bulk arrivals require a single entry node"))
        elif not problems:
            node = spec.nodes[entry]
            if node.discipline != Discipline.FCFS or node.servers != 1:
                problems.append(
                    Violation("arrival.bulk", "bulk entry node must be FCFS with one server")
                )
            if spec.class_routing()[:, entry * spec.num_classes:(entry + 1) * spec.num_classes].any():
                problems.append(
                    Violation("arrival.bulk", "bulk entry node must not receive internal routing")
                )

    if not problems:
        try:
            external = np.kron(routing.entry_vector(), spec.class_entry_vector())
            solve_balance(spec.class_routing(), external)
        except SingularRoutingError:
            problems.append(
                Violation("routing", "network not open (routing spectral radius >= 1)")
            )

    return ValidationReport(tuple(problems))


# cIMS 노드별 서비스 시간 (초)
CIMS_SERVICE_TIMES = {
    "P-CSCF": 4e-3,
    "S/I-CSCF": 6e-3,
    "SLF": 3e-3,
    "HSS1": 9e-3,
    "HSS2": 9e-3,
    "HSS3": 9e-3,
}
CIMS_HSS_ROUTING = (0.2, 0.3, 0.5)


def _chain_spec(
    nodes: Sequence[NodeSpec],
    edges: Mapping[Tuple[str, str], float],
    classes: Sequence[ClassSpec],
    external_rate: float,
) -> NetworkSpec:
    ids = [node.id for node in nodes]
    matrix = [[0.0] * len(ids) for _ in ids]
    for (src, dst), prob in edges.items():
        matrix[ids.index(src)][ids.index(dst)] = prob
    entry = [1.0] + [0.0] * (len(ids) - 1)
    return NetworkSpec(
        nodes=tuple(nodes),
        routing=RoutingMatrix(tuple(map(tuple, matrix)), tuple(entry)),
        classes=tuple(classes),
        external_rate=external_rate,
    )


def _front_nodes() -> List[NodeSpec]:
    return [
        NodeSpec(node_id, 1.0 / CIMS_SERVICE_TIMES[node_id])
        for node_id in ("P-CSCF", "S/I-CSCF", "SLF")
    ]


def preset_cims(external_rate: float = 1.0) -> NetworkSpec:
    """P-CSCF → S/I-CSCF → SLF → {HSS1, HSS2, HSS3} 6노드 체인"""

    hss = [NodeSpec(h, 1.0 / CIMS_SERVICE_TIMES[h]) for h in ("HSS1", "HSS2", "HSS3")]
    edges = {("P-CSCF", "S/I-CSCF"): 1.0, ("S/I-CSCF", "SLF"): 1.0}
    for node, prob in zip(hss, CIMS_HSS_ROUTING):
        edges[("SLF", node.id)] = prob
    return _chain_spec(_front_nodes() + hss, edges, [ClassSpec(DEFAULT_CLASS_ID, 1.0)], external_rate)


def preset_dedicated_hss(p1: float = 0.3, p2: float = 0.6, external_rate: float = 1.0) -> NetworkSpec:
    """단일 클래스 방식: SLF가 HSS1/HSS2로 p1/p2 확률로 보내고 나머지는 이탈"""

    hss_time = CIMS_SERVICE_TIMES["HSS1"]
    nodes = _front_nodes() + [NodeSpec("HSS1", 1.0 / hss_time), NodeSpec("HSS2", 1.0 / hss_time)]
    edges = {
        ("P-CSCF", "S/I-CSCF"): 1.0,
        ("S/I-CSCF", "SLF"): 1.0,
        ("SLF", "HSS1"): p1,
        ("SLF", "HSS2"): p2,
    }
    return _chain_spec(nodes, edges, [ClassSpec(DEFAULT_CLASS_ID, 1.0)], external_rate)


def preset_shared_hss(
    p1: float = 0.3,
    p2: float = 0.6,
    external_rate: float = 1.0,
    discipline: Discipline = Discipline.FCFS,
    class_service_times: Optional[Tuple[float, float]] = None,
) -> NetworkSpec:
    """다중 클래스 방식: HSS 하나가 class1(p1·λ), class2(p2·λ)를 처리

    PS 이고 class_service_times 가 주어지면 클래스별 서비스율을 둔다.
    """

    if not 0.0 < p1 + p2 <= 1.0:
        raise ConfigError("p1 + p2 must be in (0, 1]", key="classes")
    hss_time = CIMS_SERVICE_TIMES["HSS1"]
    per_class = None
    if class_service_times is not None:
        per_class = {"class1": 1.0 / class_service_times[0], "class2": 1.0 / class_service_times[1]}
    hss = NodeSpec("HSS", 1.0 / hss_time, discipline=discipline, per_class_service_rates=per_class)
    share = p1 + p2
    classes = [ClassSpec("class1", p1 / share), ClassSpec("class2", p2 / share)]
    edges = {("P-CSCF", "S/I-CSCF"): 1.0, ("S/I-CSCF", "SLF"): 1.0, ("SLF", "HSS"): share}
    return _chain_spec(_front_nodes() + [hss], edges, classes, external_rate)


PRESETS = {
    "cims": preset_cims,
    "dedicated-hss": preset_dedicated_hss,
    "shared-hss": preset_shared_hss,
}


# ---------------------------------------------------------------------------
# 설정 문서 (JSON) 입출력


def _line_of(source_text: Optional[str], key: str) -> Optional[int]:
    """문서 텍스트에서 키가 처음 나타나는 줄 번호 (1부터)"""
    if not source_text or not key:
        return None
    needle = f'"{key}"'
    index = source_text.find(needle)
    if index < 0:
        return None
    return source_text.count("\n", 0, index) + 1


class _DocumentReader:
    """키 경로와 줄 번호를 붙여 ConfigError를 만드는 파서 도우미"""

    def __init__(self, source_text: Optional[str]):
        self.source_text = source_text

    def fail(self, message: str, path: str, key: str) -> ConfigError:
        return ConfigError(message, key=path, line=_line_of(self.source_text, key))

    def number(self, value: Any, path: str, key: str) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.fail("expected a number", path, key)
        return float(value)

    def rate(self, value: Any, path: str, key: str) -> float:
        """숫자는 그대로 율, ``time:<초>`` 문자열은 1/초 로 변환"""
        if isinstance(value, str) and value.startswith(TIME_PREFIX):
            try:
                seconds = float(value[len(TIME_PREFIX):])
            except ValueError:
                raise self.fail(f"bad time value '{value}'", path, key)
            if not seconds > 0.0:
                raise self.fail("time must be > 0", path, key)
            return 1.0 / seconds
        return self.number(value, path, key)

    def time_as_rate(self, value: Any, path: str, key: str) -> float:
        seconds = self.number(value, path, key)
        if not seconds > 0.0:
            raise self.fail("time must be > 0", path, key)
        return 1.0 / seconds

    def mapping(self, value: Any, path: str, key: str) -> Mapping:
        if not isinstance(value, Mapping):
            raise self.fail("expected an object", path, key)
        return value


def _parse_node(reader: _DocumentReader, raw: Any, index: int) -> NodeSpec:
    path = f"nodes[{index}]"
    raw = reader.mapping(raw, path, "nodes")
    node_id = raw.get("id")
    if not isinstance(node_id, str) or not node_id:
        raise reader.fail("node id must be a non-empty string", f"{path}.id", "id")
    path = f"nodes[{node_id}]"
    if "service_rate" in raw:
        rate = reader.rate(raw["service_rate"], f"{path}.service_rate", "service_rate")
    elif "service_time" in raw:
        rate = reader.time_as_rate(raw["service_time"], f"{path}.service_time", "service_time")
    else:
        raise reader.fail("missing service_rate or service_time", path, node_id)
    servers = raw.get("servers", 1)
    if isinstance(servers, bool) or not isinstance(servers, int):
        raise reader.fail("servers must be an integer", f"{path}.servers", "servers")
    discipline = raw.get("discipline", Discipline.FCFS.value)
    try:
        discipline = Discipline(str(discipline).upper())
    except ValueError:
        raise reader.fail(f"unknown discipline '{discipline}'", f"{path}.discipline", "discipline")
    capacity = reader.number(raw.get("capacity", 1.0), f"{path}.capacity", "capacity")

    per_class = None
    if "class_service_rates" in raw:
        rates = reader.mapping(raw["class_service_rates"], f"{path}.class_service_rates", "class_service_rates")
        per_class = {
            str(k): reader.rate(v, f"{path}.class_service_rates.{k}", "class_service_rates")
            for k, v in rates.items()
        }
    elif "class_service_times" in raw:
        times = reader.mapping(raw["class_service_times"], f"{path}.class_service_times", "class_service_times")
        per_class = {
            str(k): reader.time_as_rate(v, f"{path}.class_service_times.{k}", "class_service_times")
            for k, v in times.items()
        }
    return NodeSpec(node_id, rate, servers, discipline, capacity, per_class)


def _parse_bulk(reader: _DocumentReader, raw: Any) -> BulkSpec:
    raw = reader.mapping(raw, "arrival.bulk", "bulk")
    kind = raw.get("kind")
    params = reader.mapping(raw.get("params", {}), "arrival.bulk.params", "params")
    try:
        kind = BulkKind(kind)
    except ValueError:
        raise reader.fail(f"unknown bulk kind '{kind}'", "arrival.bulk.kind", "kind")
    if kind == BulkKind.DETERMINISTIC:
        return BulkSpec.deterministic(int(reader.number(params.get("size"), "arrival.bulk.params.size", "size")))
    if kind == BulkKind.UNIFORM:
        return BulkSpec.uniform(int(reader.number(params.get("max"), "arrival.bulk.params.max", "max")))
    if kind == BulkKind.GEOMETRIC:
        return BulkSpec.geometric(reader.number(params.get("p"), "arrival.bulk.params.p", "p"))
    pmf = reader.mapping(params.get("pmf"), "arrival.bulk.params.pmf", "pmf")
    try:
        return BulkSpec.empirical({int(k): reader.number(v, "arrival.bulk.params.pmf", "pmf") for k, v in pmf.items()})
    except ValueError:
        raise reader.fail("pmf keys must be integers", "arrival.bulk.params.pmf", "pmf")


def parse_network(document: Mapping[str, Any], source_text: Optional[str] = None) -> NetworkSpec:
    """설정 문서(dict)를 NetworkSpec 으로 변환

    구조 오류는 ConfigError (키 경로 + 줄 번호), 값의 불변식은 validate() 가 담당한다.
    """

    reader = _DocumentReader(source_text)
    for key in document:
        if key not in ("nodes", "routing", "classes", "class_routing", "arrival"):
            raise reader.fail("unknown top-level key", key, key)

    raw_nodes = document.get("nodes")
    if not isinstance(raw_nodes, list) or not raw_nodes:
        raise reader.fail("expected a non-empty list of nodes", "nodes", "nodes")
    nodes = [_parse_node(reader, raw, i) for i, raw in enumerate(raw_nodes)]
    ids = [node.id for node in nodes]

    raw_routing = reader.mapping(document.get("routing"), "routing", "routing")
    if "entry" not in raw_routing:
        raise reader.fail("missing entry map", "routing.entry", "routing")
    entry = [0.0] * len(ids)
    for dst, prob in reader.mapping(raw_routing["entry"], "routing.entry", "entry").items():
        if dst not in ids:
            raise reader.fail(f"unknown node '{dst}'", f"routing.entry.{dst}", dst)
        entry[ids.index(dst)] = reader.number(prob, f"routing.entry.{dst}", dst)
    matrix = [[0.0] * len(ids) for _ in ids]
    for src, row in raw_routing.items():
        if src == "entry":
            continue
        if src not in ids:
            raise reader.fail(f"unknown node '{src}'", f"routing.{src}", src)
        for dst, prob in reader.mapping(row, f"routing.{src}", src).items():
            if dst not in ids:
                raise reader.fail(f"unknown node '{dst}'", f"routing.{src}.{dst}", dst)
            matrix[ids.index(src)][ids.index(dst)] = reader.number(prob, f"routing.{src}.{dst}", dst)

    classes = [ClassSpec(DEFAULT_CLASS_ID, 1.0)]
    if "classes" in document:
        raw_classes = document["classes"]
        if not isinstance(raw_classes, list) or not raw_classes:
            raise reader.fail("expected a non-empty list of classes", "classes", "classes")
        classes = []
        for i, raw in enumerate(raw_classes):
            raw = reader.mapping(raw, f"classes[{i}]", "classes")
            class_id = raw.get("id")
            if not isinstance(class_id, str) or not class_id:
                raise reader.fail("class id must be a non-empty string", f"classes[{i}].id", "classes")
            prob = reader.number(raw.get("entry_probability", 1.0), f"classes[{class_id}].entry_probability", "entry_probability")
            classes.append(ClassSpec(class_id, prob))
    class_ids = [c.id for c in classes]

    switching = None
    if "class_routing" in document:
        raw_switching = document["class_routing"]
        if not isinstance(raw_switching, list):
            raise reader.fail("expected a list", "class_routing", "class_routing")
        size = len(ids) * len(class_ids)
        switching = [[0.0] * size for _ in range(size)]
        for i, raw in enumerate(raw_switching):
            path = f"class_routing[{i}]"
            raw = reader.mapping(raw, path, "class_routing")
            try:
                src = ids.index(raw["from"]) * len(class_ids) + class_ids.index(raw["from_class"])
                dst = ids.index(raw["to"]) * len(class_ids) + class_ids.index(raw["to_class"])
            except (KeyError, ValueError):
                raise reader.fail("unknown or missing from/from_class/to/to_class", path, "class_routing")
            switching[src][dst] = reader.number(raw.get("probability"), f"{path}.probability", "probability")

    raw_arrival = reader.mapping(document.get("arrival"), "arrival", "arrival")
    if "rate" in raw_arrival:
        rate = reader.rate(raw_arrival["rate"], "arrival.rate", "rate")
    elif "interarrival_time" in raw_arrival:
        rate = reader.time_as_rate(raw_arrival["interarrival_time"], "arrival.interarrival_time", "interarrival_time")
    else:
        raise reader.fail("missing rate or interarrival_time", "arrival", "arrival")
    bulk = _parse_bulk(reader, raw_arrival["bulk"]) if "bulk" in raw_arrival else None

    routing = RoutingMatrix(
        tuple(map(tuple, matrix)),
        tuple(entry),
        tuple(map(tuple, switching)) if switching is not None else None,
    )
    return NetworkSpec(tuple(nodes), routing, tuple(classes), rate, bulk)


def _render_bulk(bulk: BulkSpec) -> Dict[str, Any]:
    if bulk.kind == BulkKind.DETERMINISTIC:
        params = {"size": bulk.size}
    elif bulk.kind == BulkKind.UNIFORM:
        params = {"max": bulk.size}
    elif bulk.kind == BulkKind.GEOMETRIC:
        params = {"p": bulk.success_probability}
    else:
        params = {"pmf": {str(k): p for k, p in bulk.pmf}}
    return {"kind": bulk.kind.value, "params": params}


def render_network(spec: NetworkSpec) -> Dict[str, Any]:
    """NetworkSpec 을 설정 문서(dict)로 변환 (율 단위로 기록)"""

    nodes = []
    for node in spec.nodes:
        raw = {
            "id": node.id,
            "service_rate": node.service_rate,
            "servers": node.servers,
            "discipline": node.discipline.value,
            "capacity": node.capacity_factor,
        }
        if node.per_class_service_rates is not None:
            raw["class_service_rates"] = dict(node.per_class_service_rates)
        nodes.append(raw)

    ids = spec.node_ids
    routing: Dict[str, Any] = {
        "entry": {ids[i]: p for i, p in enumerate(spec.routing.entry) if p != 0.0}
    }
    for src, row in zip(ids, spec.routing.probabilities):
        targets = {ids[i]: p for i, p in enumerate(row) if p != 0.0}
        if targets:
            routing[src] = targets

    document: Dict[str, Any] = {
        "nodes": nodes,
        "routing": routing,
        "classes": [{"id": c.id, "entry_probability": c.entry_probability} for c in spec.classes],
    }
    if spec.routing.class_switching is not None:
        labels = [(node, cls) for node in ids for cls in spec.class_ids]
        entries = []
        for src, row in enumerate(spec.routing.class_switching):
            for dst, prob in enumerate(row):
                if prob != 0.0:
                    entries.append({
                        "from": labels[src][0],
                        "from_class": labels[src][1],
                        "to": labels[dst][0],
                        "to_class": labels[dst][1],
                        "probability": prob,
                    })
        document["class_routing"] = entries

    arrival: Dict[str, Any] = {"rate": spec.external_rate}
    if spec.bulk is not None:
        arrival["bulk"] = _render_bulk(spec.bulk)
    document["arrival"] = arrival
    return document


def load_network(path: str) -> NetworkSpec:
    """설정 파일을 읽어 NetworkSpec 반환 (오류는 ConfigError)"""

    log_event("CONFIG", f"네트워크 설정 로드: {path}", "debug")
    try:
        document = load_json_document(path)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    with open(path, "r", encoding="utf-8") as f:
        source_text = f.read()
    spec = parse_network(document, source_text)
    log_event("CONFIG", f"노드 {spec.num_nodes}개, 클래스 {spec.num_classes}개 로드 완료", "debug")
    return spec


def dump_network(spec: NetworkSpec, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(render_network(spec), f, ensure_ascii=False, indent=4)
        f.write("\n")


NODE_FIELDS = ("servers", "service_rate", "service_time", "capacity", "discipline")


def _coerce(value: Any) -> Any:
    """``--set`` 값: JSON 으로 읽히면 그 값, 아니면 문자열 그대로"""
    if not isinstance(value, str):
        return value
    try:
        return json.loads(value)
    except ValueError:
        return value


def _split_assignment(assignment: str) -> Tuple[str, str]:
    key, sep, value = assignment.partition("=")
    if not sep or not key:
        raise ConfigError("expected key=value", key=assignment)
    return key.strip(), value.strip()


def apply_overrides(spec: NetworkSpec, assignments) -> NetworkSpec:
    """``key=value`` 목록(또는 dict)으로 개별 필드를 덮어쓴다

    키: arrival.rate, arrival.interarrival_time, nodes.<id>.<필드>,
    routing.<from>.<to>, routing.entry.<to>, classes.<id>.entry_probability
    """

    items = assignments.items() if isinstance(assignments, Mapping) else map(_split_assignment, assignments)
    document = render_network(spec)
    for key, raw in items:
        value = _coerce(raw)
        parts = key.split(".")
        if parts[0] == "arrival" and len(parts) == 2 and parts[1] in ("rate", "interarrival_time"):
            document["arrival"].pop("rate", None)
            document["arrival"].pop("interarrival_time", None)
            document["arrival"][parts[1]] = value
        elif parts[0] == "nodes" and len(parts) == 3 and parts[2] in NODE_FIELDS:
            node = next((n for n in document["nodes"] if n["id"] == parts[1]), None)
            if node is None:
                raise ConfigError(f"unknown node '{parts[1]}'", key=key)
            if parts[2] in ("service_rate", "service_time"):
                node.pop("service_rate", None)
                node.pop("service_time", None)
            node[parts[2]] = value
        elif parts[0] == "routing" and len(parts) == 3:
            document["routing"].setdefault(parts[1], {})[parts[2]] = value
        elif parts[0] == "classes" and len(parts) == 3 and parts[2] == "entry_probability":
            cls = next((c for c in document["classes"] if c["id"] == parts[1]), None)
            if cls is None:
                raise ConfigError(f"unknown class '{parts[1]}'", key=key)
            cls["entry_probability"] = value
        else:
            raise ConfigError("unknown override key", key=key)
    return parse_network(document)


def build_network(
    preset: Optional[str] = None,
    config_path: Optional[str] = None,
    document: Optional[Mapping[str, Any]] = None,
    interarrival: Optional[float] = None,
    rate: Optional[float] = None,
    capacity: Optional[Sequence[float]] = None,
    servers: Optional[Sequence[int]] = None,
    bulk: Optional[str] = None,
    overrides=(),
) -> NetworkSpec:
    """프리셋/설정 파일/문서 중 하나에서 시작해 플래그와 덮어쓰기를 적용하고 검증"""

    sources = [s for s in (preset, config_path, document) if s is not None]
    if len(sources) != 1:
        raise ConfigError("exactly one of preset, config path or document is required", key="config")
    if interarrival is not None and rate is not None:
        raise ConfigError("use either interarrival or rate, not both", key="arrival")

    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset '{preset}' (choices: {', '.join(PRESETS)})", key="preset")
        spec = PRESETS[preset]()
    elif config_path is not None:
        spec = load_network(config_path)
    else:
        spec = parse_network(document)

    if interarrival is not None:
        if not interarrival > 0.0:
            raise ConfigError("interarrival time must be > 0", key="interarrival")
        spec = spec.with_interarrival_time(interarrival)
    if rate is not None:
        spec = spec.with_external_rate(rate)
    if capacity is not None:
        spec = spec.with_capacity_factors(capacity)
    if servers is not None:
        spec = spec.with_servers(servers)
    if bulk is not None:
        spec = spec.with_bulk(BulkSpec.parse(bulk))
    if overrides:
        spec = apply_overrides(spec, overrides)

    report = validate(spec)
    if not report.is_valid:
        raise ValidationError(report)
    return spec
