"""시드 고정 이산 사건 시뮬레이터와 해석 결과 비교

사건 큐는 (시각, 순번) 키의 이진 힙이고, 난수는 (복제, 노드, 용도)마다 독립
스트림을 쓴다. 같은 SimConfig 이면 결과가 비트 단위로 같다.
"""

import csv
import math
from bisect import bisect_right
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from heapq import heappop, heappush
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from common_utils import get_default_seed, log_event
from queueing_chain.analytic import ChainMetrics, service_moments
from queueing_chain.errors import ConfigError, SpecMismatchError
from queueing_chain.model import Discipline, NetworkSpec

DEFAULT_HORIZON_ARRIVALS = 100_000
DEFAULT_WARMUP = 0.2
DEFAULT_REPLICATIONS = 10
CONFIDENCE = 0.95
# 비교 시 신뢰구간에 더하는 체계 오차 허용폭 (해석값 대비)
SYSTEMATIC_ALLOWANCE = 0.01
BUFFER_SIZE = 4096

# 사건 종류
_ARRIVAL, _FCFS_DONE, _PS_DONE = 0, 1, 2
# 스트림 용도
_SERVICE, _ROUTING = 0, 1
_INTERARRIVAL, _BULK_SIZE, _CLASS, _ENTRY = 0, 1, 2, 3


class ServiceKind(str, Enum):
    EXPONENTIAL = "exponential"
    DETERMINISTIC = "deterministic"
    EMPIRICAL = "empirical"


@dataclass(frozen=True)
class ServiceDistribution:
    """노드 서비스 시간 분포. empirical 표본은 c=1 기준 초 단위"""

    kind: ServiceKind = ServiceKind.EXPONENTIAL
    samples: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ServiceKind(self.kind))
        if self.samples is not None:
            object.__setattr__(self, "samples", tuple(float(s) for s in self.samples))

    @classmethod
    def parse(cls, text: str) -> "ServiceDistribution":
        """``exponential``, ``deterministic``, ``empirical:0.004,0.006``"""
        kind, _, arg = text.partition(":")
        try:
            kind = ServiceKind(kind.strip().lower())
            samples = tuple(float(s) for s in arg.split(",")) if kind == ServiceKind.EMPIRICAL else None
        except ValueError as e:
            raise ConfigError(f"서비스 분포 형식 오류 ({e})", key="service") from e
        return cls(kind, samples)

    def moments(self, mean: float) -> Tuple[float, float]:
        return service_moments(self.kind.value, mean, self.samples)


@dataclass(frozen=True)
class SimConfig:
    spec: NetworkSpec
    # 외부 도착 사건 수(벌크 하나는 사건 하나) 또는 시뮬레이션 시간(초) 중 하나
    horizon_arrivals: Optional[int] = None
    horizon_time: Optional[float] = None
    warmup: float = DEFAULT_WARMUP
    replications: int = DEFAULT_REPLICATIONS
    seed: int = field(default_factory=get_default_seed)
    service_overrides: Tuple[Tuple[str, ServiceDistribution], ...] = ()
    trace_path: Optional[str] = None
    workers: int = 1

    def __post_init__(self):
        if isinstance(self.service_overrides, Mapping):
            object.__setattr__(self, "service_overrides", tuple(self.service_overrides.items()))
        if self.horizon_arrivals is None and self.horizon_time is None:
            object.__setattr__(self, "horizon_arrivals", DEFAULT_HORIZON_ARRIVALS)

        if self.horizon_arrivals is not None and self.horizon_time is not None:
            raise ConfigError("horizon_arrivals 와 horizon_time 은 하나만 지정합니다", key="horizon")
        if self.horizon_arrivals is not None and int(self.horizon_arrivals) < 1:
            raise ConfigError("horizon 은 0보다 커야 합니다", key="horizon")
        if self.horizon_time is not None and not self.horizon_time > 0.0:
            raise ConfigError("horizon 은 0보다 커야 합니다", key="horizon")
        if not 0.0 <= self.warmup <= 0.5:
            raise ConfigError("warmup 은 [0, 0.5] 범위여야 합니다", key="warmup")
        if self.replications < 1:
            raise ConfigError("replications 는 1 이상이어야 합니다", key="replications")
        if self.seed < 0:
            raise ConfigError("seed 는 음이 아닌 정수여야 합니다", key="seed")
        ids = self.spec.node_ids
        for node_id, dist in self.service_overrides:
            if node_id not in ids:
                raise ConfigError(f"알 수 없는 노드 '{node_id}'", key="service")
            if dist.kind == ServiceKind.EMPIRICAL and (
                not dist.samples or any(s <= 0.0 for s in dist.samples)
            ):
                raise ConfigError("empirical 표본은 양수여야 합니다", key="service")

    def service_for(self, node_id: str) -> ServiceDistribution:
        for key, dist in self.service_overrides:
            if key == node_id:
                return dist
        return ServiceDistribution()


@dataclass(frozen=True)
class Estimate:
    mean: float
    half_width: float

    @property
    def low(self) -> float:
        return self.mean - self.half_width

    @property
    def high(self) -> float:
        return self.mean + self.half_width

    def overlaps(self, other: "Estimate") -> bool:
        return self.low <= other.high and other.low <= self.high


@dataclass(frozen=True)
class ClassEstimate:
    class_id: str
    utilization: Estimate
    mean_queue_length: Estimate
    mean_waiting: Estimate
    mean_response: Estimate
    throughput: Estimate


@dataclass(frozen=True)
class NodeEstimate:
    node_id: str
    utilization: Estimate
    mean_queue_length: Estimate
    mean_waiting: Estimate
    mean_response: Estimate
    throughput: Estimate
    per_class: Tuple[ClassEstimate, ...] = ()


@dataclass(frozen=True)
class SimResult:
    node_ids: Tuple[str, ...]
    class_ids: Tuple[str, ...]
    per_node: Tuple[NodeEstimate, ...]
    chain_response: Estimate
    class_chain_response: Tuple[Estimate, ...]
    arrivals: int
    departures: int
    replications: int
    seed: int
    request_rate: float

    def node(self, node_id: str) -> NodeEstimate:
        return self.per_node[self.node_ids.index(node_id)]


class _Stream:
    """numpy Generator 에서 BUFFER_SIZE 개씩 미리 뽑아 두는 난수 스트림"""

    __slots__ = ("_rng", "_draw", "_buffer", "_pos")

    def __init__(self, seed: int, key: Tuple[int, ...], draw):
        self._rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))
        self._draw = draw
        self._buffer: List = []
        self._pos = 0

    def next(self):
        if self._pos >= len(self._buffer):
            self._buffer = self._draw(self._rng, BUFFER_SIZE).tolist()
            self._pos = 0
        value = self._buffer[self._pos]
        self._pos += 1
        return value


def _unit_exponential(rng, size):
    return rng.exponential(1.0, size)


def _unit_uniform(rng, size):
    return rng.random(size)


def _choice_stream(seed, key, values: Sequence[float], probabilities: Sequence[float]):
    values = np.asarray(values)
    probabilities = np.asarray(probabilities, dtype=float)
    probabilities = probabilities / probabilities.sum()
    return _Stream(seed, key, lambda rng, size: rng.choice(values, size=size, p=probabilities))


class _Job:
    __slots__ = ("id", "cls", "entry_cls", "born", "tagged", "arrived", "started", "work")

    def __init__(self, job_id: int, cls: int, born: float, tagged: bool):
        self.id = job_id
        self.cls = cls
        self.entry_cls = cls
        self.born = born
        self.tagged = tagged
        self.arrived = born
        self.started = born
        self.work = 0.0


class _Node:
    """노드 상태와 누적 통계"""

    __slots__ = (
        "id", "index", "ps", "servers", "busy", "queue", "n", "vtime", "last", "heap",
        "version", "tagged_busy", "tagged_queued", "tagged_n", "area_q", "area_n", "area_busy",
        "service", "service_kind", "class_means",
        "routing", "route_cum", "route_dest",
        "visits", "wait_sum", "resp_sum", "work_sum",
    )

    def __init__(self, index: int, num_classes: int):
        self.index = index
        self.busy = 0
        self.queue = deque()
        self.n = 0
        self.vtime = 0.0
        self.last = 0.0
        self.heap: List = []
        self.version = 0
        self.tagged_busy = 0
        self.tagged_queued = 0
        self.tagged_n = 0
        self.area_q = 0.0
        self.area_n = 0.0
        self.area_busy = 0.0
        self.visits = [0] * num_classes
        self.wait_sum = [0.0] * num_classes
        self.resp_sum = [0.0] * num_classes
        self.work_sum = [0.0] * num_classes


class _Replication:
    """복제 한 번의 사건 구동 실행"""

    def __init__(self, cfg: SimConfig, rep: int):
        spec = cfg.spec
        self.cfg = cfg
        self.spec = spec
        self.num_classes = spec.num_classes
        seed = cfg.seed
        num_nodes = spec.num_nodes
        external = num_nodes

        self.events: List = []
        self.seq = 0
        self.job_seq = 0
        self.arrival_events = 0
        self.arrivals = 0
        self.departures = 0
        self.chain_sum = [0.0] * self.num_classes
        self.chain_count = [0] * self.num_classes

        if cfg.horizon_arrivals is not None:
            self.limit_arrivals = int(cfg.horizon_arrivals)
            self.limit_time = math.inf
            # 짧은 horizon 에서도 최소 한 건은 측정한다
            self.warmup_index = min(math.ceil(cfg.warmup * self.limit_arrivals), self.limit_arrivals - 1)
            self.t_start = math.inf
            self.t_stop = math.inf
        else:
            self.limit_arrivals = None
            self.limit_time = float(cfg.horizon_time)
            self.warmup_index = None
            self.t_start = cfg.warmup * self.limit_time
            self.t_stop = self.limit_time
        self.now = 0.0

        self.interarrival = _Stream(seed, (rep, external, _INTERARRIVAL), _unit_exponential)
        self.mean_interarrival = 1.0 / spec.external_rate
        self.bulk = None
        if spec.bulk is not None:
            bulk = spec.bulk
            self.bulk = _Stream(seed, (rep, external, _BULK_SIZE), lambda rng, size: bulk.sample(rng, size))
        self.class_draw = None
        if spec.is_multiclass:
            self.class_draw = _choice_stream(
                seed, (rep, external, _CLASS), range(self.num_classes), spec.class_entry_vector()
            )
        entries = [i for i, p in enumerate(spec.routing.entry) if p > 0.0]
        self.single_entry = entries[0] if len(entries) == 1 else None
        self.entry_draw = None
        if self.single_entry is None:
            self.entry_draw = _choice_stream(
                seed, (rep, external, _ENTRY), entries, [spec.routing.entry[i] for i in entries]
            )

        routing = spec.class_routing()
        self.nodes: List[_Node] = []
        for i, node_spec in enumerate(spec.nodes):
            node = _Node(i, self.num_classes)
            node.id = node_spec.id
            node.ps = node_spec.discipline == Discipline.PS
            node.servers = node_spec.servers
            node.class_means = [1.0 / node_spec.effective_rate(c) for c in spec.class_ids]
            dist = cfg.service_for(node_spec.id)
            node.service_kind = dist.kind
            node.service = self._service_sampler(dist, node_spec.capacity_factor, (rep, i, _SERVICE))
            node.routing = _Stream(seed, (rep, i, _ROUTING), _unit_uniform)
            node.route_cum, node.route_dest = [], []
            for l in range(self.num_classes):
                row = routing[i * self.num_classes + l]
                dest = [j for j, p in enumerate(row) if p > 0.0]
                node.route_dest.append(dest)
                node.route_cum.append(np.cumsum([row[j] for j in dest]).tolist())
            self.nodes.append(node)

        self.trace_file = None
        self.trace = None
        if cfg.trace_path and rep == 0:
            self.trace_file = open(cfg.trace_path, "w", newline="", encoding="utf-8")
            self.trace = csv.writer(self.trace_file)
            self.trace.writerow(["time", "node", "job", "class", "event"])

    def _service_sampler(self, dist: ServiceDistribution, capacity: float, key):
        if dist.kind == ServiceKind.DETERMINISTIC:
            return None
        if dist.kind == ServiceKind.EMPIRICAL:
            samples = np.array(dist.samples) / capacity
            return _Stream(self.cfg.seed, key, lambda rng, size: rng.choice(samples, size=size))
        return _Stream(self.cfg.seed, key, _unit_exponential)

    def _sample_work(self, node: _Node, cls: int) -> float:
        if node.service_kind == ServiceKind.EMPIRICAL:
            return node.service.next()
        if node.service_kind == ServiceKind.DETERMINISTIC:
            return node.class_means[cls]
        return node.service.next() * node.class_means[cls]

    def _push(self, time: float, kind: int, payload) -> None:
        heappush(self.events, (time, self.seq, kind, payload))
        self.seq += 1

    def _log(self, node: Optional[_Node], job: _Job, event: str) -> None:
        if self.trace is not None:
            self.trace.writerow([
                repr(self.now),
                node.id if node is not None else "",
                job.id,
                self.spec.class_ids[job.cls],
                event,
            ])

    def _touch(self, node: _Node) -> None:
        """직전 사건 이후 측정 대상 작업의 면적을 [t_start, t_stop] 으로 잘라 누적"""
        now = self.now
        lo = node.last if node.last > self.t_start else self.t_start
        hi = now if now < self.t_stop else self.t_stop
        if hi > lo:
            dt = hi - lo
            if node.ps:
                node.area_n += dt * node.tagged_n
                if node.n:
                    node.area_busy += dt * node.tagged_n / node.n
            else:
                node.area_q += dt * node.tagged_queued
                node.area_busy += dt * node.tagged_busy
        if node.ps and node.n:
            node.vtime += (now - node.last) * node.servers / node.n
        node.last = now

    def _reschedule_ps(self, node: _Node) -> None:
        node.version += 1
        if node.n:
            tag = node.heap[0][0]
            delay = max(tag - node.vtime, 0.0) * node.n / node.servers
            self._push(self.now + delay, _PS_DONE, (node.index, node.version))

    def _arrive(self, node: _Node, job: _Job) -> None:
        self._touch(node)
        job.arrived = self.now
        job.work = self._sample_work(node, job.cls)
        self._log(node, job, "arrival")
        if node.ps:
            job.started = self.now
            self._log(node, job, "start")
            heappush(node.heap, (node.vtime + job.work, self.seq, job))
            self.seq += 1
            node.n += 1
            node.tagged_n += job.tagged
            self._reschedule_ps(node)
        elif node.busy < node.servers:
            node.busy += 1
            self._start(node, job)
        else:
            node.queue.append(job)
            node.tagged_queued += job.tagged

    def _start(self, node: _Node, job: _Job) -> None:
        job.started = self.now
        node.tagged_busy += job.tagged
        self._log(node, job, "start")
        self._push(self.now + job.work, _FCFS_DONE, (node.index, job))

    def _record(self, node: _Node, job: _Job, waiting: float) -> None:
        if job.tagged:
            cls = job.cls
            node.visits[cls] += 1
            node.wait_sum[cls] += waiting
            node.resp_sum[cls] += self.now - job.arrived
            node.work_sum[cls] += job.work

    def _route(self, node: _Node, job: _Job) -> None:
        self._log(node, job, "departure")
        cls = job.cls
        dest = node.route_dest[cls]
        index = bisect_right(node.route_cum[cls], node.routing.next()) if dest else 0
        if index < len(dest):
            target = dest[index]
            job.cls = target % self.num_classes
            self._arrive(self.nodes[target // self.num_classes], job)
            return
        self.departures += 1
        self._log(None, job, "exit")
        if job.tagged:
            self.chain_sum[job.entry_cls] += self.now - job.born
            self.chain_count[job.entry_cls] += 1

    def _external_arrival(self) -> None:
        index = self.arrival_events
        self.arrival_events += 1
        if self.warmup_index is not None:
            tagged = index >= self.warmup_index
            if index == self.warmup_index:
                self.t_start = self.now
        else:
            tagged = self.now >= self.t_start

        size = int(self.bulk.next()) if self.bulk is not None else 1
        for _ in range(size):
            cls = int(self.class_draw.next()) if self.class_draw is not None else 0
            entry = self.single_entry if self.single_entry is not None else int(self.entry_draw.next())
            job = _Job(self.job_seq, cls, self.now, tagged)
            self.job_seq += 1
            self.arrivals += 1
            self._arrive(self.nodes[entry], job)

        if self.limit_arrivals is not None and self.arrival_events >= self.limit_arrivals:
            return
        next_time = self.now + self.interarrival.next() * self.mean_interarrival
        if next_time < self.limit_time:
            self._push(next_time, _ARRIVAL, None)

    def run(self) -> Dict[str, np.ndarray]:
        try:
            self._push(self.interarrival.next() * self.mean_interarrival, _ARRIVAL, None)
            if self.limit_time < math.inf and self.events[0][0] >= self.limit_time:
                self.events.clear()
            while self.events:
                time, _, kind, payload = heappop(self.events)
                if kind == _PS_DONE and payload[1] != self.nodes[payload[0]].version:
                    continue
                self.now = time
                if kind == _ARRIVAL:
                    self._external_arrival()
                elif kind == _FCFS_DONE:
                    node = self.nodes[payload[0]]
                    job = payload[1]
                    self._touch(node)
                    self._record(node, job, job.started - job.arrived)
                    node.busy -= 1
                    node.tagged_busy -= job.tagged
                    if node.queue:
                        node.busy += 1
                        following = node.queue.popleft()
                        node.tagged_queued -= following.tagged
                        self._start(node, following)
                    self._route(node, job)
                else:
                    node = self.nodes[payload[0]]
                    self._touch(node)
                    _, _, job = heappop(node.heap)
                    node.n -= 1
                    node.tagged_n -= job.tagged
                    self._record(node, job, (self.now - job.arrived) - job.work / node.servers)
                    self._reschedule_ps(node)
                    self._route(node, job)
        finally:
            if self.trace_file is not None:
                self.trace_file.close()
        return self._summary()

    def _summary(self) -> Dict[str, np.ndarray]:
        end = self.t_stop if self.t_stop < math.inf else self.now
        window = end - self.t_start if self.t_start < math.inf else 0.0
        num_nodes, num_classes = len(self.nodes), self.num_classes

        def ratio(a, b):
            return a / b if b > 0 else math.nan

        node_stats = np.full((num_nodes, 5), math.nan)
        class_stats = np.full((num_nodes, num_classes, 5), math.nan)
        for i, node in enumerate(self.nodes):
            visits = sum(node.visits)
            capacity = 1 if node.ps else node.servers
            queue_area = node.area_n - node.area_busy if node.ps else node.area_q
            node_stats[i] = (
                ratio(node.area_busy, capacity * window),
                ratio(queue_area, window),
                ratio(sum(node.wait_sum), visits),
                ratio(sum(node.resp_sum), visits),
                ratio(visits, window),
            )
            for l in range(num_classes):
                throughput = ratio(node.visits[l], window)
                waiting = ratio(node.wait_sum[l], node.visits[l])
                class_stats[i, l] = (
                    ratio(node.work_sum[l], node.servers * window),
                    throughput * waiting,
                    waiting,
                    ratio(node.resp_sum[l], node.visits[l]),
                    throughput,
                )

        return {
            "nodes": node_stats,
            "classes": class_stats,
            "chain": np.array([ratio(sum(self.chain_sum), sum(self.chain_count))]),
            "class_chain": np.array([ratio(s, c) for s, c in zip(self.chain_sum, self.chain_count)]),
            "counts": np.array([self.arrivals, self.departures]),
        }


def _run_replication(cfg: SimConfig, rep: int) -> Dict[str, np.ndarray]:
    return _Replication(cfg, rep).run()


def _estimate(values: np.ndarray) -> Estimate:
    """복제 평균들의 Student-t 95% 신뢰구간"""
    count = values.size
    mean = float(np.mean(values))
    if count < 2:
        return Estimate(mean, math.inf)
    quantile = stats.t.ppf(0.5 + CONFIDENCE / 2.0, count - 1)
    return Estimate(mean, float(quantile * np.std(values, ddof=1) / math.sqrt(count)))


def simulate(cfg: SimConfig) -> SimResult:
    """복제 cfg.replications 번을 실행하고 복제 간 분산으로 신뢰구간을 만든다"""

    spec = cfg.spec
    horizon = (
        f"{cfg.horizon_arrivals} 도착" if cfg.horizon_arrivals is not None else f"{cfg.horizon_time}s"
    )
    log_event("SIM", f"시뮬레이션 시작: {horizon}, 복제 {cfg.replications}회, seed={cfg.seed}", "start")

    reps = range(cfg.replications)
    if cfg.workers > 1 and cfg.replications > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            runs = list(pool.map(_run_replication, [cfg] * cfg.replications, reps))
    else:
        runs = [_run_replication(cfg, rep) for rep in reps]

    nodes = np.stack([r["nodes"] for r in runs])
    classes = np.stack([r["classes"] for r in runs])
    chain = np.stack([r["chain"] for r in runs])
    class_chain = np.stack([r["class_chain"] for r in runs])
    counts = np.sum([r["counts"] for r in runs], axis=0)

    per_node = []
    for i, node_id in enumerate(spec.node_ids):
        per_class = tuple(
            ClassEstimate(class_id, *(_estimate(classes[:, i, l, k]) for k in range(5)))
            for l, class_id in enumerate(spec.class_ids)
        )
        per_node.append(NodeEstimate(node_id, *(_estimate(nodes[:, i, k]) for k in range(5)), per_class=per_class))

    result = SimResult(
        node_ids=spec.node_ids,
        class_ids=spec.class_ids,
        per_node=tuple(per_node),
        chain_response=_estimate(chain[:, 0]),
        class_chain_response=tuple(_estimate(class_chain[:, l]) for l in range(spec.num_classes)),
        arrivals=int(counts[0]),
        departures=int(counts[1]),
        replications=cfg.replications,
        seed=cfg.seed,
        request_rate=spec.request_rate,
    )
    log_event(
        "SIM",
        f"시뮬레이션 완료: 도착 {result.arrivals}, 이탈 {result.departures}, "
        f"체인 E[T]={result.chain_response.mean:.6g}s",
        "success",
    )
    return result


@dataclass(frozen=True)
class ComparisonRow:
    target: str
    metric: str
    analytic: float
    simulated: float
    half_width: float
    relative_error: float
    passed: bool
    # 근사 지표(벌크 입구의 하류 노드)는 비교하지 않는다
    checked: bool = True


@dataclass(frozen=True)
class ComparisonReport:
    rows: Tuple[ComparisonRow, ...]
    seed: int
    result: SimResult

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows if row.checked)

    def failures(self) -> Tuple[ComparisonRow, ...]:
        return tuple(row for row in self.rows if row.checked and not row.passed)


def _compare_row(target: str, metric: str, analytic: float, estimate: Estimate, checked: bool,
                 no_traffic: bool = False) -> ComparisonRow:
    simulated = estimate.mean
    if math.isnan(simulated):
        passed = no_traffic
        error = math.nan
    elif math.isinf(analytic):
        passed = False
        error = math.inf
    else:
        gap = abs(simulated - analytic)
        passed = gap <= estimate.half_width + SYSTEMATIC_ALLOWANCE * abs(analytic)
        error = gap / abs(analytic) if analytic != 0.0 else (0.0 if gap == 0.0 else math.inf)
    return ComparisonRow(target, metric, analytic, simulated, estimate.half_width, error,
                         passed or not checked, checked)


def compare(cfg: SimConfig, analytic: ChainMetrics, result: Optional[SimResult] = None) -> ComparisonReport:
    """해석값이 시뮬레이션 95% 신뢰구간 + 1% 허용폭 안에 들면 통과"""

    spec = cfg.spec
    if tuple(analytic.node_ids) != spec.node_ids or not math.isclose(
        analytic.request_rate, spec.request_rate, rel_tol=1e-12
    ):
        raise SpecMismatchError("시뮬레이션 설정과 해석 결과의 네트워크가 다릅니다")
    if result is None:
        result = simulate(cfg)

    rows = []
    for metrics, estimate in zip(analytic.per_node, result.per_node):
        idle = metrics.arrival_rate == 0.0
        for metric, value, sim in (
            ("rho", metrics.utilization, estimate.utilization),
            ("EQ", metrics.mean_queue_length, estimate.mean_queue_length),
            ("EW", metrics.mean_waiting, estimate.mean_waiting),
            ("ET", metrics.mean_response, estimate.mean_response),
        ):
            rows.append(_compare_row(metrics.node_id, metric, value, sim, metrics.exact, idle))
        for class_metrics, class_estimate in zip(metrics.per_class, estimate.per_class):
            rows.append(_compare_row(
                f"{metrics.node_id}:{class_metrics.class_id}",
                "EW",
                class_metrics.mean_waiting,
                class_estimate.mean_waiting,
                metrics.exact and spec.is_multiclass,
                class_metrics.arrival_rate == 0.0,
            ))

    all_exact = all(m.exact for m in analytic.per_node)
    rows.append(_compare_row("chain", "ET", analytic.chain_response, result.chain_response, all_exact))

    report = ComparisonReport(tuple(rows), cfg.seed, result)
    for row in report.failures():
        log_event(
            "COMPARE",
            f"{row.target} {row.metric}: 해석={row.analytic:.6g}, 시뮬={row.simulated:.6g} ± {row.half_width:.3g}",
            "warning",
        )
    if report.passed:
        log_event("COMPARE", f"비교 {sum(r.checked for r in rows)}항목 모두 통과", "success")
    return report
