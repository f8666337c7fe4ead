"""파라미터 스윕: 그림 패널을 그대로 그릴 수 있는 표 데이터 생성

한 행은 (스윕 값, 도착 간격 격자점) 하나이고 열 이름은 ``노드.지표_단위`` 형식이다.
"""

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, TextIO, Tuple

from common_utils import load_json_document, log_event
from queueing_chain.analytic import ChainMetrics, chain_metrics
from queueing_chain.errors import SweepError
from queueing_chain.model import (
    CIMS_SERVICE_TIMES,
    Discipline,
    NetworkSpec,
    preset_dedicated_hss,
    preset_shared_hss,
)

METADATA_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "metadata")
SWEEP_PRESETS_PATH = os.path.join(METADATA_DIR, "sweep_presets.json")
PRESET_PREFIX = "preset:"
# FCFS/PS 비교에서 두 클래스의 진입 확률
SERVICE_SPLIT_PROBABILITIES = (0.3, 0.6)
TIME_SCALE = {"s": 1.0, "ms": 1000.0}


class SweepParameter(str, Enum):
    INTERARRIVAL_TIME = "interarrival_time"
    ARRIVAL_RATE = "arrival_rate"
    CAPACITY_VECTOR = "capacity_vector"
    CLASS_PROBABILITIES = "class_probabilities"
    SERVICE_SPLIT = "service_split"


class SweepMetric(str, Enum):
    EQ = "EQ"
    EW = "EW"
    ET = "ET"
    RHO = "rho"
    BOUND = "bound"


SCALAR_PARAMETERS = (SweepParameter.INTERARRIVAL_TIME, SweepParameter.ARRIVAL_RATE)
PAIR_PARAMETERS = (SweepParameter.CLASS_PROBABILITIES, SweepParameter.SERVICE_SPLIT)
TIME_METRICS = (SweepMetric.EW, SweepMetric.ET, SweepMetric.BOUND)
DEFAULT_METRICS = tuple(SweepMetric)


@dataclass(frozen=True)
class SweepSpec:
    parameter: SweepParameter
    values: Tuple[Any, ...]
    metrics: Tuple[SweepMetric, ...] = DEFAULT_METRICS
    # 값마다 반복할 외부 도착 간격(초) 격자
    grid: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "parameter", SweepParameter(self.parameter))
            object.__setattr__(self, "metrics", tuple(SweepMetric(m) for m in self.metrics))
        except ValueError as e:
            raise SweepError(str(e)) from e
        values = tuple(
            float(v) if self.parameter in SCALAR_PARAMETERS else tuple(float(x) for x in v)
            for v in self.values
        )
        object.__setattr__(self, "values", values)
        if self.grid is not None:
            object.__setattr__(self, "grid", tuple(float(t) for t in self.grid))


def _strictly_monotone(values: Sequence[float]) -> bool:
    pairs = list(zip(values, values[1:]))
    return all(a < b for a, b in pairs) or all(a > b for a, b in pairs)


def validate_sweep(sweep: SweepSpec, spec: NetworkSpec) -> None:
    """잘못된 스윕 정의는 SweepError"""

    if not sweep.values:
        raise SweepError("스윕 값이 비어 있습니다")
    if not sweep.metrics:
        raise SweepError("지표가 하나 이상 필요합니다")

    parameter = sweep.parameter
    if parameter in SCALAR_PARAMETERS:
        if any(not v > 0.0 or math.isinf(v) for v in sweep.values):
            raise SweepError(f"{parameter.value} 값은 양의 유한수여야 합니다")
        if not _strictly_monotone(sweep.values):
            raise SweepError(f"{parameter.value} 값은 단조여야 합니다")
    elif parameter == SweepParameter.CAPACITY_VECTOR:
        for vector in sweep.values:
            if len(vector) != spec.num_nodes:
                raise SweepError(f"용량 벡터 길이 {len(vector)} 가 노드 수 {spec.num_nodes} 와 다릅니다")
            if any(c <= 0.0 for c in vector):
                raise SweepError("용량 계수는 0보다 커야 합니다")
    else:
        for pair in sweep.values:
            if len(pair) != 2:
                raise SweepError(f"{parameter.value} 값은 두 개씩 묶어야 합니다: {pair}")
            if parameter == SweepParameter.CLASS_PROBABILITIES:
                if min(pair) < 0.0 or not 0.0 < sum(pair) <= 1.0:
                    raise SweepError(f"클래스 확률은 0 이상이고 합이 (0, 1] 이어야 합니다: {pair}")
            elif min(pair) <= 0.0:
                raise SweepError(f"클래스별 서비스 시간은 0보다 커야 합니다: {pair}")

    if sweep.grid is not None:
        if not sweep.grid or any(not t > 0.0 for t in sweep.grid):
            raise SweepError("격자의 도착 간격은 0보다 커야 합니다")
        if not _strictly_monotone(sweep.grid):
            raise SweepError("격자는 단조여야 합니다")
        if parameter in SCALAR_PARAMETERS:
            raise SweepError("도착률 스윕에는 격자를 함께 쓸 수 없습니다")


@dataclass(frozen=True)
class SweepTable:
    columns: Tuple[str, ...]
    rows: Tuple[Tuple[Any, ...], ...]

    def to_csv(self, stream: TextIO) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([format_cell(cell) for cell in row])

    def to_records(self) -> List[Dict[str, Any]]:
        return [dict(zip(self.columns, row)) for row in self.rows]

    def column(self, name: str) -> List[Any]:
        index = self.columns.index(name)
        return [row[index] for row in self.rows]


def format_cell(value: Any) -> str:
    """repr 기반 결정적 서식 (inf/nan 은 그대로 표기)"""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def _chain_columns(prefix: str, metrics: ChainMetrics, wanted) -> List[Tuple[str, float, bool]]:
    columns = []
    multiclass = len(metrics.class_ids) > 1
    for node in metrics.per_node:
        for metric in wanted:
            if metric == SweepMetric.RHO:
                columns.append((f"{prefix}{node.node_id}.rho", node.utilization, False))
            elif metric == SweepMetric.EQ:
                columns.append((f"{prefix}{node.node_id}.EQ", node.mean_queue_length, False))
            elif metric == SweepMetric.EW:
                columns.append((f"{prefix}{node.node_id}.EW", node.mean_waiting, True))
            elif metric == SweepMetric.ET:
                columns.append((f"{prefix}{node.node_id}.ET", node.mean_response, True))
        if multiclass:
            for cls in node.per_class:
                if SweepMetric.EW in wanted:
                    columns.append((f"{prefix}{node.node_id}.{cls.class_id}.EW", cls.mean_waiting, True))
                if SweepMetric.ET in wanted:
                    columns.append((f"{prefix}{node.node_id}.{cls.class_id}.ET", cls.mean_response, True))
    if SweepMetric.ET in wanted:
        columns.append((f"{prefix}chain.ET", metrics.chain_response, True))
        if multiclass:
            for class_id, value in zip(metrics.class_ids, metrics.class_response):
                columns.append((f"{prefix}chain.{class_id}.ET", value, True))
    if SweepMetric.BOUND in wanted:
        columns.append((f"{prefix}chain.bound", metrics.response_lower_bound, True))
    return columns


def _rate_for(spec: NetworkSpec, interarrival: Optional[float]) -> float:
    return spec.external_rate if interarrival is None else 1.0 / interarrival


def _evaluate_point(spec: NetworkSpec, sweep: SweepSpec, value, interarrival: Optional[float]):
    """스윕 점 하나의 (열 이름, 값(초 단위), 시간 지표 여부) 목록"""

    parameter = sweep.parameter
    wanted = sweep.metrics
    if parameter == SweepParameter.INTERARRIVAL_TIME:
        return _chain_columns("", chain_metrics(spec.with_interarrival_time(value), strict=False), wanted)
    if parameter == SweepParameter.ARRIVAL_RATE:
        return _chain_columns("", chain_metrics(spec.with_external_rate(value), strict=False), wanted)

    rate = _rate_for(spec, interarrival)
    if parameter == SweepParameter.CAPACITY_VECTOR:
        point = spec.with_capacity_factors(value).with_external_rate(rate)
        return _chain_columns("", chain_metrics(point, strict=False), wanted)

    if parameter == SweepParameter.CLASS_PROBABILITIES:
        p1, p2 = value
        dedicated = chain_metrics(preset_dedicated_hss(p1, p2, rate), strict=False)
        shared = chain_metrics(preset_shared_hss(p1, p2, rate), strict=False)
        columns = _chain_columns("dedicated.", dedicated, wanted) + _chain_columns("shared.", shared, wanted)
        if SweepMetric.EW in wanted:
            hss = shared.node("HSS")
            for cls, dedicated_id in zip(hss.per_class, ("HSS1", "HSS2")):
                gap = cls.mean_waiting - dedicated.node(dedicated_id).mean_waiting
                columns.append((f"gap.{cls.class_id}.EW", gap, True))
        return columns

    p1, p2 = SERVICE_SPLIT_PROBABILITIES
    fcfs = chain_metrics(preset_shared_hss(p1, p2, rate), strict=False)
    ps = chain_metrics(
        preset_shared_hss(p1, p2, rate, discipline=Discipline.PS, class_service_times=tuple(value)),
        strict=False,
    )
    return _chain_columns("fcfs.", fcfs, wanted) + _chain_columns("ps.", ps, wanted)


def _value_cells(parameter: SweepParameter, value) -> Tuple[Any, ...]:
    if parameter in SCALAR_PARAMETERS:
        return (value,)
    if parameter == SweepParameter.CAPACITY_VECTOR:
        return (";".join(format_cell(c) for c in value),)
    return tuple(value)


def _value_columns(parameter: SweepParameter) -> Tuple[str, ...]:
    return {
        SweepParameter.INTERARRIVAL_TIME: ("interarrival_s",),
        SweepParameter.ARRIVAL_RATE: ("arrival_rate_per_s",),
        SweepParameter.CAPACITY_VECTOR: ("capacity",),
        SweepParameter.CLASS_PROBABILITIES: ("p1", "p2"),
        SweepParameter.SERVICE_SPLIT: ("class1_service_s", "class2_service_s"),
    }[parameter]


def _evaluate_task(task):
    return _evaluate_point(*task)


def run_sweep(spec: NetworkSpec, sweep: SweepSpec, units: str = "ms", workers: int = 1) -> SweepTable:
    """스윕 값(과 격자)의 모든 점을 해석적으로 평가해 표로 만든다

    행 순서는 입력 순서이고 병렬 실행 여부와 무관하다.
    """

    validate_sweep(sweep, spec)
    if units not in TIME_SCALE:
        raise SweepError(f"알 수 없는 시간 단위: {units}")
    if sweep.parameter == SweepParameter.SERVICE_SPLIT:
        fcfs_time = CIMS_SERVICE_TIMES["HSS1"]
        for pair in sweep.values:
            if not math.isclose(sum(pair), fcfs_time, rel_tol=1e-9):
                log_event("SWEEP", f"서비스 시간 합 {sum(pair):g}s 가 FCFS 값 {fcfs_time:g}s 와 다릅니다", "warning")

    grid = sweep.grid if sweep.grid is not None else (None,)
    tasks = [(spec, sweep, value, t) for value in sweep.values for t in grid]
    log_event("SWEEP", f"{sweep.parameter.value} 스윕 시작: {len(tasks)}개 점", "start")
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_evaluate_task, tasks))
    else:
        results = [_evaluate_task(task) for task in tasks]

    scale = TIME_SCALE[units]
    header = _value_columns(sweep.parameter)
    if sweep.grid is not None:
        header += ("interarrival_s",)
    header += tuple(f"{name}_{units}" if is_time else name for name, _, is_time in results[0])

    rows = []
    for (_, _, value, t), columns in zip(tasks, results):
        cells = _value_cells(sweep.parameter, value)
        if sweep.grid is not None:
            cells += (t,)
        cells += tuple(v * scale if is_time else v for _, v, is_time in columns)
        rows.append(cells)

    log_event("SWEEP", f"스윕 완료: {len(rows)}행 x {len(header)}열", "success")
    return SweepTable(header, tuple(rows))


def load_sweep_presets(path: str = SWEEP_PRESETS_PATH) -> Dict[str, Dict[str, Any]]:
    try:
        document = load_json_document(path)
    except ValueError as e:
        raise SweepError(f"스윕 프리셋 파일 로드 실패: {e}") from e
    return document.get("sweep_presets", {})


def _parse_range(text: str) -> List[float]:
    """``start:stop:step`` (끝값 포함)"""
    start, stop, step = (float(x) for x in text.split(":"))
    if step == 0.0 or (stop - start) / step < 0.0:
        raise SweepError(f"잘못된 범위: {text}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + k * step for k in range(count)]


def parse_values(parameter: SweepParameter, text: str, presets_path: str = SWEEP_PRESETS_PATH) -> List[Any]:
    """CLI --values 해석

    스칼라는 ``1,2,5`` 또는 ``1:50:1``, 벡터와 쌍은 ``;`` 로 점을, ``,`` 로 성분을 나눈다.
    ``preset:<이름>`` 은 metadata/sweep_presets.json 의 값 집합을 쓴다.
    """

    parameter = SweepParameter(parameter)
    if text.startswith(PRESET_PREFIX):
        name = text[len(PRESET_PREFIX):]
        presets = load_sweep_presets(presets_path)
        if name not in presets:
            raise SweepError(f"알 수 없는 스윕 프리셋: {name}")
        preset = presets[name]
        if preset.get("parameter") != parameter.value:
            raise SweepError(f"프리셋 '{name}' 은 {preset.get('parameter')} 스윕용입니다")
        return list(preset["values"])
    try:
        if parameter in SCALAR_PARAMETERS:
            if ":" in text:
                return _parse_range(text)
            return [float(x) for x in text.split(",")]
        return [[float(x) for x in point.split(",")] for point in text.split(";")]
    except ValueError as e:
        raise SweepError(f"스윕 값 형식 오류: {text} ({e})") from e


def parse_grid(text: str) -> List[float]:
    """도착 간격 격자 (``1:50:1`` 또는 ``preset:<이름>``)"""
    try:
        return parse_values(SweepParameter.INTERARRIVAL_TIME, text)
    except SweepError as e:
        raise SweepError(f"격자 형식 오류: {e}") from e
