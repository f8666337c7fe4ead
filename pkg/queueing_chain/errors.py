"""queueing_chain 전용 예외 계층"""

from typing import Optional


class QueueingChainError(Exception):
    """모든 도메인 예외의 기반 클래스"""


class ConfigError(QueueingChainError):
    """네트워크 설정 문서 파싱 실패 (키 경로와 줄 번호 포함)"""

    def __init__(self, message: str, key: str = "", line: Optional[int] = None):
        self.key = key
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        where = f"'{key}': " if key else ""
        super().__init__(f"{prefix}{where}{message}")


class ValidationError(QueueingChainError):
    """NetworkSpec 불변식 위반"""

    def __init__(self, report):
        self.report = report
        lines = "; ".join(str(v) for v in report.violations)
        super().__init__(f"유효하지 않은 네트워크: {lines}")


class SingularRoutingError(QueueingChainError):
    """트래픽 방정식이 특이 행렬 (열린 네트워크가 아님)"""


class ClassMismatchError(QueueingChainError):
    """FCFS 노드에 클래스별 서비스율이 지정됨 (BCMP 조건 위반)"""


class NonPositiveServiceRateError(QueueingChainError):
    """서비스율 μ <= 0"""


class UnstableError(QueueingChainError):
    """ρ >= 1 인 노드가 있음"""

    def __init__(self, message: str, node_ids=()):
        self.node_ids = tuple(node_ids)
        super().__init__(message)


class MultiClassNotSupportedError(QueueingChainError):
    """단일 클래스 전용 연산에 다중 클래스 네트워크가 들어옴"""


class InfeasibleAllocationError(QueueingChainError):
    """예산 C 가 총 도착률 이하"""

    def __init__(self, message: str, minimum_budget: float):
        self.minimum_budget = minimum_budget
        super().__init__(message)


class OracleViolationError(QueueingChainError):
    """수치 검증에서 닫힌 해보다 나은 점이 발견됨"""


class SpecMismatchError(QueueingChainError):
    """시뮬레이션 설정과 해석 결과의 네트워크가 다름"""


class SweepError(QueueingChainError):
    """잘못된 스윕 정의"""
