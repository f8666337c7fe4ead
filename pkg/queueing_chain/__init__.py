"""열린 큐잉 네트워크(서비스 체인) 해석 + 시뮬레이션 도구"""

__version__ = "1.0.0"
