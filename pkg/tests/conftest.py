import pytest

from queueing_chain.model import ClassSpec, Discipline, NetworkSpec, NodeSpec, RoutingMatrix, preset_cims


@pytest.fixture(autouse=True)
def _quiet_environment(monkeypatch):
    """테스트 중에는 Slack 으로 나가지 않고 기본 seed 를 쓴다"""
    monkeypatch.delenv("SLACK_BOT_TOKEN", raising=False)
    monkeypatch.delenv("SLACK_CHANNEL_ID", raising=False)
    monkeypatch.delenv("QUEUEING_CHAIN_SEED", raising=False)
    monkeypatch.delenv("QUEUEING_CHAIN_DEBUG", raising=False)
    monkeypatch.delenv("STAGE", raising=False)


@pytest.fixture
def cims_spec():
    """도착 간격 5초 (λ = 0.2)"""
    return preset_cims().with_interarrival_time(5.0)


def single_node(rate, service_rate, servers=1, discipline=Discipline.FCFS, node_id="Q"):
    return NetworkSpec(
        nodes=(NodeSpec(node_id, service_rate, servers, discipline),),
        routing=RoutingMatrix(((0.0,),), (1.0,)),
        classes=(ClassSpec("default", 1.0),),
        external_rate=rate,
    )


@pytest.fixture
def make_single_node():
    return single_node
