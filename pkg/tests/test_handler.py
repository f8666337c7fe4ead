import json

import pytest

import analysis_handler
from handler_utils import json_safe, make_response, parse_event, spec_from_event
from queueing_chain.model import preset_cims


def _body(response):
    return json.loads(response["body"])


def test_analyze_preset():
    response = analysis_handler.handler({"action": "analyze", "preset": "cims", "interarrival": 5}, None)

    assert response["statusCode"] == 200
    body = _body(response)
    assert body["action"] == "analyze"
    assert body["model"] == "jackson"
    assert body["chain_response"] == pytest.approx(0.0220184, rel=1e-4)
    assert [n["node"] for n in body["nodes"]][-1] == "HSS3"


def test_default_network_comes_from_metadata():
    assert spec_from_event({}) == preset_cims()


def test_api_gateway_body_string():
    event = {"body": json.dumps({"preset": "cims", "rate": 0.2, "capacity": [3, 3, 3, 3, 3, 3]})}

    body = _body(analysis_handler.handler(event, None))

    assert body["chain_response"] == pytest.approx(0.0073354, rel=1e-4)


def test_unstable_network_reports_inf():
    body = _body(analysis_handler.handler({"preset": "cims", "rate": 1000}, None))

    assert body["stable"] is False
    assert body["chain_response"] == "inf"


def test_optimize_with_verification():
    event = {"action": "optimize", "preset": "cims", "interarrival": 5, "budget": 1000, "samples": 500, "seed": 5}

    body = _body(analysis_handler.handler(event, None))

    assert body["budget"] == 1000.0
    assert body["verification"]["seed"] == 5
    assert sum(n["service_rate"] for n in body["nodes"]) == pytest.approx(1000.0)
    assert all(n["instances"] >= 1 for n in body["nodes"])


def test_optimize_infeasible_budget_is_client_error():
    response = analysis_handler.handler({"action": "optimize", "preset": "cims", "budget": 0.5}, None)

    assert response["statusCode"] == 400
    assert _body(response)["minimum_budget"] == pytest.approx(4.0)


@pytest.mark.parametrize(
    "event",
    [
        {"action": "optimize", "preset": "cims"},
        {"action": "forecast", "preset": "cims"},
        {"preset": "cims", "capacity": [1, 2]},
        {"network": {"nodes": []}},
    ],
)
def test_client_errors(event):
    assert analysis_handler.handler(event, None)["statusCode"] == 400


def test_compare_small_run(monkeypatch):
    calls = []
    monkeypatch.setattr(
        analysis_handler,
        "send_analysis_handler_error_notification",
        lambda *args: calls.append(args) or False,
    )

    event = {"action": "compare", "preset": "cims", "interarrival": 1, "jobs": 2000, "reps": 2, "seed": 3}
    body = _body(analysis_handler.handler(event, None))

    assert body["seed"] == 3
    assert body["rows"][-1]["target"] == "chain"
    assert bool(calls) == (not body["passed"])


def test_unexpected_error_returns_500(monkeypatch):
    calls = []

    def broken(payload):
        raise RuntimeError("boom")

    monkeypatch.setattr(analysis_handler, "spec_from_event", broken)
    monkeypatch.setattr(
        analysis_handler,
        "send_analysis_handler_error_notification",
        lambda function_name, error, additional_info=None: calls.append(function_name) or False,
    )

    response = analysis_handler.handler({"preset": "cims"}, None)

    assert response["statusCode"] == 500
    assert _body(response)["details"] == "boom"
    assert calls == ["handler"]


def test_response_helpers():
    assert parse_event(None) == {}
    assert json_safe(float("inf")) == "inf"
    assert json_safe(float("-inf")) == "-inf"
    assert json_safe(0.5) == 0.5
    assert make_response(200, {"메시지": "완료"})["body"] == '{"메시지": "완료"}'
