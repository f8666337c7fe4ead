import pytest

import common_utils
from common_utils import get_default_seed, load_json_document, send_slack_notification


def test_unreadable_document_sends_load_alert(tmp_path, monkeypatch):
    calls = []
    monkeypatch.setattr(common_utils, "send_slack_notification", lambda message, source: calls.append((message, source)))
    monkeypatch.setenv("STAGE", "prod")
    path = tmp_path / "missing.json"

    with pytest.raises(ValueError):
        load_json_document(str(path))

    message, source = calls[0]
    assert source == "common_utils.load_json_document"
    assert str(path) in message
    assert "(prod)" in message


def test_syntax_error_reports_line_without_alert(tmp_path, monkeypatch):
    calls = []
    monkeypatch.setattr(common_utils, "send_slack_notification", lambda message, source: calls.append(source))
    path = tmp_path / "broken.json"
    path.write_text('{\n  "nodes": [\n}', encoding="utf-8")

    with pytest.raises(ValueError, match=r"broken.json:3:"):
        load_json_document(str(path))
    assert calls == []


def test_slack_is_skipped_without_credentials():
    assert send_slack_notification("메시지", "tests") is False


def test_default_seed_from_environment(monkeypatch):
    assert get_default_seed() == 20190526

    monkeypatch.setenv("QUEUEING_CHAIN_SEED", "42")
    assert get_default_seed() == 42

    monkeypatch.setenv("QUEUEING_CHAIN_SEED", "abc")
    assert get_default_seed() == 20190526
