import json
import os
import sys
from datetime import datetime
from typing import Any, Dict

import pytz
from slack_sdk import WebClient
from slack_sdk.errors import SlackApiError

LOG_ICONS = {
    "start": "🚀",
    "info": "📊",
    "success": "✅",
    "warning": "⚠️",
    "error": "❌",
    "debug": "🔍",
}


DEFAULT_SEED = 20190526


def get_default_seed() -> int:
    """QUEUEING_CHAIN_SEED 환경 변수가 있으면 그 값, 없으면 DEFAULT_SEED"""
    value = os.environ.get("QUEUEING_CHAIN_SEED", "")
    try:
        return int(value) if value else DEFAULT_SEED
    except ValueError:
        log_event("CONFIG", f"QUEUEING_CHAIN_SEED 값이 정수가 아닙니다: {value}", "warning")
        return DEFAULT_SEED


def is_debug_enabled() -> bool:
    """dev 스테이지이거나 디버그 플래그가 켜져 있으면 True"""
    return (
        os.environ.get("STAGE", "") == "dev"
        or os.environ.get("QUEUEING_CHAIN_DEBUG", "") == "1"
    )


def log_event(tag: str, message: str, level: str = "info") -> None:
    """태그가 붙은 로그 한 줄을 stderr로 출력 (stdout은 결과 테이블 전용)"""

    if level == "debug" and not is_debug_enabled():
        return
    icon = LOG_ICONS.get(level, LOG_ICONS["info"])
    print(f"{icon} [{tag}] {message}", file=sys.stderr)


def load_json_document(path: str) -> Dict[str, Any]:
    """JSON 문서를 읽어 dict로 반환

    구문 오류는 줄/열 번호를 포함한 ValueError로 다시 던진다.
    """

    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        error_msg = f"파일을 읽을 수 없습니다: {path} ({e})"
        log_event("LOAD", error_msg, "error")
        send_document_error_notification(path, str(e))
        raise ValueError(error_msg) from e

    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        error_msg = f"{path}:{e.lineno}:{e.colno}: JSON 구문 오류: {e.msg}"
        log_event("LOAD", error_msg, "error")
        raise ValueError(error_msg) from e

    if not isinstance(document, dict):
        error_msg = f"{path}:1: 최상위 값은 객체여야 합니다"
        log_event("LOAD", error_msg, "error")
        raise ValueError(error_msg)
    return document


def send_slack_notification(message: str, source: str = "unknown") -> bool:
    """Slack으로 에러 알림을 보냄"""

    try:
        slack_token = os.environ.get("SLACK_BOT_TOKEN")
        channel_id = os.environ.get("SLACK_CHANNEL_ID")

        if not slack_token or not channel_id:
            log_event("SLACK", "Slack 설정이 없어 알림을 건너뜁니다", "debug")
            return False

        client = WebClient(token=slack_token)

        kst = pytz.timezone("Asia/Seoul")
        formatted_message = (
            f"🚨 *queueing-chain 알림*\n\n*발생 위치:* {source}\n"
            f"*메시지:* {message}\n"
            f"*발생 시간:* {datetime.now(kst).strftime('%Y-%m-%d %H:%M:%S')}"
        )

        response = client.chat_postMessage(
            channel=channel_id, text=formatted_message, parse="mrkdwn"
        )

        log_event("SLACK", f"알림 전송 성공: {response['ts']}", "success")
        return True

    except SlackApiError as e:
        log_event("SLACK", f"Slack API 에러: {e.response['error']}", "error")
        return False
    except Exception as e:
        log_event("SLACK", f"Slack 알림 전송 중 오류: {e}", "error")
        return False


def send_document_error_notification(path: str, error: str) -> bool:
    """네트워크 설정/프리셋 문서를 읽지 못했을 때 보내는 알림"""

    stage = os.environ.get("STAGE", "local")
    message = f"설정 문서 로드 실패 ({stage})\n*문서:* `{path}`\n*원인:* {error}"
    return send_slack_notification(message, "common_utils.load_json_document")
