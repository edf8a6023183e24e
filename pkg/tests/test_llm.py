import json

import httpx
import pytest

from reassignd import (
    ChatEndpointConfig,
    EndpointError,
    LlmPlanner,
    llm_plan,
    oracle_plan,
    serialize_plan,
)
from reassignd.errors import HTTP_ERROR, TIMEOUT
from reassignd.llm import prompt_messages
from reassignd.planner import SECTION_ROLE, build_prompt

ENDPOINT = ChatEndpointConfig(base_url="http://planner.test/v1", model="test-model")


def completion(content):
    return httpx.Response(200, json={"choices": [{"message": {"content": content}}]})


def client_with(handler):
    return httpx.Client(transport=httpx.MockTransport(handler))


class TestChatClient:
    def test_canned_valid_plan_passes_through(self, golden_ctx):
        expected = oracle_plan(golden_ctx)
        seen = {}

        def handler(request):
            seen["request"] = request
            return completion(serialize_plan(expected))

        plan = llm_plan(golden_ctx, ENDPOINT, client_with(handler))
        assert plan == expected

        request = seen["request"]
        assert request.url.path == "/v1/chat/completions"
        body = json.loads(request.content)
        assert body["model"] == "test-model"
        assert body["temperature"] == 0.0
        assert [m["role"] for m in body["messages"]] == ["system", "user"]

    def test_api_key_sent_only_when_set(self, golden_ctx, monkeypatch):
        seen = {}

        def handler(request):
            seen["auth"] = request.headers.get("authorization")
            return completion(serialize_plan(oracle_plan(golden_ctx)))

        monkeypatch.delenv("REASSIGND_API_KEY", raising=False)
        llm_plan(golden_ctx, ENDPOINT, client_with(handler))
        assert seen["auth"] is None

        monkeypatch.setenv("REASSIGND_API_KEY", "sk-local-test")
        llm_plan(golden_ctx, ENDPOINT, client_with(handler))
        assert seen["auth"] == "Bearer sk-local-test"

    def test_http_500_maps_to_endpoint_error(self, golden_ctx):
        def handler(request):
            return httpx.Response(500, text="boom")

        with pytest.raises(EndpointError) as err:
            llm_plan(golden_ctx, ENDPOINT, client_with(handler))
        assert err.value.code == HTTP_ERROR

    def test_timeout_maps_to_endpoint_error(self, golden_ctx):
        def handler(request):
            raise httpx.ReadTimeout("deadline exceeded")

        with pytest.raises(EndpointError) as err:
            llm_plan(golden_ctx, ENDPOINT, client_with(handler))
        assert err.value.code == TIMEOUT

    def test_malformed_payload_maps_to_endpoint_error(self, golden_ctx):
        def handler(request):
            return httpx.Response(200, json={"unexpected": True})

        with pytest.raises(EndpointError) as err:
            llm_plan(golden_ctx, ENDPOINT, client_with(handler))
        assert err.value.code == HTTP_ERROR

    def test_scripted_fail_fail_succeed_sequence(self, golden_ctx):
        calls = {"n": 0}
        valid = serialize_plan(oracle_plan(golden_ctx))

        def handler(request):
            calls["n"] += 1
            if calls["n"] <= 2:
                return httpx.Response(503, text="busy")
            return completion(valid)

        planner = LlmPlanner(ENDPOINT, client_with(handler))
        outcomes = []
        for _ in range(3):
            try:
                outcomes.append(planner.respond(golden_ctx))
            except EndpointError as exc:
                outcomes.append(exc.code)
        assert outcomes == [HTTP_ERROR, HTTP_ERROR, valid]


class TestPromptMessages:
    def test_role_section_becomes_system_message(self, golden_ctx):
        prompt = build_prompt(golden_ctx)
        messages = prompt_messages(prompt)
        assert messages[0]["role"] == "system"
        assert SECTION_ROLE in messages[0]["content"]
        assert "System-level data" in messages[1]["content"]
