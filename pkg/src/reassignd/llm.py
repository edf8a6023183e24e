"""Chat-endpoint planner: OpenAI-compatible chat completions over HTTP.

Any endpoint speaking the standard wire shape works: POST
``{base_url}/chat/completions`` with a message list, plain text reply in
``choices[0].message.content``. Requests use temperature 0 for
reproducibility. The API key is read from an environment variable and sent
as a bearer token only when present, so local endpoints need no key.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import httpx

from .errors import HTTP_ERROR, TIMEOUT, EndpointError
from .planner import DisruptionContext, PromptText, ProposedPlan, build_prompt, parse_plan

DEFAULT_API_KEY_ENV = "REASSIGND_API_KEY"


@dataclass(frozen=True)
class ChatEndpointConfig:
    base_url: str
    model: str
    api_key_env: str = DEFAULT_API_KEY_ENV
    timeout_s: float = 30.0
    temperature: float = 0.0


def prompt_messages(prompt: PromptText) -> list[dict]:
    """Map the structured prompt onto a chat message list: the role section
    becomes the system message, everything else the user message."""
    head, *rest = prompt.sections
    system = f"## {head.heading}\n{head.body}"
    user = "\n\n".join(f"## {section.heading}\n{section.body}" for section in rest)
    return [
        {"role": "system", "content": system},
        {"role": "user", "content": user},
    ]


class ChatCompletionClient:
    """Minimal blocking chat-completions client."""

    def __init__(self, endpoint: ChatEndpointConfig, http_client: httpx.Client | None = None) -> None:
        self.endpoint = endpoint
        self._http = http_client or httpx.Client(timeout=endpoint.timeout_s)

    def complete(self, messages: list[dict]) -> str:
        """One chat-completion round trip; returns the reply text.

        Raises EndpointError with code TIMEOUT or HTTP_ERROR; both are
        retryable from the control loop's point of view.
        """
        url = self.endpoint.base_url.rstrip("/") + "/chat/completions"
        headers = {}
        api_key = os.environ.get(self.endpoint.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        payload = {
            "model": self.endpoint.model,
            "messages": messages,
            "temperature": self.endpoint.temperature,
        }
        try:
            response = self._http.post(
                url, json=payload, headers=headers, timeout=self.endpoint.timeout_s
            )
        except httpx.TimeoutException as exc:
            raise EndpointError(f"endpoint timed out: {exc}", code=TIMEOUT) from exc
        except httpx.HTTPError as exc:
            raise EndpointError(f"transport failure: {exc}", code=HTTP_ERROR) from exc
        if response.status_code >= 400:
            raise EndpointError(
                f"endpoint returned HTTP {response.status_code}", code=HTTP_ERROR
            )
        try:
            body = response.json()
            content = body["choices"][0]["message"]["content"]
        except (ValueError, LookupError, TypeError) as exc:
            raise EndpointError(f"malformed completion payload: {exc}", code=HTTP_ERROR) from exc
        if not isinstance(content, str):
            raise EndpointError("completion content is not text", code=HTTP_ERROR)
        return content

    def close(self) -> None:
        self._http.close()


class LlmPlanner:
    """Planner that asks a chat endpoint for each reassignment attempt."""

    def __init__(self, endpoint: ChatEndpointConfig, http_client: httpx.Client | None = None) -> None:
        self._client = ChatCompletionClient(endpoint, http_client)

    def respond(self, ctx: DisruptionContext) -> str:
        return self._client.complete(prompt_messages(build_prompt(ctx)))


def llm_plan(
    ctx: DisruptionContext,
    endpoint: ChatEndpointConfig,
    http_client: httpx.Client | None = None,
) -> ProposedPlan:
    """One full planning round: build the prompt, call the endpoint once,
    parse the reply. Endpoint and parse failures surface as PlannerError
    subclasses, which the control loop maps to a retry."""
    return parse_plan(LlmPlanner(endpoint, http_client).respond(ctx), ctx)
