"""Client for a chat-completion style text service, with record/replay."""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import httpx

from .base import BackendRequest, BackendResponse


class RemoteError(RuntimeError):
    pass


class Timeout(RemoteError):
    pass


class ServiceError(RemoteError):
    def __init__(self, status: int, body: str):
        super().__init__(f"service answered {status}: {body[:200]}")
        self.status = status


class ParseFailure(RemoteError):
    pass


class CassetteMiss(RemoteError):
    pass


@dataclass
class EndpointConfig:
    base_url: str
    model: str = "gpt-4"
    token_env: str = "SAGENTS_API_TOKEN"
    timeout_s: float = 60.0
    max_retries: int = 3
    backoff_s: float = 1.0
    max_in_flight: int = 4
    role_models: dict | None = None  # per-role model override, e.g. {"root": "gpt-4"}

    def token(self) -> str | None:
        return os.environ.get(self.token_env)


class Cassette:
    """JSONL file of request/response pairs keyed by template id and prompt."""

    def __init__(self, path: str | Path, mode: str = "replay"):
        if mode not in ("record", "replay"):
            raise ValueError("cassette mode is 'record' or 'replay'")
        self.path = Path(path)
        self.mode = mode
        self._lock = threading.Lock()
        self._entries: dict[str, list[str]] = {}
        if mode == "replay":
            for line in self.path.read_text().splitlines():
                if line.strip():
                    doc = json.loads(line)
                    self._entries.setdefault(doc["key"], []).append(doc["response"])

    def lookup(self, request: BackendRequest) -> str:
        with self._lock:
            queue = self._entries.get(request.key())
            if not queue:
                raise CassetteMiss(f"no recorded response for a {request.template_id} request")
            return queue.pop(0) if len(queue) > 1 else queue[0]

    def record(self, request: BackendRequest, text: str) -> None:
        with self._lock, self.path.open("a") as fh:
            fh.write(json.dumps({"key": request.key(), "template": request.template_id,
                                 "response": text}, sort_keys=True) + "\n")


class RemoteBackend:
    name = "remote"

    def __init__(self, endpoint: EndpointConfig | None = None, cassette: Cassette | None = None,
                 client: httpx.Client | None = None, sleep=time.sleep):
        if endpoint is None and (cassette is None or cassette.mode != "replay"):
            raise ValueError("a remote backend needs an endpoint or a replay cassette")
        self.endpoint = endpoint
        self.cassette = cassette
        self._client = client
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(endpoint.max_in_flight if endpoint else 1)
        self.exchanges: list[dict] = []

    def _http(self) -> httpx.Client:
        if self._client is None:
            self._client = httpx.Client(timeout=self.endpoint.timeout_s)
        return self._client

    def complete(self, request: BackendRequest) -> BackendResponse:
        if self.cassette is not None and self.cassette.mode == "replay":
            text = self.cassette.lookup(request)
            return BackendResponse(text, source="cassette")
        return remote_complete(request, self)

    def _post(self, payload: dict) -> dict:
        ep = self.endpoint
        headers = {"Content-Type": "application/json"}
        if ep.token():
            headers["Authorization"] = f"Bearer {ep.token()}"
        url = ep.base_url.rstrip("/") + "/chat/completions"
        last: Exception | None = None
        for attempt in range(ep.max_retries + 1):
            try:
                with self._slots:
                    resp = self._http().post(url, json=payload, headers=headers)
            except (httpx.TimeoutException, httpx.TransportError) as exc:
                last = exc
            else:
                if resp.status_code == 429 or resp.status_code >= 500:
                    last = ServiceError(resp.status_code, resp.text)
                elif resp.status_code >= 300:
                    raise ServiceError(resp.status_code, resp.text)
                else:
                    return resp.json()
            if attempt < ep.max_retries:
                self._sleep(ep.backoff_s * 2 ** attempt)
        if isinstance(last, ServiceError):
            raise last
        raise Timeout(f"no answer from {url} after {ep.max_retries + 1} attempts: {last}")


def remote_complete(request: BackendRequest, backend: RemoteBackend) -> BackendResponse:
    ep = backend.endpoint
    model = request.model or ep.model
    if ep.role_models and request.context.get("role") in ep.role_models:
        model = ep.role_models[request.context["role"]]
    payload = {
        "model": model,
        "messages": [{"role": "user", "content": request.prompt}],
        "temperature": request.temperature,
    }
    start = time.monotonic()
    doc = backend._post(payload)
    try:
        text = doc["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise ParseFailure(f"unexpected completion shape: {str(doc)[:200]}") from None
    usage = doc.get("usage") or {}
    response = BackendResponse(
        text,
        prompt_tokens=int(usage.get("prompt_tokens", 0)),
        completion_tokens=int(usage.get("completion_tokens", 0)),
        latency_s=time.monotonic() - start,
        source="remote",
    )
    backend.exchanges.append({"template": request.template_id, "model": model, "response": text})
    if backend.cassette is not None and backend.cassette.mode == "record":
        backend.cassette.record(request, text)
    return response
