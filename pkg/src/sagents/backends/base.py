from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Any, Protocol


class BackendUnavailable(RuntimeError):
    pass


@dataclass
class BackendRequest:
    """A rendered prompt plus the structured context it was rendered from.

    Text backends only read ``prompt``. The scripted oracle reads ``context``,
    which carries the same information in machine form.
    """

    template_id: str
    prompt: str
    context: dict[str, Any] = field(default_factory=dict)
    temperature: float = 0.0
    model: str | None = None

    def key(self) -> str:
        return json.dumps({"template": self.template_id, "prompt": self.prompt}, sort_keys=True)


@dataclass
class BackendResponse:
    text: str
    parsed: Any = None
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency_s: float = 0.0
    source: str = "oracle"

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("parsed")
        return d


class Backend(Protocol):
    name: str

    def complete(self, request: BackendRequest) -> BackendResponse: ...
