"""Planning/judging backends: scripted oracle, prompt templates, remote client."""

from .base import Backend, BackendRequest, BackendResponse, BackendUnavailable
from .oracle import OracleBackend, UnsupportedTask, largest_remainder_split, oracle_complete
from .templates import PromptTemplate, UnboundSlot, get_template, render_prompt


def make_backend(name: str, **options) -> Backend:
    if name == "oracle":
        return OracleBackend()
    if name == "remote":
        from .remote import Cassette, EndpointConfig, RemoteBackend

        cassette = options.pop("cassette", None)
        mode = options.pop("cassette_mode", "replay")
        url = options.pop("base_url", None)
        endpoint = EndpointConfig(base_url=url, **options) if url else None
        return RemoteBackend(endpoint, Cassette(cassette, mode) if cassette else None)
    raise BackendUnavailable(f"unknown backend {name!r}")


__all__ = [
    "Backend", "BackendRequest", "BackendResponse", "BackendUnavailable", "OracleBackend",
    "UnsupportedTask", "largest_remainder_split", "oracle_complete", "PromptTemplate",
    "UnboundSlot", "get_template", "render_prompt", "make_backend",
]
