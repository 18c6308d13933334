from contextvars import ContextVar, Token
from uuid import uuid4

from fastapi import Request

REQUEST_ID_HEADER = "x-request-id"

_REQUEST_ID_CTX: ContextVar[str | None] = ContextVar("request_id", default=None)


def generate_request_id() -> str:
    return uuid4().hex


def get_current_request_id() -> str | None:
    return _REQUEST_ID_CTX.get()


def bind_request_id(request: Request) -> tuple[str, Token[str | None]]:
    """Adopt the caller's request id header, or mint one, for this request."""
    request_id = request.headers.get(REQUEST_ID_HEADER) or generate_request_id()
    request.state.request_id = request_id
    return request_id, _REQUEST_ID_CTX.set(request_id)


def release_request_id(token: Token[str | None]) -> None:
    _REQUEST_ID_CTX.reset(token)


def trace_id_for(request: Request) -> str | None:
    """Request id reported in error envelopes."""
    return getattr(request.state, "request_id", None) or get_current_request_id()
