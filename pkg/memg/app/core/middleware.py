from starlette.middleware.base import BaseHTTPMiddleware, RequestResponseEndpoint
from starlette.requests import Request
from starlette.responses import Response

from app.core.request_id import REQUEST_ID_HEADER, bind_request_id, release_request_id


class RequestIdMiddleware(BaseHTTPMiddleware):
    """Attach a request id to every incoming request and echo it back.

    The id tags every log line emitted while the request is served and is
    reported as ``trace_id`` in error envelopes.
    """

    async def dispatch(self, request: Request, call_next: RequestResponseEndpoint) -> Response:
        request_id, token = bind_request_id(request)
        try:
            response = await call_next(request)
        finally:
            release_request_id(token)
        response.headers[REQUEST_ID_HEADER] = request_id
        return response
