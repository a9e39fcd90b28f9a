"""
JSON envelopes and request decorators for the powerctl API.

Every response carries ``status`` and an ISO-8601 UTC ``timestamp``.
Solver and link-model exceptions are turned into HTTP errors by
``handle_api_errors`` using ``ERROR_STATUS``; their ``to_dict()`` payload
(``mu_min_sum``, ``exponent``, ...) is merged into the error body.
"""

import logging
from datetime import datetime, timezone
from functools import wraps
from typing import Any, Callable, Dict, Iterable, Optional, Tuple, Type

from flask import jsonify, request

from powerctl.allocator import ConvergenceError, OverloadedError
from powerctl.link_model import ExponentGuardError
from powerctl.validators import ValidationError

logger = logging.getLogger(__name__)

# Exception type -> (HTTP status, log level). First match wins.
ERROR_STATUS: Tuple[Tuple[Type[BaseException], int, int], ...] = (
    (ValidationError, 400, logging.WARNING),
    (OverloadedError, 422, logging.WARNING),
    (ConvergenceError, 500, logging.ERROR),
    (ExponentGuardError, 500, logging.ERROR),
)


def _envelope(status: Any, **fields) -> Dict[str, Any]:
    body = {'status': status, 'timestamp': datetime.now(timezone.utc).isoformat()}
    body.update({k: v for k, v in fields.items() if v is not None})
    return body


class APIError(Exception):
    """Error raised by a route with an explicit HTTP status."""

    def __init__(self, message: str, status_code: int = 400, payload: Optional[Dict] = None):
        super().__init__(message)
        self.message = message
        self.status_code = status_code
        self.payload = payload or {}

    def to_dict(self) -> Dict[str, Any]:
        return _envelope(self.status_code, error=self.message, **self.payload)


def error_response(message: str, status_code: int = 400, **kwargs) -> tuple:
    """
    JSON error body ``{error, status, timestamp, **kwargs}``.

    Returns:
        Tuple of (response, status_code)
    """
    return jsonify(_envelope(status_code, error=message, **kwargs)), status_code


def success_response(data: Any = None, message: Optional[str] = None, **kwargs) -> tuple:
    """JSON success body ``{status: success, data, message?, **kwargs}`` with 200."""
    return jsonify(_envelope('success', data=data, message=message, **kwargs)), 200


def handle_api_errors(f: Callable) -> Callable:
    """Turn exceptions raised by a route into JSON error responses."""
    @wraps(f)
    def decorated_function(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except APIError as e:
            logger.warning(f"{f.__name__}: {e.message} ({e.status_code})")
            return jsonify(e.to_dict()), e.status_code
        except Exception as e:
            for exc_type, status, level in ERROR_STATUS:
                if isinstance(e, exc_type):
                    logger.log(level, f"{f.__name__}: {e}")
                    payload = e.to_dict() if hasattr(e, 'to_dict') else {}
                    payload.pop('error', None)
                    return error_response(str(e), status, **payload)
            logger.error(f"Unexpected error in {f.__name__}: {e}", exc_info=True)
            detail = str(e) if logger.isEnabledFor(logging.DEBUG) else None
            return error_response('Internal server error', 500, detail=detail)

    return decorated_function


def require_json(f: Callable) -> Callable:
    """Reject request bodies that are not sent as application/json (415)."""
    @wraps(f)
    def decorated_function(*args, **kwargs):
        if request.method == 'POST' and not request.is_json:
            return error_response('Content-Type must be application/json', 415)
        return f(*args, **kwargs)

    return decorated_function


def validate_required_fields(required_fields: Iterable[str]) -> Callable:
    """
    Require the JSON body to be an object holding every named field.

    Missing fields are listed under ``missing_fields`` in the 400 response.
    """
    required = tuple(required_fields)

    def decorator(f: Callable) -> Callable:
        @wraps(f)
        def decorated_function(*args, **kwargs):
            data = request.get_json(silent=True)
            if not data:
                return error_response('Request body is required', 400)
            if not isinstance(data, dict):
                return error_response('Request body must be a JSON object', 400)

            missing = [name for name in required if name not in data]
            if missing:
                return error_response(
                    f"Missing required fields: {', '.join(missing)}", 400, missing_fields=missing,
                )
            return f(*args, **kwargs)

        return decorated_function
    return decorator
