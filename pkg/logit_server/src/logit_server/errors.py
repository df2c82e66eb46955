"""Server-side errors mapped onto the wire protocol's error codes."""

from __future__ import annotations


class ServerError(Exception):
    code = "INTERNAL"
    http_status = 500


class UnknownStreamError(ServerError):
    code = "UNKNOWN_STREAM"
    http_status = 404


class TokenOutOfRangeError(ServerError):
    code = "TOKEN_OUT_OF_RANGE"
    http_status = 400


class CapacityError(ServerError):
    code = "CAPACITY"
    http_status = 429
