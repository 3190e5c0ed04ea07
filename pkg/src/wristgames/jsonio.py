"""Canonical JSON encoding and strict-schema parsing helpers.

Every file format and wire payload in this project uses the same canonical
encoding (sorted keys, no whitespace, repr-exact floats) so that round-trips
are byte-identical and digests are stable. Parsing is strict: unknown fields
are rejected by name, required fields are reported by name.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any


class SchemaError(ValueError):
    """A document does not match its declared schema."""

    def __init__(self, field: str, message: str):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")


def canonical_dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def parse_json(text: str, where: str = "document") -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(where, f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def require(obj: dict, field: str, kinds, where: str = "") -> Any:
    path = f"{where}.{field}" if where else field
    if field not in obj:
        raise SchemaError(path, "required field missing")
    value = obj[field]
    if not _matches(value, kinds):
        raise SchemaError(path, f"expected {_kind_names(kinds)}, got {type(value).__name__}")
    return value


def optional(obj: dict, field: str, kinds, default=None, where: str = "") -> Any:
    if field not in obj or obj[field] is None:
        return default
    path = f"{where}.{field}" if where else field
    value = obj[field]
    if not _matches(value, kinds):
        raise SchemaError(path, f"expected {_kind_names(kinds)}, got {type(value).__name__}")
    return value


def reject_unknown(obj: dict, allowed, where: str = "") -> None:
    for key in obj:
        if key not in allowed:
            path = f"{where}.{key}" if where else key
            raise SchemaError(path, "unknown field")


def _matches(value: Any, kinds) -> bool:
    if not isinstance(kinds, tuple):
        kinds = (kinds,)
    for kind in kinds:
        # bool is an int subclass; keep the two apart in schemas
        if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
            return True
        if kind is int and isinstance(value, int) and not isinstance(value, bool):
            return True
        if kind is bool and isinstance(value, bool):
            return True
        if kind in (str, list, dict) and isinstance(value, kind):
            return True
    return False


def _kind_names(kinds) -> str:
    if not isinstance(kinds, tuple):
        kinds = (kinds,)
    return " or ".join(k.__name__ for k in kinds)
