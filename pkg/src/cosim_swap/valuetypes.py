"""Scalar value types shared by model descriptions, configs and units."""

from __future__ import annotations

REAL = "real"
INTEGER = "integer"
BOOLEAN = "boolean"
STRING = "string"

VAR_TYPES = (REAL, INTEGER, BOOLEAN, STRING)


class ValueTypeError(TypeError):
    pass


def coerce(vtype: str, value, what: str = "value"):
    """Check ``value`` against ``vtype`` and return it in canonical form.

    The only implicit conversion is integer literal -> real.
    """
    if vtype == REAL:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueTypeError(f"type mismatch for {what}: expected real, got {value!r}")
        return float(value)
    if vtype == INTEGER:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValueTypeError(f"type mismatch for {what}: expected integer, got {value!r}")
        return value
    if vtype == BOOLEAN:
        if not isinstance(value, bool):
            raise ValueTypeError(f"type mismatch for {what}: expected boolean, got {value!r}")
        return value
    if vtype == STRING:
        if not isinstance(value, str):
            raise ValueTypeError(f"type mismatch for {what}: expected string, got {value!r}")
        return value
    raise ValueError(f"unknown variable type {vtype!r}")


def condition_kind(vtype: str) -> str:
    # condition language only knows numbers and booleans
    if vtype in (REAL, INTEGER):
        return "num"
    if vtype == BOOLEAN:
        return "bool"
    return "str"
