"""JSON rendering with reproducible float formatting.

Model files and service responses must round-trip floats exactly and must be
byte-identical across runs, so floats are rendered with 17 significant digits
(enough to reconstruct any IEEE-754 double) instead of whatever the stdlib
encoder happens to emit.
"""
from __future__ import annotations

import json
import math
from typing import Any


def format_float(value: float) -> str:
    """Render a float with 17 significant digits, always as a JSON float."""
    if not math.isfinite(value):
        raise ValueError(f"non-finite value not representable in JSON: {value!r}")
    text = format(value, ".17g")
    # '.17g' can drop the decimal point for integral values; keep the token
    # a float so the round-trip preserves the type.
    if not any(c in text for c in ".eE"):
        text += ".0"
    return text


def dumps(obj: Any, indent: int | None = None) -> str:
    """Serialize to JSON with deterministic float rendering.

    Dict insertion order is preserved; callers are responsible for building
    dicts in a stable order.
    """
    out: list[str] = []
    _render(obj, out, indent, 0)
    return "".join(out)


def _render(obj: Any, out: list[str], indent: int | None, depth: int) -> None:
    if obj is None or obj is True or obj is False:
        out.append(json.dumps(obj))
    elif isinstance(obj, float):
        out.append(format_float(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        _render_items(
            ((json.dumps(str(k), ensure_ascii=False) + ": ") for k in obj),
            obj.values(), "{}", out, indent, depth)
    elif isinstance(obj, (list, tuple)):
        _render_items(("" for _ in obj), obj, "[]", out, indent, depth)
    else:
        raise TypeError(f"not JSON-serializable: {type(obj).__name__}")


def _render_items(prefixes, values, brackets, out, indent, depth) -> None:
    values = list(values)
    if not values:
        out.append(brackets)
        return
    open_b, close_b = brackets
    pad = "" if indent is None else "\n" + " " * (indent * (depth + 1))
    end = "" if indent is None else "\n" + " " * (indent * depth)
    out.append(open_b)
    for i, (prefix, value) in enumerate(zip(prefixes, values)):
        if i:
            out.append(",")
        out.append(pad)
        out.append(prefix)
        _render(value, out, indent, depth + 1)
    out.append(end)
    out.append(close_b)


def loads(text: str) -> Any:
    return json.loads(text)
