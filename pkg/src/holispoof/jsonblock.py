"""Lenient extraction of JSON objects embedded in free-form model output."""

from __future__ import annotations

import json
from typing import Any, Iterable, Iterator

_DECODER = json.JSONDecoder()


def iter_json_objects(text: str) -> Iterator[dict[str, Any]]:
    """Yield every JSON object that decodes starting at some ``{`` in ``text``.

    Objects are yielded in order of their opening brace, so an outer object
    comes before the objects nested inside it.
    """
    pos = text.find("{")
    while pos != -1:
        try:
            obj, _ = _DECODER.raw_decode(text, pos)
        except json.JSONDecodeError:
            obj = None
        if isinstance(obj, dict):
            yield obj
        pos = text.find("{", pos + 1)


def find_json_object(text: str, required_keys: Iterable[str] = ()) -> dict[str, Any] | None:
    """Return the first balanced object holding all ``required_keys``, or None."""
    keys = tuple(required_keys)
    for obj in iter_json_objects(text):
        if all(k in obj for k in keys):
            return obj
    return None
