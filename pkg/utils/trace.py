"""
Trace Writer
Phase-by-phase and iteration-by-iteration JSON-lines traces
"""

import json
import logging
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional, Union

logger = logging.getLogger(__name__)


def _plain(value: Any) -> Any:
    """Make a trace record JSON-safe (Fractions as "a/b", tuples as lists)."""
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, set, frozenset)):
        items = sorted(value) if isinstance(value, (set, frozenset)) else value
        return [_plain(v) for v in items]
    if hasattr(value, "item") and callable(value.item):
        # numpy scalars
        return value.item()
    return value


class TraceWriter:
    """
    Append-only JSON-lines sink.

    Usable as a context manager; `emit` is a no-op after `close`.
    """

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self._handle = open(self.path, "w", encoding="utf-8")
        self.records = 0

    def emit(self, record: dict) -> None:
        if self._handle is None:
            return
        self._handle.write(json.dumps(_plain(record), sort_keys=True) + "\n")
        self.records += 1

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None
            logger.debug("Wrote %d trace records to %s", self.records, self.path)

    def __enter__(self) -> "TraceWriter":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.close()


def emit(trace: Optional[TraceWriter], **record) -> None:
    """Emit when a trace is attached."""
    if trace is not None:
        trace.emit(record)
