"""Collects one pass/fail line per acceptance criterion."""

from __future__ import annotations

_RESULTS: dict = {}


def record(number: int, title: str, passed: bool, detail: str = "") -> bool:
    status = "PASS" if passed else "FAIL"
    line = f"criterion {number:2d} {status}  {title}"
    if detail:
        line += f"  [{detail}]"
    _RESULTS[number] = line
    print(line)
    return passed


def summary_lines() -> list:
    return [_RESULTS[k] for k in sorted(_RESULTS)]
