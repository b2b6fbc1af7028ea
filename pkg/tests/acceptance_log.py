"""Collects one status line per acceptance criterion for the terminal summary."""

LINES: dict[int, str] = {}


def record(number: int, passed: bool | None, detail: str) -> None:
    status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
    line = f"criterion {number}: {status}  {detail}"
    LINES[number] = line
    print(line)
