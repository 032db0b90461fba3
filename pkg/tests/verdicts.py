"""Acceptance verdicts collected during the run and echoed in the terminal summary."""

VERDICTS: dict = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    VERDICTS[criterion] = line
    print(line)
    assert ok, line
