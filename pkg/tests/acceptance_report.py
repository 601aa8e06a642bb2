"""Collects one PASS/FAIL line per acceptance check."""
LINES = []


def report(tag: str, ok: bool, detail: str = "") -> bool:
    line = f"{'PASS' if ok else 'FAIL'} criterion {tag}: {detail}"
    LINES.append(line)
    print(line)
    return ok
