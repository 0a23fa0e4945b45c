"""Acceptance gate: one test per criterion, each at its stated tolerance and time limit.

A pass/fail line per criterion is printed in the terminal summary (and by
``python tests/test_acceptance.py``).
"""

import pytest

from displab.suites import CRITERIA, run_criterion

RESULTS: dict[int, str] = {}


def _line(k, res, limit):
    title = CRITERIA[k][0]
    status = "PASS" if res.passed and res.seconds < limit else "FAIL"
    bad = [i.bound_id for i in res.items if not i.ok]
    extra = f" failing: {', '.join(bad)}" if bad else ""
    if res.error:
        extra += f" error: {res.error}"
    return f"criterion {k} [{status}] {title} ({res.seconds:.1f} s, limit {limit:.0f} s){extra}"


@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k):
    _, _, limit = CRITERIA[k]
    res = run_criterion(k)
    RESULTS[k] = _line(k, res, limit)
    print(RESULTS[k])
    print("\n".join(res.lines()))
    assert res.error is None, res.error
    assert res.status == "pass", [i.bound_id for i in res.items if not i.ok]
    assert res.seconds < limit


if __name__ == "__main__":
    import sys
    ok = True
    for k in sorted(CRITERIA):
        res = run_criterion(k)
        line = _line(k, res, CRITERIA[k][2])
        ok &= "[PASS]" in line
        print(line, flush=True)
    sys.exit(0 if ok else 1)
