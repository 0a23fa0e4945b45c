"""Run the acceptance criteria and print one pass/fail line each.

    python3 scripts/run_acceptance.py            # all criteria
    python3 scripts/run_acceptance.py 1 4 8      # a subset
"""

import sys

from displab.suites import CRITERIA, run_criterion


def main(argv):
    ks = [int(a) for a in argv] or sorted(CRITERIA)
    ok = True
    for k in ks:
        title, _, limit = CRITERIA[k]
        res = run_criterion(k)
        good = res.passed and res.seconds < limit
        ok &= good
        print(f"criterion {k} [{'PASS' if good else 'FAIL'}] {title} ({res.seconds:.1f} s, limit {limit:.0f} s)")
        print("\n".join(res.lines()), flush=True)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
