"""Pass/fail lines for the acceptance criteria, printed at the end of the run."""
import sys

RESULTS = []


def record(name, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
    RESULTS.append(line)
    print(line, file=sys.stderr)
    return ok
