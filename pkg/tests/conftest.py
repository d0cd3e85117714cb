import pathlib
import re
import sys
from collections import defaultdict

sys.path.insert(0, str(pathlib.Path(__file__).parent))

CRITERIA = {
    1: "rate-formula reproduction",
    2: "lifetime reproduction",
    3: "3P1 branching",
    4: "hyperfine quenching",
    5: "structure and clock point",
    6: "Doppler limit",
    7: "gradient gates",
    8: "magnetic pi pulse",
    9: "gate error points",
    10: "property suites",
    11: "spectra round trip",
    12: "figure shapes",
}

_outcomes = defaultdict(list)
_CRIT = re.compile(r"test_acceptance\.py::test_c(\d\d)_(\w+)")


def pytest_runtest_logreport(report):
    m = _CRIT.search(report.nodeid)
    if not m:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        if hasattr(report, "wasxfail"):
            outcome = "xfail" if report.skipped else "xpass"
        else:
            outcome = report.outcome
        _outcomes[int(m.group(1))].append((m.group(2), outcome))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k, title in CRITERIA.items():
        res = _outcomes.get(k)
        if not res:
            tr.write_line(f"criterion {k:2d} NOT RUN  {title}")
            continue
        hard = [n for n, o in res if o not in ("passed", "xfail")]
        soft = [n for n, o in res if o == "xfail"]
        if hard:
            verdict, note = "FAIL", "failed: " + ", ".join(hard)
        elif soft:
            verdict, note = "PARTIAL", "ledgered literal sub-check fails: " + ", ".join(soft)
        else:
            verdict, note = "PASS", f"{len(res)} checks"
        tr.write_line(f"criterion {k:2d} {verdict:<8} {title} ({note})")
