import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import criteria  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if not criteria.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(criteria.RESULTS):
        passed, detail = criteria.RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}")
