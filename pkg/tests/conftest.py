import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(mod.RESULTS):
        name, ok = mod.RESULTS[cid]
        terminalreporter.write_line(f"criterion {cid} ({name}): {'PASS' if ok else 'FAIL'}")
