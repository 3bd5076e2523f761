import pytest

_CRITERIA = {}  # label -> [(test name, passed)]


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion covered by the test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    marker = report.user_properties and dict(report.user_properties).get("criterion")
    if marker:
        _CRITERIA.setdefault(marker, []).append((report.nodeid.split("::")[-1], report.passed))


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_makereport(item, call):
    m = item.get_closest_marker("criterion")
    if m and ("criterion", m.args[0]) not in item.user_properties:
        item.user_properties.append(("criterion", m.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for label in sorted(_CRITERIA, key=lambda s: (int("".join(c for c in s if c.isdigit()) or 0), s)):
        results = _CRITERIA[label]
        ok = all(p for _, p in results)
        tr.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {label}: " + ", ".join(
            f"{name}={'pass' if p else 'FAIL'}" for name, p in results))
