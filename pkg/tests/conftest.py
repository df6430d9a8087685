from collections import defaultdict

_results = defaultdict(list)
_titles = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark:
            item.user_properties.append(("criterion", mark.args[0]))
            _titles[mark.args[0]] = mark.args[1]


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    if report.when == "call" or report.skipped or (report.when == "setup" and report.failed):
        reason = ""
        if report.skipped and isinstance(report.longrepr, tuple):
            reason = report.longrepr[2].removeprefix("Skipped: ")
        _results[crit].append((report.outcome, reason))


def pytest_terminal_summary(terminalreporter):
    if not _titles:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(_titles):
        outcomes = _results.get(crit, [])
        kinds = [o for o, _ in outcomes]
        if not outcomes:
            verdict = "NOT RUN"
        elif "failed" in kinds:
            verdict = "FAIL"
        elif all(k == "skipped" for k in kinds):
            verdict = "SKIP"
        elif "skipped" in kinds:
            verdict = "PARTIAL"
        else:
            verdict = "PASS"
        detail = f"{kinds.count('passed')} passed, {kinds.count('failed')} failed, {kinds.count('skipped')} skipped"
        reasons = sorted({r for o, r in outcomes if o == "skipped" and r})
        line = f"criterion {crit} [{verdict}] {_titles[crit]} ({detail})"
        if reasons:
            line += " skipped: " + "; ".join(reasons)
        tr.write_line(line)
