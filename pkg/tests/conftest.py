"""Shared pytest wiring: the acceptance marker and its summary table.

Tests marked ``acceptance(cid, description)`` are top-level release gates;
after any run that collected them, one PASS/FAIL line per criterion is
printed in a dedicated terminal section, with the call duration and any
recorded measurement properties.
"""


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "acceptance(cid, description): release criterion reported in the summary table",
    )
    config._acceptance_criteria = {}


def pytest_collection_modifyitems(config, items):
    for item in items:
        marker = item.get_closest_marker("acceptance")
        if marker is not None:
            config._acceptance_criteria[item.nodeid] = (marker.args[0], marker.args[1])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    criteria = getattr(config, "_acceptance_criteria", {})
    if not criteria:
        return
    results = {}
    outcomes = (("failed", "FAIL"), ("error", "FAIL"), ("passed", "PASS"), ("skipped", "SKIP"))
    for outcome, label in outcomes:
        for report in terminalreporter.stats.get(outcome, ()):
            nodeid = getattr(report, "nodeid", None)
            if nodeid not in criteria or nodeid in results:
                continue
            extra = ""
            props = dict(getattr(report, "user_properties", ()) or ())
            if props:
                extra = ", " + ", ".join(f"{key}={value}" for key, value in sorted(props.items()))
            results[nodeid] = (label, getattr(report, "duration", 0.0), extra)
    terminalreporter.section("acceptance criteria")
    ordered = sorted(criteria.items(), key=lambda kv: (len(kv[1][0]), kv[1][0]))
    for nodeid, (cid, description) in ordered:
        label, duration, extra = results.get(nodeid, ("NOT RUN", 0.0, ""))
        terminalreporter.write_line(f"[{label}] {cid}: {description} ({duration:.2f}s{extra})")
