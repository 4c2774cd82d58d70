import os
import sys
import time

sys.path.insert(0, os.path.dirname(__file__))

ACCEPTANCE_LINES = []
SESSION_START = [time.perf_counter()]


def pytest_sessionstart(session):
    SESSION_START[0] = time.perf_counter()


def pytest_collection_modifyitems(session, config, items):
    # acceptance criteria run last so the wall-clock criterion sees the whole suite
    def key(item):
        in_acc = item.module.__name__.endswith("test_acceptance")
        last = item.name.startswith("test_suite_wall_clock")
        return (in_acc, last)

    items.sort(key=key)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
