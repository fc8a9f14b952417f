from __future__ import annotations

import pytest

from omnichain.core import AudioStream, Query, Streams, VideoStream

_criteria: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    number, title = marker
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _criteria[number] = (title, "PASS" if report.outcome == "passed" else "FAIL")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        rep.criterion = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        title, status = _criteria[n]
        terminalreporter.write_line(f"criterion {n:>2} {status}  {title}")


@pytest.fixture
def av_streams() -> Streams:
    return Streams(
        AudioStream("a", 8.0, "clip.wav"),
        VideoStream.from_timestamps("v", 8.0, [1, 3, 5, 7], "clip.mp4"),
    )


@pytest.fixture
def yes_no_query() -> Query:
    return Query("q1", "Is the dog barking?", ("Yes", "No"), "Yes")
