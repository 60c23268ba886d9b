import json
from typing import Optional, Sequence

import pytest

from senm.ingestion import EgoTimeline, parse_timeline

DAY = 86400
T0 = 1_609_459_200  # 2021-01-01T00:00:00Z


def post_line(ts, alters=None, kind="reply", sentiment=None, text=None, ego="e1", **extra) -> str:
    if alters is None:
        obj = {"ego_id": ego, "ts": ts, "noncommunicative": True}
    else:
        obj = {"ego_id": ego, "ts": ts, "kind": kind, "alter_ids": list(alters)}
        if sentiment is not None:
            obj["sentiment"] = sentiment
        if text is not None:
            obj["text"] = text
    obj.update(extra)
    return json.dumps(obj)


def make_timeline(interactions: Sequence[tuple], plain: Sequence[float] = (), ego: str = "e1",
                  location: Optional[str] = None) -> EgoTimeline:
    """interactions: (ts, alters[, sentiment[, text]]) tuples."""
    lines = []
    if location is not None:
        lines.append(json.dumps({"ego_id": ego, "profile": True, "declared_location": location}))
    for item in interactions:
        ts, alters, *rest = item
        sentiment = rest[0] if rest else None
        text = rest[1] if len(rest) > 1 else None
        lines.append(post_line(ts, alters, sentiment=sentiment, text=text, ego=ego))
    lines += [post_line(ts, ego=ego) for ts in plain]
    return parse_timeline(lines, ego)


# -- acceptance summary -------------------------------------------------------

_CRITERIA: dict[int, list[str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or not marker.args:
        return
    if report.when == "call" or report.outcome != "passed":
        _CRITERIA.setdefault(marker.args[0], []).append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_CRITERIA):
        ok = all(o == "passed" for o in _CRITERIA[crit])
        terminalreporter.write_line(f"criterion {crit:2d}: {'PASS' if ok else 'FAIL'}")
