"""Cross-check the workbench's exported session log against the backend
keystroke simulator: identical episodes must yield identical counts."""

import json
from pathlib import Path

import pytest

from wlac.corpus import ContextType, WlacInstance
from wlac.evaluation import episode_keystrokes, keystroke_simulation

FIXTURE = Path(__file__).resolve().parent.parent / "frontend" / "fixtures" / "session_log.jsonl"


def _episodes():
    if not FIXTURE.exists():
        pytest.skip("workbench session-log fixture not present")
    out = []
    for line in FIXTURE.read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(json.loads(line))
    return out


def _as_instance(episode: dict) -> WlacInstance:
    ctype = ContextType.PREFIX if episode["left_ctx"] else ContextType.ZERO_CONTEXT
    return WlacInstance(
        source=tuple(episode["source"]),
        left_ctx=tuple(episode["left_ctx"]),
        right_ctx=tuple(episode["right_ctx"]),
        typed=episode["gold"][:1],
        gold=episode["gold"],
        ctype=ctype,
    )


def _stub_top1(episode: dict):
    recorded = episode["suggestions"]

    def top1(source, left, right, typed):
        return recorded.get(str(len(typed)))

    return top1


def test_ui_counts_reproduced_exactly():
    episodes = _episodes()
    assert episodes, "fixture must hold at least one episode"
    for episode in episodes:
        instance = _as_instance(episode)
        replayed = episode_keystrokes(_stub_top1(episode), instance)
        assert replayed == episode["keystrokes"], episode["gold"]


def test_ui_totals_match_simulation_report():
    episodes = _episodes()
    instances = [_as_instance(e) for e in episodes]

    # One shared table works because every gold appears once per prefix map.
    def combined_top1(source, left, right, typed):
        for episode, instance in zip(episodes, instances):
            if tuple(episode["left_ctx"]) == tuple(left):
                return episode["suggestions"].get(str(len(typed)))
        return None

    report = keystroke_simulation(combined_top1, instances)
    assert report.total == sum(e["keystrokes"] for e in episodes)
    assert report.per_episode == [e["keystrokes"] for e in episodes]
