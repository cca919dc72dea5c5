import os
from collections import Counter

import pytest
from hypothesis import HealthCheck, settings

from hanabi_search.core import GameConfig

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("thorough", max_examples=600, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def card(config: GameConfig, color: int, rank: int) -> int:
    return config.card_code(color, rank)


def make_order(config: GameConfig, front) -> list:
    """Deck order starting with ``front`` (card codes), the rest in code order."""
    rest = Counter({c: n for c, n in enumerate(config.composition)})
    for c in front:
        rest[c] -= 1
        assert rest[c] >= 0, "front uses more copies than exist"
    tail = [c for c in sorted(rest) for _ in range(rest[c])]
    return list(front) + tail


# one line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, line = ACCEPTANCE[num]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {line}")


@pytest.fixture
def default2p():
    return GameConfig()
