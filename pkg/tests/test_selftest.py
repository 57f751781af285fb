"""The built-in invariant suite must stay green and report per-check lines."""
from __future__ import annotations

from binlab.selftest import GROUPS, run_selftest


def test_all_groups_present():
    assert set(GROUPS) == {"core", "vectors", "potentials", "weights",
                           "processes", "graphs", "experiments", "io"}
    assert all(len(checks) >= 3 for checks in GROUPS.values())


def test_run_selftest_clean():
    lines: list[str] = []
    failures = run_selftest(emit=lines.append)
    assert failures == 0
    assert len(lines) == sum(len(v) for v in GROUPS.values())
    assert all(line.startswith("ok   ") for line in lines)


def test_run_selftest_group_filter():
    lines: list[str] = []
    failures = run_selftest(emit=lines.append, groups=["core"])
    assert failures == 0
    assert len(lines) == len(GROUPS["core"])
    assert all(line.startswith("ok   core.") for line in lines)
