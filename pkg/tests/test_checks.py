"""The invariant suite itself must come up green (reduced sample sizes;
the acceptance tests re-run the heavy ones at full size)."""

from fpdyn.checks import ALL_CHECKS, run_checks


def test_check_names_unique():
    names = [name for name, _ in ALL_CHECKS]
    assert len(names) == len(set(names))


def test_quick_suite_passes():
    failures = [(name, detail) for name, ok, detail in run_checks(quick=True) if not ok]
    assert failures == []
