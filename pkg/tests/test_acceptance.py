"""Acceptance criteria, one test and one printed PASS/FAIL line each.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines.
"""

import time

import pytest

from nlgrad.acceptance import ALL_CHECKS, Check
from nlgrad.cli import main

# Pinned runtime ceilings in seconds, keyed by criterion number.
RUNTIME_LIMITS = {1: 1, 2: 5, 3: 10, 4: 2, 5: 60, 6: 5, 7: 300, 8: 60, 9: 120, 10: 120, 11: 600}


@pytest.mark.parametrize("check", ALL_CHECKS[:-1], ids=lambda fn: fn.__name__)
def test_criterion(check):
    t0 = time.perf_counter()
    chk = check()
    chk = Check(chk.number, chk.name, chk.passed, chk.value, chk.threshold, chk.detail, time.perf_counter() - t0)
    print(chk.line())
    assert chk.passed, chk.detail
    limit = RUNTIME_LIMITS[chk.number]
    assert chk.seconds < limit, f"took {chk.seconds:.1f}s, limit {limit}s"


def test_criterion_12_selftest_twice_is_byte_identical(tmp_path):
    paths = [tmp_path / f"selftest{k}.csv" for k in range(2)]
    codes = [main(["selftest", "--out", str(p)]) for p in paths]
    same = paths[0].read_bytes() == paths[1].read_bytes()
    print(f"[{'PASS' if same else 'FAIL'}] 12 determinism: selftest run twice, CSV bytes identical: {same}")
    assert codes[0] == codes[1] and codes[0] in (0, 2)
    assert same
