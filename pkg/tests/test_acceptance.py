"""Acceptance suite: every criterion at its stated tolerance, one test each."""

import pytest

from pelab.acceptance import CRITERIA


@pytest.mark.parametrize("name,criterion", CRITERIA, ids=[c[0] for c in CRITERIA])
def test_acceptance(name, criterion):
    passed, detail = criterion()
    print(f"\n[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    assert passed, f"{name}: {detail}"
