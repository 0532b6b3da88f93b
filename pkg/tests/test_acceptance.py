"""Seeded acceptance suite: one pass/fail line per criterion."""

from __future__ import annotations

import os

import pytest

from conftest import ACCEPTANCE_LINES
from qrbsde.acceptance import NAMES, run_suite

SEED = 0


@pytest.fixture(scope="module")
def suite(request):
    parallel = max(1, min(4, os.cpu_count() or 1))
    result = run_suite(SEED, parallel=parallel)
    # shown in the terminal summary even when output is captured
    request.config.stash[ACCEPTANCE_LINES] = [result.line(cid) for cid in sorted(NAMES)]
    return result


@pytest.mark.parametrize("cid", sorted(NAMES), ids=lambda c: f"criterion_{c:02d}")
def test_criterion(suite, cid):
    assert suite.passed(cid), suite.line(cid)


def test_report_shape(suite):
    rep = suite.report
    assert rep["schema"] == "qrbsde-acceptance/1" and rep["seed"] == SEED
    assert sorted(int(c) for c in rep["criteria"]) == sorted(NAMES)
    assert rep["pass"] is True
