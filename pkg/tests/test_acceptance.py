"""Acceptance suite: every criterion at its stated tolerance, one line per criterion."""
import filecmp
import time

import pytest

from liouville_lab.acceptance import run_all
from liouville_lab.cli import main

SEED = 7
# wall-clock budgets in seconds; criterion 1 also pays for building the shared battery
BUDGET = {1: 60, 2: 60, 3: 60, 4: 30, 8: 300}


@pytest.fixture(scope="module")
def suite(tmp_path_factory):
    out = tmp_path_factory.mktemp("verify-all-1")
    stamps = [time.perf_counter()]
    results = run_all(SEED, out, log=lambda line: stamps.append(time.perf_counter()))
    elapsed = {r.number: b - a for r, a, b in zip(results, stamps, stamps[1:])}
    return {r.number: r for r in results}, elapsed, out


@pytest.mark.parametrize("number", range(1, 11))
def test_criterion(suite, number, request):
    results, elapsed, _ = suite
    res = results[number]
    line = f"{res.line()}  ({elapsed[number]:.2f} s)"
    print(line)
    request.config.__dict__.setdefault("acceptance_lines", []).append(line)
    assert res.passed, res.detail
    if number in BUDGET:
        assert elapsed[number] < BUDGET[number]


def test_verify_all_is_byte_identical(suite, tmp_path, capsys, request):
    _, _, first = suite
    second = tmp_path / "verify-all-2"
    assert main(["verify-all", "--seed", str(SEED), "--out-dir", str(second)]) == 0
    lines = [ln for ln in capsys.readouterr().out.splitlines() if ln.startswith("criterion")]
    assert len(lines) == 10 and all("[PASS]" in ln for ln in lines)
    names = sorted(p.name for p in first.iterdir())
    assert names == sorted(p.name for p in second.iterdir())
    match, mismatch, errors = filecmp.cmpfiles(first, second, names, shallow=False)
    assert not mismatch and not errors
    line = f"verify-all --seed {SEED}: {len(match)} report files byte-identical"
    print(line)
    request.config.__dict__.setdefault("acceptance_lines", []).append(line)
