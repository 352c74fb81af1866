"""The eleven acceptance criteria at their stated tolerances.

Each test prints one ``[VERDICT] key title: detail`` line.  Run this file
directly (``python tests/test_acceptance.py``) for the lines alone.
"""

import sys

import pytest

from rwre import checks

CRITERIA = [
    ("1", checks.simple_walk_exactness),
    ("2", checks.walk_nondegenerate),
    ("3", checks.walk_degenerate),
    ("4", checks.corrector_identities),
    ("5", checks.corrector_asymptotics),
    ("6", checks.corrector_martingale),
    ("7", checks.jump_process_limits),
    ("8", checks.diffusion_limit_check),
    ("9", checks.quadratic_bounds),
    ("10", checks.scale_invariance),
    ("11", checks.reproducibility),
]


@pytest.mark.parametrize("key,check", CRITERIA, ids=[f"criterion-{k}" for k, _ in CRITERIA])
def test_criterion(key, check, capsys):
    result = check()
    with capsys.disabled():
        print(f"\n{result.line()} ({result.seconds:.1f} s)")
    assert result.key == key
    assert result.passed, result.line()


if __name__ == "__main__":
    failed = 0
    for _, check in CRITERIA:
        r = check()
        print(f"{'pass' if r.passed else 'FAIL'}  {r.line()} ({r.seconds:.1f} s)", flush=True)
        failed += not r.passed
    sys.exit(1 if failed else 0)
