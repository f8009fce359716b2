"""Regenerate tests/golden/paper_suite.json after checking the battery against the oracles.

The battery is only written if the oracle-backed acceptance checks for the
worked examples pass, so a regression cannot silently become the new golden.
"""

from __future__ import annotations

import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
GOLDEN = ROOT / "tests" / "golden" / "paper_suite.json"


def main() -> int:
    check = subprocess.run([sys.executable, "-m", "pytest", "-q", "tests/test_acceptance.py", "-k", "criterion_2 or criterion_3 or criterion_4 or criterion_6 or criterion_9"], cwd=ROOT)
    if check.returncode != 0:
        print("oracle checks failed; golden file left unchanged", file=sys.stderr)
        return 1
    out = subprocess.run([sys.executable, "-m", "folia.cli", "paper-suite"], cwd=ROOT, capture_output=True, check=True).stdout
    GOLDEN.parent.mkdir(parents=True, exist_ok=True)
    GOLDEN.write_bytes(out)
    print(f"wrote {GOLDEN.relative_to(ROOT)} ({len(out)} bytes)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
