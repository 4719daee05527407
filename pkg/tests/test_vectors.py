"""The committed test-vector corpus matches current engine behavior.

The corpus is the contract between this package and the browser-side
engine port: both sides must reproduce it exactly. If an engine change is
intentional, regenerate with ``python tools/gen_vectors.py`` and re-run
the frontend suite.
"""

from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
VECTORS = ROOT / "testvectors"

FILES = ("evaluate.json", "conditions.json", "regex.json",
         "tutorial.json", "submissions.json")


def test_corpus_files_exist():
    for name in FILES:
        assert (VECTORS / name).exists(), f"missing {name}; run tools/gen_vectors.py"


def test_corpus_is_current(tmp_path):
    """Regenerating into a scratch tree produces identical bytes."""
    script = (ROOT / "tools" / "gen_vectors.py").read_text()
    script = script.replace('OUT = ROOT / "testvectors"',
                            f'OUT = Path({str(tmp_path)!r})')
    scratch = tmp_path / "gen.py"
    scratch.write_text(script)
    subprocess.run([sys.executable, str(scratch)], check=True,
                   cwd=ROOT, capture_output=True)
    for name in FILES:
        fresh = (tmp_path / name).read_bytes()
        committed = (VECTORS / name).read_bytes()
        assert fresh == committed, f"{name} is stale; run tools/gen_vectors.py"


def test_known_values_pinned():
    """A few externally known facts, so the corpus is not self-referential."""
    regex = json.loads((VECTORS / "regex.json").read_text())
    by_key = {(c["pattern"], c["value"]): c["match"] for c in regex["cases"]}
    assert by_key[(r"^[\w\d].*$", " 294")] is False
    assert by_key[(r"^[\w\d].*$", "294")] is True
    assert by_key[(r"^.{1,30}$", "x" * 31)] is False

    tutorial = json.loads((VECTORS / "tutorial.json").read_text())
    first = [c for c in tutorial["cases"] if c["question_id"] == "t01"]
    by_choice = {c["choice"]: c for c in first}
    assert by_choice["A"]["correct"] is True
    assert by_choice["A"]["explanation"] == "Correct"
    assert by_choice["B"]["correct"] is False
    assert by_choice["B"]["explanation"] == \
        'In our definition, the quantity should be "294".'

    subs = json.loads((VECTORS / "submissions.json").read_text())
    cases = {c["name"]: c for c in subs["cases"]}
    assert cases["accept-minimal"]["accepted"] is True
    lead = cases["leading-space-span"]
    assert lead["accepted"] is False
    assert [v["description"] for v in lead["violations"]] == \
        ["The quantity should only start with digits or letters."]
    assert cases["drop-duplicate-question"]["accepted"] is False

    conditions = json.loads((VECTORS / "conditions.json").read_text())
    by_name = {c["name"]: c for c in conditions["cases"]}
    assert ["typing", 0] not in by_name["covid-empty"]["enabled"]
    assert ["typing", 0] in by_name["covid-relevant"]["enabled"]
    assert by_name["covid-stale-typing"]["cleared"] == [["typing", 0]]
