"""Walk through the Create Quote change history with the library API.

Usage: python3 demos/create_quote.py [WORKDIR]

Builds a journal of seven commits on the Create Quote process, then shows the
log, the per-element traces, an audit, a revert and the ontology export.
"""

from __future__ import annotations

import sys
import tempfile
from datetime import datetime, timedelta, timezone
from pathlib import Path

from bpcm import export_journal, serialize_bpmn
from bpcm.clock import SeededIds
from bpcm.samples import QUOTE_SCENARIO, build_quote_journal
from bpcm.taxonomy import Provenance


def ticking_clock(start: datetime):
    state = {"t": start}

    def now() -> datetime:
        state["t"] += timedelta(minutes=5)
        return state["t"]

    return now


def main(workdir: Path) -> None:
    clock = ticking_clock(datetime(2024, 6, 1, 9, 0, tzinfo=timezone.utc))
    ids = SeededIds(b"create-quote-demo")
    journal = build_quote_journal(workdir / "quote", clock=clock, ids=ids)

    print("== scenario steps")
    for k, step in enumerate(QUOTE_SCENARIO, 1):
        print(f"  v{k}: {step.agent:5} {step.cause}")

    print("\n== log")
    for row in journal.log():
        print(f"  {row.version:3} {row.timestamp}  {row.provenance}")

    for element in ("ut1", "st1"):
        print(f"\n== trace {element}")
        for hit in journal.trace(element).hits:
            print(f"  {hit.version:3} {hit.category:33} {hit.provenance.agent_name}: {hit.provenance.cause}")

    print("\n== verify:", journal.verify() or "no findings")

    print("\n== head service task")
    for line in serialize_bpmn(journal.head()).splitlines():
        if "st1" in line or "activiti:field" in line:
            print("  " + line.strip())

    journal.revert_to("v0", Provenance("alice", "roll back the quote experiment"), ids=ids)
    same = serialize_bpmn(journal.head()).encode() == (journal.path / "baseline.bpmn").read_bytes()
    print(f"\n== revert to v0 -> {journal.head_version}, head equals baseline: {same}")

    text = export_journal(journal)
    out = workdir / "quote.nt"
    out.write_text(text, encoding="utf-8")
    print(f"\n== ontology export: {len(text.splitlines())} triples written to {out}")
    for line in text.splitlines():
        if "/record/" in line and "Modification_in_UserTask" in line:
            print("  " + line)
            break


if __name__ == "__main__":
    if len(sys.argv) > 1:
        target = Path(sys.argv[1])
        target.mkdir(parents=True, exist_ok=True)
        main(target)
    else:
        with tempfile.TemporaryDirectory() as tmp:
            main(Path(tmp))
