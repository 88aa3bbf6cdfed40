"""``bpcm`` command-line front end.

Exit codes: 0 success, 1 usage, 2 I/O, 3 parse/validation, 4 conflict,
5 audit findings.  Set ``BPCM_CLOCK`` to an RFC 3339 instant to freeze the
clock; ids are then derived deterministically from the inputs.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from . import __version__
from .clock import Clock, IdFactory, SeededIds, fixed_clock, parse_timestamp, random_ids, utc_now
from .codec import dumps_set, loads_set
from .diff import DiffRequest, diff
from .errors import (
    BpmnError,
    CodecError,
    ConflictError,
    CorruptJournal,
    DuplicateRecordId,
    InvalidRecord,
    NothingToRevert,
    PatchError,
    UnknownVersion,
    VersionMismatch,
)
from .journal import Journal
from .model import parse_bpmn, serialize_bpmn
from .ontology import export_journal
from .patch import apply, invert
from .taxonomy import Provenance

CLOCK_ENV = "BPCM_CLOCK"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_PARSE = 3
EXIT_CONFLICT = 4
EXIT_AUDIT = 5


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit with 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def runtime(*seed_parts: bytes) -> Tuple[Clock, IdFactory]:
    """Clock and id factory honouring the ``BPCM_CLOCK`` override."""
    fixed = os.environ.get(CLOCK_ENV)
    if not fixed:
        return utc_now, random_ids
    try:
        instant = parse_timestamp(fixed)
    except ValueError as exc:
        raise UsageError(f"{CLOCK_ENV}={fixed!r} is not an RFC 3339 instant") from exc
    seed = hashlib.sha256(b"\0".join(seed_parts)).digest()
    return fixed_clock(instant), SeededIds(seed)


def _read(path: str) -> bytes:
    return Path(path).read_bytes()


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _provenance(args: argparse.Namespace) -> Provenance:
    return Provenance(args.agent, args.cause, args.desc or "")


# --- commands ---------------------------------------------------------------------


def cmd_diff(args: argparse.Namespace) -> int:
    old_bytes, new_bytes = _read(args.old), _read(args.new)
    old, new = parse_bpmn(old_bytes), parse_bpmn(new_bytes)
    prov = _provenance(args)
    clock, ids = runtime(b"diff", old_bytes, new_bytes, repr(prov).encode(), args.base.encode())
    try:
        request = DiffRequest(old, new, prov, clock=clock, ids=ids, base_version=args.base)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _emit(dumps_set(diff(request)), args.out)
    return EXIT_OK


def cmd_apply(args: argparse.Namespace) -> int:
    change_set = loads_set(_read(args.set).decode("utf-8"))
    model = parse_bpmn(_read(args.model))
    _emit(serialize_bpmn(apply(change_set, model)), args.out)
    return EXIT_OK


def cmd_invert(args: argparse.Namespace) -> int:
    raw = _read(args.set)
    change_set = loads_set(raw.decode("utf-8"))
    prov = _provenance(args) if args.agent else None
    if prov is not None and not prov.cause:
        prov = Provenance(prov.agent_name, f"revert of {change_set.set_id}", prov.description)
    clock, ids = runtime(b"invert", raw, repr(prov).encode())
    _emit(dumps_set(invert(change_set, provenance=prov, clock=clock, ids=ids)), args.out)
    return EXIT_OK


def _open_journal(path: str, *seed: bytes) -> Tuple[Journal, IdFactory]:
    entries = Path(path) / "entries.jsonl"
    seed_bytes = entries.read_bytes() if entries.exists() else b""
    clock, ids = runtime(*seed, seed_bytes)
    return Journal.open(path, clock=clock), ids


def cmd_journal_init(args: argparse.Namespace) -> int:
    baseline = parse_bpmn(_read(args.baseline))
    agents: List[str] = []
    for item in args.acl or []:
        agents += [a for a in item.split(",") if a.strip()]
    clock, _ = runtime(b"init")
    Journal.init(args.journal, baseline, agents, clock=clock)
    return EXIT_OK


def cmd_journal_commit(args: argparse.Namespace) -> int:
    change_set = loads_set(_read(args.set).decode("utf-8"))
    journal, _ = _open_journal(args.journal, b"commit")
    committed = journal.commit(change_set)
    print(f"{committed.result_version}\t{committed.set_id}\t{len(committed)}")
    return EXIT_OK


def format_log(journal: Journal) -> str:
    lines = ["version\tset_id\tprovenance\ttimestamp\trecords"]
    for row in journal.log():
        lines.append(f"{row.version}\t{row.set_id}\t{row.provenance}\t{row.timestamp}\t{row.record_count}")
    return "\n".join(lines) + "\n"


def format_trace(journal: Journal, element_id: str) -> str:
    lines = ["version\trecord_id\tcategory\tagent\tcause\ttimestamp"]
    for hit in journal.trace(element_id).hits:
        p = hit.provenance
        lines.append(f"{hit.version}\t{hit.record_id}\t{hit.category}\t{p.agent_name}\t{p.cause}\t{hit.timestamp}")
    return "\n".join(lines) + "\n"


def cmd_journal_log(args: argparse.Namespace) -> int:
    journal, _ = _open_journal(args.journal)
    sys.stdout.write(format_log(journal))
    return EXIT_OK


def cmd_journal_show(args: argparse.Namespace) -> int:
    journal, _ = _open_journal(args.journal)
    tag = args.version or journal.head_version
    _emit(serialize_bpmn(journal.version(tag)), args.out)
    return EXIT_OK


def cmd_journal_trace(args: argparse.Namespace) -> int:
    journal, _ = _open_journal(args.journal)
    sys.stdout.write(format_trace(journal, args.element_id))
    return EXIT_OK


def cmd_journal_verify(args: argparse.Namespace) -> int:
    journal, _ = _open_journal(args.journal)
    findings = journal.verify()
    for f in findings:
        print(f)
    if findings:
        print(f"{len(findings)} finding(s)", file=sys.stderr)
        return EXIT_AUDIT
    return EXIT_OK


def cmd_journal_revert(args: argparse.Namespace) -> int:
    cause = args.cause or f"revert to {args.to}"
    prov = Provenance(args.agent, cause, args.desc or "")
    journal, ids = _open_journal(args.journal, b"revert", args.to.encode(), repr(prov).encode())
    committed = journal.revert_to(args.to, prov, ids=ids)
    print(f"{committed.result_version}\t{committed.set_id}\t{len(committed)}")
    return EXIT_OK


def cmd_journal_export(args: argparse.Namespace) -> int:
    journal, _ = _open_journal(args.journal)
    _emit(export_journal(journal), args.out)
    return EXIT_OK


# --- argument parsing -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bpcm", description="Capture, store and replay BPMN process changes.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def provenance_flags(p: argparse.ArgumentParser, required: bool) -> None:
        p.add_argument("--agent", required=required, help="who makes the change")
        p.add_argument("--cause", required=required, help="why the change is made")
        p.add_argument("--desc", default="", help="free-text description of the change")

    p = sub.add_parser("diff", help="compute the change set between two BPMN files")
    p.add_argument("old")
    p.add_argument("new")
    provenance_flags(p, required=True)
    p.add_argument("--base", default="v0", help="version tag the change set is based on")
    p.add_argument("--out")
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("apply", help="apply a change set to a BPMN file")
    p.add_argument("set")
    p.add_argument("model")
    p.add_argument("--out")
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("invert", help="write the inverse of a change set")
    p.add_argument("set")
    provenance_flags(p, required=False)
    p.add_argument("--out")
    p.set_defaults(func=cmd_invert)

    j = sub.add_parser("journal", help="manage a change journal directory")
    jsub = j.add_subparsers(dest="journal_command", required=True, parser_class=_Parser)

    p = jsub.add_parser("init")
    p.add_argument("journal")
    p.add_argument("--baseline", required=True)
    p.add_argument("--acl", action="append", help="authorized agent(s); repeat or comma-separate")
    p.set_defaults(func=cmd_journal_init)

    p = jsub.add_parser("commit")
    p.add_argument("journal")
    p.add_argument("set")
    p.set_defaults(func=cmd_journal_commit)

    p = jsub.add_parser("log")
    p.add_argument("journal")
    p.set_defaults(func=cmd_journal_log)

    p = jsub.add_parser("show")
    p.add_argument("journal")
    p.add_argument("--version", dest="version")
    p.add_argument("--out")
    p.set_defaults(func=cmd_journal_show)

    p = jsub.add_parser("trace")
    p.add_argument("journal")
    p.add_argument("element_id")
    p.set_defaults(func=cmd_journal_trace)

    p = jsub.add_parser("verify")
    p.add_argument("journal")
    p.set_defaults(func=cmd_journal_verify)

    p = jsub.add_parser("revert")
    p.add_argument("journal")
    p.add_argument("--to", required=True)
    p.add_argument("--agent", required=True)
    p.add_argument("--cause")
    p.add_argument("--desc", default="")
    p.set_defaults(func=cmd_journal_revert)

    p = jsub.add_parser("export")
    p.add_argument("journal")
    p.add_argument("--out")
    p.set_defaults(func=cmd_journal_export)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # --help, --version and usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"bpcm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UnknownVersion, NothingToRevert) as exc:
        print(f"bpcm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BpmnError, CodecError, InvalidRecord) as exc:
        print(f"bpcm: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConflictError as exc:
        print(
            f"bpcm: conflict: record {exc.record_index} on {exc.element_id!r}: {exc.reason}; "
            f"expected {exc.expected!r}, found {exc.found!r}",
            file=sys.stderr,
        )
        return EXIT_CONFLICT
    except (VersionMismatch, DuplicateRecordId, PatchError) as exc:
        print(f"bpcm: conflict: {exc}", file=sys.stderr)
        return EXIT_CONFLICT
    except CorruptJournal as exc:
        print(f"bpcm: journal failed audit: {exc}", file=sys.stderr)
        return EXIT_AUDIT
    except (OSError, UnicodeDecodeError) as exc:
        print(f"bpcm: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
