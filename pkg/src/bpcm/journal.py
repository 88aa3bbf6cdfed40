"""Append-only, hash-chained journal of change sets.

On disk a journal is a directory::

    baseline.bpmn    canonical BPMN of version v0
    acl.txt          authorized agent names, one per line
    entries.jsonl    one committed change set per line (see FORMATS.md)
    head.bpmn        cache: canonical BPMN of the head version
    head.sha256      cache: "<tag> <sha256 of head.bpmn>"

The two ``head.*`` files are caches; deleting them loses nothing because the
head is always recomputed by replaying ``entries.jsonl`` over the baseline.
"""

from __future__ import annotations

import fcntl
import hashlib
import json
import os
from contextlib import contextmanager
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Union

from .clock import Clock, IdFactory, format_timestamp, parse_timestamp, random_ids, utc_now
from .codec import canonical_json, decode_set, encode_set
from .diff import next_version
from .errors import (
    BpmnError,
    CodecError,
    CorruptJournal,
    DuplicateRecordId,
    InvalidRecord,
    NothingToRevert,
    PatchError,
    UnknownVersion,
    VersionMismatch,
)
from .model import ProcessModel, parse_bpmn, serialize_bpmn
from .patch import apply, invert
from .taxonomy import ChangeSet, Provenance, validate_provenance, validate_record

BASELINE_FILE = "baseline.bpmn"
ACL_FILE = "acl.txt"
ENTRIES_FILE = "entries.jsonl"
HEAD_FILE = "head.bpmn"
HEAD_DIGEST_FILE = "head.sha256"
LOCK_FILE = ".lock"
CACHE_FILES = (HEAD_FILE, HEAD_DIGEST_FILE)


def sha256_hex(data: Union[str, bytes]) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def entry_digest(entry: dict) -> str:
    """SHA-256 over the canonical JSON of an entry with its ``digest`` key removed."""
    body = {k: v for k, v in entry.items() if k != "digest"}
    return sha256_hex(canonical_json(body))


def version_index(tag: str) -> int:
    if not isinstance(tag, str) or not tag.startswith("v") or not tag[1:].isdigit():
        raise UnknownVersion(str(tag))
    return int(tag[1:])


@dataclass(frozen=True)
class JournalEntry:
    change_set: ChangeSet
    committed_at: str
    prev_digest: str
    digest: str

    @property
    def version(self) -> str:
        return self.change_set.result_version


@dataclass(frozen=True)
class TraceHit:
    version: str
    record_id: str
    category: str
    provenance: Provenance
    timestamp: str


@dataclass(frozen=True)
class TraceResult:
    element_id: str
    hits: List[TraceHit]


@dataclass(frozen=True)
class LogRow:
    version: str
    set_id: str
    provenance: str
    timestamp: str
    record_count: int


@dataclass(frozen=True)
class UnauthorizedAgent:
    version: str
    record_id: str
    agent_name: str

    def __str__(self) -> str:
        return f"UnauthorizedAgent {self.version} record={self.record_id} agent={self.agent_name}"


@dataclass(frozen=True)
class ChainBroken:
    version: str
    detail: str

    def __str__(self) -> str:
        return f"ChainBroken {self.version}: {self.detail}"


@dataclass(frozen=True)
class ReplayMismatch:
    version: str
    detail: str

    def __str__(self) -> str:
        return f"ReplayMismatch {self.version}: {self.detail}"


Finding = Union[UnauthorizedAgent, ChainBroken, ReplayMismatch]


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


class Journal:
    """Handle on a journal directory.

    A handle holds an in-memory snapshot of the entries read at :meth:`open`
    time; :meth:`commit` re-reads the file under an exclusive lock before
    appending.
    """

    def __init__(self, path: Union[str, Path], *, clock: Clock = utc_now) -> None:
        self.path = Path(path)
        self.clock = clock
        self._cache: Dict[int, ProcessModel] = {}
        self._load()

    # --- construction -----------------------------------------------------------

    @classmethod
    def init(
        cls,
        path: Union[str, Path],
        baseline: ProcessModel,
        acl: Iterable[str] = (),
        *,
        clock: Clock = utc_now,
    ) -> "Journal":
        root = Path(path)
        root.mkdir(parents=True, exist_ok=True)
        if (root / ENTRIES_FILE).exists():
            raise FileExistsError(f"{root} already holds a journal")
        agents = sorted({a.strip() for a in acl if a.strip()})
        _atomic_write(root / BASELINE_FILE, serialize_bpmn(baseline).encode("utf-8"))
        _atomic_write(root / ACL_FILE, "".join(a + "\n" for a in agents).encode("utf-8"))
        _atomic_write(root / ENTRIES_FILE, b"")
        return cls(root, clock=clock)

    @classmethod
    def open(cls, path: Union[str, Path], *, clock: Clock = utc_now) -> "Journal":
        root = Path(path)
        for name in (BASELINE_FILE, ACL_FILE, ENTRIES_FILE):
            if not (root / name).is_file():
                raise FileNotFoundError(f"{root / name} is missing; not a journal directory")
        return cls(root, clock=clock)

    def _load(self) -> None:
        self._baseline_bytes = (self.path / BASELINE_FILE).read_bytes()
        self.baseline = parse_bpmn(self._baseline_bytes)
        acl_text = (self.path / ACL_FILE).read_text(encoding="utf-8")
        self.acl = frozenset(line.strip() for line in acl_text.splitlines() if line.strip())
        raw = (self.path / ENTRIES_FILE).read_bytes()
        self._lines = raw.decode("utf-8", errors="replace").splitlines()
        self._entries: Optional[List[JournalEntry]] = None
        self._load_error: Optional[str] = None
        entries = []
        for k, line in enumerate(self._lines):
            try:
                obj = json.loads(line)
                entries.append(
                    JournalEntry(decode_set(obj), obj["committed_at"], obj["prev_digest"], obj["digest"])
                )
            except (ValueError, KeyError, TypeError, CodecError) as exc:
                self._load_error = f"entry line {k + 1} unreadable: {exc}"
                break
        else:
            self._entries = entries
        self._cache = {0: self.baseline}

    @property
    def genesis_digest(self) -> str:
        return sha256_hex(self._baseline_bytes)

    # --- reading ----------------------------------------------------------------

    @property
    def entries(self) -> List[JournalEntry]:
        if self._entries is None:
            raise CorruptJournal(self._load_error or "journal entries unreadable")
        return list(self._entries)

    @property
    def head_version(self) -> str:
        return f"v{len(self.entries)}"

    def version(self, tag: str, *, use_cache: bool = True) -> ProcessModel:
        """The model at version ``tag``, i.e. the baseline with entries ``0..k-1`` applied."""
        k = version_index(tag)
        entries = self.entries
        if k > len(entries):
            raise UnknownVersion(tag)
        if not use_cache:
            model = self.baseline
            for e in entries[:k]:
                model = apply(e.change_set, model)
            return model
        start = max(i for i in self._cache if i <= k)
        model = self._cache[start]
        for i in range(start, k):
            model = apply(entries[i].change_set, model)
            self._cache[i + 1] = model
        return model

    def head(self) -> ProcessModel:
        return self.version(self.head_version)

    def log(self) -> List[LogRow]:
        rows = []
        for e in self.entries:
            cs = e.change_set
            seen: List[str] = []
            for r in cs.records:
                s = f"{r.provenance.agent_name}: {r.provenance.cause}"
                if s not in seen:
                    seen.append(s)
            rows.append(LogRow(cs.result_version, cs.set_id, "; ".join(seen), e.committed_at, len(cs)))
        return rows

    def trace(self, element_id: str) -> TraceResult:
        """Every record, in version order, whose subject is ``element_id``."""
        hits = []
        for e in self.entries:
            for r in e.change_set.records:
                if r.element_id == element_id:
                    hits.append(
                        TraceHit(e.version, r.record_id, r.change.tag, r.provenance, format_timestamp(r.timestamp))
                    )
        return TraceResult(element_id, hits)

    # --- writing ----------------------------------------------------------------

    @contextmanager
    def _locked(self) -> Iterator[None]:
        with open(self.path / LOCK_FILE, "a+b") as fh:
            fcntl.flock(fh.fileno(), fcntl.LOCK_EX)
            try:
                yield
            finally:
                fcntl.flock(fh.fileno(), fcntl.LOCK_UN)

    def commit(self, change_set: ChangeSet) -> ChangeSet:
        """Append ``change_set`` to the journal and return it as committed.

        The set must be based on the current head and apply cleanly to it.
        Agents outside the ACL are accepted here and reported by :meth:`verify`.
        """
        with self._locked():
            self._load()
            entries = self.entries
            head = self.head_version
            if change_set.base_version != head:
                raise VersionMismatch(head, change_set.base_version)
            problems = [v for r in change_set.records for v in validate_record(r)]
            if problems:
                raise InvalidRecord(problems)
            known = {r.record_id for e in entries for r in e.change_set.records}
            for r in change_set.records:
                if r.record_id in known:
                    raise DuplicateRecordId(r.record_id)
                known.add(r.record_id)
            new_head = apply(change_set, self.head())
            committed = replace(change_set, result_version=next_version(head))
            prev = entries[-1].digest if entries else self.genesis_digest
            obj = encode_set(committed, format_timestamp(self.clock()), prev, None)
            obj["digest"] = entry_digest(obj)
            line = canonical_json(obj) + "\n"
            existing = (self.path / ENTRIES_FILE).read_bytes()
            _atomic_write(self.path / ENTRIES_FILE, existing + line.encode("utf-8"))
            self._write_head_cache(committed.result_version, new_head)
            self._load()
            self._cache[len(entries) + 1] = new_head
            return committed

    def _write_head_cache(self, tag: str, model: ProcessModel) -> None:
        text = serialize_bpmn(model)
        _atomic_write(self.path / HEAD_FILE, text.encode("utf-8"))
        _atomic_write(self.path / HEAD_DIGEST_FILE, f"{tag} {sha256_hex(text)}\n".encode("utf-8"))

    def revert_to(
        self, tag: str, provenance: Provenance, *, ids: IdFactory = random_ids
    ) -> ChangeSet:
        """Commit one compensating set whose result equals ``version(tag)``.

        History is never rewritten; the revert is itself a new entry.
        """
        k = version_index(tag)
        entries = self.entries
        if k > len(entries):
            raise UnknownVersion(tag)
        if k == len(entries):
            raise NothingToRevert(f"{tag} is already the head version")
        problems = validate_provenance(provenance)
        if problems:
            raise InvalidRecord(problems)
        ts = self.clock()
        records = []
        for e in reversed(entries[k:]):
            inverse = invert(e.change_set, provenance=provenance, clock=lambda: ts, ids=ids)
            records.extend(inverse.records)
        head = self.head_version
        compensating = ChangeSet(ids(ts), head, next_version(head), tuple(records))
        return self.commit(compensating)

    # --- audit ------------------------------------------------------------------

    def verify(self) -> List[Finding]:
        """Audit the on-disk journal; an empty list means no findings."""
        try:
            self._load()
        except BpmnError as exc:
            return [ReplayMismatch("v0", f"baseline unreadable: {exc}")]
        findings: List[Finding] = []
        prev_digest = self.genesis_digest
        prev_time = None
        decoded: List[JournalEntry] = []
        seen_ids: set = set()
        readable = True
        for k, line in enumerate(self._lines):
            tag = f"v{k + 1}"
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("entry is not a JSON object")
            except ValueError as exc:
                findings.append(ReplayMismatch(tag, f"entry line unreadable: {exc}"))
                readable = False
                continue
            if obj.get("digest") != entry_digest(obj):
                findings.append(ReplayMismatch(tag, "entry digest does not match its content"))
            if obj.get("prev_digest") != prev_digest:
                findings.append(ReplayMismatch(tag, "entry does not chain to the previous digest"))
            prev_digest = obj.get("digest")
            if obj.get("base_version") != f"v{k}" or obj.get("result_version") != tag:
                findings.append(
                    ChainBroken(
                        tag,
                        f"version tags {obj.get('base_version')!r}->{obj.get('result_version')!r}, "
                        f"expected 'v{k}'->{tag!r}",
                    )
                )
            try:
                cs = decode_set(obj)
                committed = parse_timestamp(obj["committed_at"])
            except (CodecError, KeyError, TypeError, ValueError) as exc:
                findings.append(ReplayMismatch(tag, f"entry does not decode: {exc}"))
                readable = False
                continue
            if prev_time is not None and committed < prev_time:
                findings.append(ChainBroken(tag, "commit timestamp precedes the previous entry"))
            prev_time = committed
            for r in cs.records:
                if r.record_id in seen_ids:
                    findings.append(ChainBroken(tag, f"record id {r.record_id} repeated"))
                seen_ids.add(r.record_id)
                if r.provenance.agent_name not in self.acl:
                    findings.append(UnauthorizedAgent(tag, r.record_id, r.provenance.agent_name))
            decoded.append(JournalEntry(cs, obj["committed_at"], obj.get("prev_digest"), obj.get("digest")))
        if readable:
            findings.extend(self._verify_replay(decoded))
        return findings

    def _verify_replay(self, entries: List[JournalEntry]) -> List[Finding]:
        model = self.baseline
        for e in entries:
            try:
                model = apply(e.change_set, model)
            except PatchError as exc:
                return [ReplayMismatch(e.version, f"replay conflict: {exc}")]
        head_tag = f"v{len(entries)}"
        text = serialize_bpmn(model)
        out: List[Finding] = []
        digest_file = self.path / HEAD_DIGEST_FILE
        if digest_file.exists():
            parts = digest_file.read_text(encoding="utf-8").split()
            if parts != [head_tag, sha256_hex(text)]:
                out.append(ReplayMismatch(head_tag, "stored head digest disagrees with replay"))
        head_file = self.path / HEAD_FILE
        if head_file.exists() and head_file.read_bytes() != text.encode("utf-8"):
            out.append(ReplayMismatch(head_tag, "cached head model disagrees with replay"))
        return out

    def drop_caches(self) -> None:
        """Delete the on-disk head caches and forget in-memory versions."""
        for name in CACHE_FILES:
            try:
                (self.path / name).unlink()
            except FileNotFoundError:
                pass
        self._cache = {0: self.baseline}
