"""Exception hierarchy shared by every bpcm module."""

from __future__ import annotations

from typing import Optional, Sequence


class BpcmError(Exception):
    """Base class for all errors raised by bpcm."""


# --- process model / BPMN parsing -------------------------------------------------


class BpmnError(BpcmError, ValueError):
    """A BPMN document or in-memory model could not be accepted."""


class MalformedXml(BpmnError):
    pass


class UnsupportedConstruct(BpmnError):
    """One or more elements (or attributes) fall outside the supported subset."""

    def __init__(self, tags: Sequence[str], detail: str = "") -> None:
        self.tags = tuple(tags)
        self.detail = detail
        msg = "unsupported construct(s): " + ", ".join(self.tags)
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class InvalidModel(BpmnError):
    pass


class DanglingFlowRef(InvalidModel):
    def __init__(self, flow_id: str, ref: str) -> None:
        self.flow_id = flow_id
        self.ref = ref
        super().__init__(f"sequence flow {flow_id!r} references unknown node {ref!r}")


class DuplicateId(InvalidModel):
    def __init__(self, element_id: str) -> None:
        self.element_id = element_id
        super().__init__(f"duplicate element id {element_id!r}")


# --- patching ---------------------------------------------------------------------


class PatchError(BpcmError):
    pass


class ConflictError(PatchError):
    """A change record does not match the model it is being applied to.

    ``record_index`` is the position of the first failing record in its set.
    """

    def __init__(
        self,
        record_index: int,
        element_id: str,
        expected: object,
        found: object,
        reason: str = "value mismatch",
        set_id: Optional[str] = None,
    ) -> None:
        self.record_index = record_index
        self.element_id = element_id
        self.expected = expected
        self.found = found
        self.reason = reason
        self.set_id = set_id
        super().__init__(self._message())

    def _message(self) -> str:
        where = f"record {self.record_index}"
        if self.set_id is not None:
            where = f"change set {self.set_id}, " + where
        return (
            f"{where} on {self.element_id!r}: {self.reason}; "
            f"expected {self.expected!r}, found {self.found!r}"
        )

    def in_set(self, set_id: str) -> "ConflictError":
        """Return a copy of this error tagged with the failing set's id."""
        err = type(self).__new__(type(self))
        err.__dict__.update(self.__dict__)
        err.set_id = set_id
        Exception.__init__(err, err._message())
        return err


class MissingElement(ConflictError):
    def __init__(self, record_index: int, element_id: str, expected: object = "present") -> None:
        super().__init__(record_index, element_id, expected, None, reason="element missing")


class DuplicateAdd(ConflictError):
    def __init__(self, record_index: int, element_id: str, found: object) -> None:
        super().__init__(record_index, element_id, None, found, reason="element already exists")


class UnsupportedChange(PatchError):
    """The record belongs to a category whose payload has no model semantics."""


class VersionChainBroken(PatchError):
    def __init__(self, expected: str, found: str) -> None:
        self.expected = expected
        self.found = found
        super().__init__(f"version chain broken: expected base {expected!r}, found {found!r}")


class InvalidRecord(BpcmError, ValueError):
    def __init__(self, violations: Sequence[object]) -> None:
        self.violations = tuple(violations)
        super().__init__("invalid change record: " + "; ".join(map(str, self.violations)))


# --- journal ----------------------------------------------------------------------


class JournalError(BpcmError):
    pass


class VersionMismatch(JournalError):
    def __init__(self, expected: str, found: str) -> None:
        self.expected = expected
        self.found = found
        super().__init__(f"change set is based on {found!r} but journal head is {expected!r}")


class UnknownVersion(JournalError, KeyError):
    def __init__(self, tag: str) -> None:
        self.tag = tag
        super().__init__(tag)

    def __str__(self) -> str:
        return f"unknown version {self.tag!r}"


class NothingToRevert(JournalError):
    pass


class CorruptJournal(JournalError):
    pass


class DuplicateRecordId(JournalError):
    def __init__(self, record_id: str) -> None:
        self.record_id = record_id
        super().__init__(f"record id {record_id!r} already present in journal")


class CodecError(BpcmError, ValueError):
    """A change-set or journal line does not follow the documented schema."""
