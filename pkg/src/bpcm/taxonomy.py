"""Typed change records following the change-management taxonomy.

A :class:`ChangeRecord` couples provenance (who, why, what), a timestamp and
one :class:`ConstructChange`.  Construct changes fall in exactly one of nine
categories; task-level changes further name one of eleven task kinds.  Every
modification stores both the OLD and the NEW value so that records can be
inverted without consulting the model.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import ClassVar, FrozenSet, List, Optional, Tuple, Union

from .clock import normalize_timestamp
from .model import (
    DATA_KINDS,
    EVENT_KINDS,
    GATEWAY_KINDS,
    TASK_KINDS,
    CallType,
    FieldInjection,
    FlowNode,
    NodeKind,
    SequenceFlow,
    ValueKind,
)


class Category(str, Enum):
    DECLARATION = "DeclarationChange"
    PROCESS_INITIALIZATION = "ProcessInitializationChange"
    SEQUENCE_FLOW = "SequenceFlowChange"
    TASK_LEVEL = "TaskLevelChange"
    CUSTOM_EXTENSION = "CustomExtensionChange"
    DATA_OBJECT = "DataObjectChange"
    GATEWAYS = "GatewaysChange"
    TRANSACTION_CONCURRENCY = "TransactionConcurrencyChange"
    EVENT = "EventChange"

    def __str__(self) -> str:
        return self.value


# Categories whose payload has no model semantics; apply refuses them.
PLACEHOLDER_CATEGORIES = frozenset(
    {Category.DECLARATION, Category.CUSTOM_EXTENSION, Category.TRANSACTION_CONCURRENCY}
)


def classify(kind: NodeKind) -> Category:
    kind = NodeKind(kind)
    if kind in TASK_KINDS:
        return Category.TASK_LEVEL
    if kind in GATEWAY_KINDS:
        return Category.GATEWAYS
    if kind in EVENT_KINDS:
        return Category.EVENT
    if kind in DATA_KINDS:
        return Category.DATA_OBJECT
    raise AssertionError(f"unclassified node kind {kind}")


@dataclass(frozen=True)
class Provenance:
    agent_name: str
    cause: str
    description: str = ""


# --- user task modifications ------------------------------------------------------


@dataclass(frozen=True)
class _OptionalChange:
    old: Optional[str]
    new: Optional[str]
    field: ClassVar[str] = ""


@dataclass(frozen=True)
class AssigneeChange(_OptionalChange):
    field: ClassVar[str] = "assignee"


@dataclass(frozen=True)
class DueDateChange(_OptionalChange):
    field: ClassVar[str] = "due_date"


@dataclass(frozen=True)
class DescriptionChange(_OptionalChange):
    field: ClassVar[str] = "description"


@dataclass(frozen=True)
class FormKeyChange(_OptionalChange):
    field: ClassVar[str] = "form_key"


@dataclass(frozen=True)
class _SetChange:
    old: FrozenSet[str]
    new: FrozenSet[str]
    field: ClassVar[str] = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "old", frozenset(self.old))
        object.__setattr__(self, "new", frozenset(self.new))


@dataclass(frozen=True)
class CandidateUsersChange(_SetChange):
    field: ClassVar[str] = "candidate_users"


@dataclass(frozen=True)
class CandidateGroupsChange(_SetChange):
    field: ClassVar[str] = "candidate_groups"


UserTaskModification = Union[
    AssigneeChange,
    DueDateChange,
    DescriptionChange,
    CandidateUsersChange,
    CandidateGroupsChange,
    FormKeyChange,
]
# Fixed per-field emission order used by the differ.
USER_TASK_MODIFICATIONS: Tuple[type, ...] = (
    AssigneeChange,
    CandidateUsersChange,
    CandidateGroupsChange,
    DueDateChange,
    DescriptionChange,
    FormKeyChange,
)


# --- Java service task modifications ----------------------------------------------


@dataclass(frozen=True)
class CallTypeChange:
    """Change of invocation method and/or target.

    A pure endpoint shift keeps ``old_call == new_call`` and changes the target.
    """

    old_call: CallType
    old_target: str
    new_call: CallType
    new_target: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "old_call", CallType(self.old_call))
        object.__setattr__(self, "new_call", CallType(self.new_call))


@dataclass(frozen=True)
class FieldInjectionAdded:
    injection: FieldInjection


@dataclass(frozen=True)
class FieldInjectionRemoved:
    injection: FieldInjection


@dataclass(frozen=True)
class FieldInjectionModified:
    field_name: str
    old_kind: ValueKind
    old_value: str
    new_kind: ValueKind
    new_value: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "old_kind", ValueKind(self.old_kind))
        object.__setattr__(self, "new_kind", ValueKind(self.new_kind))


@dataclass(frozen=True)
class ResultVariableChange:
    old: Optional[str]
    new: Optional[str]


JavaServiceTaskModification = Union[
    CallTypeChange,
    FieldInjectionAdded,
    FieldInjectionRemoved,
    FieldInjectionModified,
    ResultVariableChange,
]
JAVA_SERVICE_TASK_MODIFICATIONS: Tuple[type, ...] = (
    CallTypeChange,
    FieldInjectionAdded,
    FieldInjectionRemoved,
    FieldInjectionModified,
    ResultVariableChange,
)


# --- task operations --------------------------------------------------------------


@dataclass(frozen=True)
class Add:
    node: FlowNode


@dataclass(frozen=True)
class Delete:
    node: FlowNode


@dataclass(frozen=True)
class Rename:
    old_name: Optional[str]
    new_name: Optional[str]


@dataclass(frozen=True)
class ModifyUserTask:
    modification: UserTaskModification


@dataclass(frozen=True)
class ModifyJavaServiceTask:
    modification: JavaServiceTaskModification


@dataclass(frozen=True)
class ModifyGeneric:
    attribute: str
    old: Optional[str]
    new: Optional[str]


TaskOp = Union[Add, Delete, Rename, ModifyUserTask, ModifyJavaServiceTask, ModifyGeneric]
TASK_OPS: Tuple[type, ...] = (Add, Delete, Rename, ModifyUserTask, ModifyJavaServiceTask, ModifyGeneric)


@dataclass(frozen=True)
class TaskChange:
    task_kind: NodeKind
    element_id: str
    op: TaskOp

    def __post_init__(self) -> None:
        object.__setattr__(self, "task_kind", NodeKind(self.task_kind))
        if self.task_kind not in TASK_KINDS:
            raise TypeError(f"{self.task_kind} is not a task kind")


# --- sequence flows ---------------------------------------------------------------

FLOW_ATTRIBUTES = ("name", "source_ref", "target_ref", "condition_expression")


@dataclass(frozen=True)
class FlowAdded:
    flow: SequenceFlow

    @property
    def element_id(self) -> str:
        return self.flow.id


@dataclass(frozen=True)
class FlowRemoved:
    flow: SequenceFlow

    @property
    def element_id(self) -> str:
        return self.flow.id


@dataclass(frozen=True)
class FlowModified:
    flow_id: str
    attribute: str
    old: Optional[str]
    new: Optional[str]

    @property
    def element_id(self) -> str:
        return self.flow_id


FlowChange = Union[FlowAdded, FlowRemoved, FlowModified]
FLOW_CHANGES: Tuple[type, ...] = (FlowAdded, FlowRemoved, FlowModified)


# --- generic payloads -------------------------------------------------------------


@dataclass(frozen=True)
class GenericAdded:
    node: FlowNode


@dataclass(frozen=True)
class GenericRemoved:
    node: FlowNode


@dataclass(frozen=True)
class GenericModified:
    attribute: str
    old: Optional[str]
    new: Optional[str]


GenericOp = Union[GenericAdded, GenericRemoved, GenericModified]


@dataclass(frozen=True)
class GenericChange:
    element_id: str
    op: GenericOp


Payload = Union[TaskChange, FlowAdded, FlowRemoved, FlowModified, GenericChange]


@dataclass(frozen=True)
class ConstructChange:
    category: Category
    payload: Payload

    def __post_init__(self) -> None:
        object.__setattr__(self, "category", Category(self.category))
        if self.category is Category.TASK_LEVEL:
            ok = isinstance(self.payload, TaskChange)
        elif self.category is Category.SEQUENCE_FLOW:
            ok = isinstance(self.payload, FLOW_CHANGES)
        else:
            ok = isinstance(self.payload, GenericChange)
        if not ok:
            raise TypeError(f"{type(self.payload).__name__} is not a {self.category} payload")

    @property
    def element_id(self) -> str:
        return self.payload.element_id

    @property
    def tag(self) -> str:
        """Category label, refined by task kind for task-level changes."""
        if isinstance(self.payload, TaskChange):
            return f"{self.category}/{self.payload.task_kind}"
        return str(self.category)


@dataclass(frozen=True)
class ChangeRecord:
    record_id: str
    timestamp: datetime
    provenance: Provenance
    change: ConstructChange

    def __post_init__(self) -> None:
        object.__setattr__(self, "timestamp", normalize_timestamp(self.timestamp))

    @property
    def element_id(self) -> str:
        return self.change.element_id


@dataclass(frozen=True)
class ChangeSet:
    set_id: str
    base_version: str
    result_version: str
    records: Tuple[ChangeRecord, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))

    def __len__(self) -> int:
        return len(self.records)


def task_change(kind: NodeKind, element_id: str, op: TaskOp) -> ConstructChange:
    return ConstructChange(Category.TASK_LEVEL, TaskChange(kind, element_id, op))


def flow_change(payload: FlowChange) -> ConstructChange:
    return ConstructChange(Category.SEQUENCE_FLOW, payload)


def generic_change(category: Category, element_id: str, op: GenericOp) -> ConstructChange:
    return ConstructChange(category, GenericChange(element_id, op))


# --- validation -------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


def validate_provenance(prov: Provenance) -> List[Violation]:
    out = []
    if not prov.agent_name:
        out.append(Violation("EmptyAgentName", "provenance agent_name is empty"))
    if not prov.cause:
        out.append(Violation("EmptyCause", "provenance cause is empty"))
    return out


def _noop(old: object, new: object) -> List[Violation]:
    if old == new:
        return [Violation("NoOpModification", f"old and new values are both {old!r}")]
    return []


def _snapshot_checks(node: FlowNode, element_id: str) -> List[Violation]:
    if node.id != element_id:
        return [Violation("SnapshotMismatch", f"snapshot id {node.id!r} != element id {element_id!r}")]
    return []


def _task_violations(tc: TaskChange) -> List[Violation]:
    op = tc.op
    out: List[Violation] = []
    if isinstance(op, (Add, Delete)):
        out += _snapshot_checks(op.node, tc.element_id)
        if op.node.kind is not tc.task_kind:
            out.append(
                Violation("KindPayloadMismatch", f"snapshot kind {op.node.kind} != task kind {tc.task_kind}")
            )
    elif isinstance(op, Rename):
        out += _noop(op.old_name, op.new_name)
    elif isinstance(op, ModifyUserTask):
        if tc.task_kind is not NodeKind.USER_TASK:
            out.append(Violation("KindPayloadMismatch", f"user-task modification on {tc.task_kind}"))
        out += _noop(op.modification.old, op.modification.new)
    elif isinstance(op, ModifyJavaServiceTask):
        if tc.task_kind is not NodeKind.JAVA_SERVICE_TASK:
            out.append(Violation("KindPayloadMismatch", f"Java service modification on {tc.task_kind}"))
        m = op.modification
        if isinstance(m, CallTypeChange):
            out += _noop((m.old_call, m.old_target), (m.new_call, m.new_target))
            if not m.new_target or not m.old_target:
                out.append(Violation("EmptyTarget", "call target must be non-empty"))
        elif isinstance(m, FieldInjectionModified):
            out += _noop((m.old_kind, m.old_value), (m.new_kind, m.new_value))
        elif isinstance(m, ResultVariableChange):
            out += _noop(m.old, m.new)
    elif isinstance(op, ModifyGeneric):
        if tc.task_kind in (NodeKind.USER_TASK, NodeKind.JAVA_SERVICE_TASK):
            out.append(Violation("KindPayloadMismatch", f"generic modification on {tc.task_kind}"))
        out += _noop(op.old, op.new)
    return out


def _flow_violations(fc: FlowChange) -> List[Violation]:
    if isinstance(fc, FlowModified):
        out = []
        if fc.attribute not in FLOW_ATTRIBUTES:
            out.append(Violation("UnknownAttribute", f"flow attribute {fc.attribute!r}"))
        elif fc.attribute in ("source_ref", "target_ref") and (not fc.old or not fc.new):
            out.append(Violation("EmptyReference", f"{fc.attribute} must stay non-empty"))
        return out + _noop(fc.old, fc.new)
    return []


def _generic_violations(category: Category, gc: GenericChange) -> List[Violation]:
    op = gc.op
    out: List[Violation] = []
    if isinstance(op, (GenericAdded, GenericRemoved)):
        out += _snapshot_checks(op.node, gc.element_id)
        if category in PLACEHOLDER_CATEGORIES or category is Category.PROCESS_INITIALIZATION:
            out.append(Violation("KindPayloadMismatch", f"{category} cannot add or remove nodes"))
        elif classify(op.node.kind) is not category:
            out.append(
                Violation("KindPayloadMismatch", f"{op.node.kind} snapshot under {category}")
            )
    else:
        out += _noop(op.old, op.new)
        if category is Category.PROCESS_INITIALIZATION and op.attribute == "id" and not op.new:
            out.append(Violation("EmptyReference", "process id must stay non-empty"))
    return out


def validate_record(record: ChangeRecord) -> List[Violation]:
    """Return every invariant violation of ``record``; an empty list means valid."""
    out: List[Violation] = []
    if not record.record_id:
        out.append(Violation("EmptyRecordId", "record_id is empty"))
    out += validate_provenance(record.provenance)
    change = record.change
    if not change.element_id:
        out.append(Violation("EmptyElementId", "change names no element"))
    if isinstance(change.payload, TaskChange):
        out += _task_violations(change.payload)
    elif isinstance(change.payload, GenericChange):
        out += _generic_violations(change.category, change.payload)
    else:
        out += _flow_violations(change.payload)
    return out
