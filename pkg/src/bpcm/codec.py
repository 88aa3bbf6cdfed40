"""JSON encoding of nodes, flows, change records and change sets.

The encoding is shared by change-set files and journal entry lines (see
``FORMATS.md``).  :func:`canonical_json` is the byte-exact form that digests
are computed over.
"""

from __future__ import annotations

import json
from typing import Any, Dict, Optional

from .clock import format_timestamp, parse_timestamp
from .errors import CodecError
from .model import (
    CallType,
    FieldInjection,
    FlowNode,
    GenericDetail,
    JavaServiceTaskDetail,
    NodeKind,
    SequenceFlow,
    UserTaskDetail,
    ValueKind,
)
from .taxonomy import (
    Add,
    AssigneeChange,
    CallTypeChange,
    CandidateGroupsChange,
    CandidateUsersChange,
    Category,
    ChangeRecord,
    ChangeSet,
    ConstructChange,
    Delete,
    DescriptionChange,
    DueDateChange,
    FieldInjectionAdded,
    FieldInjectionModified,
    FieldInjectionRemoved,
    FlowAdded,
    FlowModified,
    FlowRemoved,
    FormKeyChange,
    GenericAdded,
    GenericChange,
    GenericModified,
    GenericRemoved,
    ModifyGeneric,
    ModifyJavaServiceTask,
    ModifyUserTask,
    Provenance,
    Rename,
    ResultVariableChange,
    TaskChange,
)

Json = Dict[str, Any]


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


# --- model elements ---------------------------------------------------------------


def encode_injection(f: FieldInjection) -> Json:
    return {"field_name": f.field_name, "value_kind": f.value_kind.value, "value": f.value}


def decode_injection(d: Json) -> FieldInjection:
    return FieldInjection(d["field_name"], ValueKind(d["value_kind"]), d["value"])


def encode_node(node: FlowNode) -> Json:
    d = node.detail
    if isinstance(d, UserTaskDetail):
        detail: Json = {
            "assignee": d.assignee,
            "candidate_users": sorted(d.candidate_users),
            "candidate_groups": sorted(d.candidate_groups),
            "due_date": d.due_date,
            "description": d.description,
            "form_key": d.form_key,
        }
    elif isinstance(d, JavaServiceTaskDetail):
        detail = {
            "call_type": d.call_type.value,
            "target": d.target,
            "field_injections": [encode_injection(f) for f in d.field_injections],
            "result_variable": d.result_variable,
        }
    else:
        detail = {"attributes": dict(sorted(d.attributes.items()))}
    return {"id": node.id, "name": node.name, "kind": node.kind.value, "detail": detail}


def decode_node(d: Json) -> FlowNode:
    kind = NodeKind(d["kind"])
    raw = d["detail"]
    if kind is NodeKind.USER_TASK:
        detail: Any = UserTaskDetail(
            assignee=raw["assignee"],
            candidate_users=frozenset(raw["candidate_users"]),
            candidate_groups=frozenset(raw["candidate_groups"]),
            due_date=raw["due_date"],
            description=raw["description"],
            form_key=raw["form_key"],
        )
    elif kind is NodeKind.JAVA_SERVICE_TASK:
        detail = JavaServiceTaskDetail(
            CallType(raw["call_type"]),
            raw["target"],
            tuple(decode_injection(f) for f in raw["field_injections"]),
            raw["result_variable"],
        )
    else:
        detail = GenericDetail(raw["attributes"])
    return FlowNode(d["id"], kind, detail, d["name"])


def encode_flow(f: SequenceFlow) -> Json:
    return {
        "id": f.id,
        "name": f.name,
        "source_ref": f.source_ref,
        "target_ref": f.target_ref,
        "condition_expression": f.condition_expression,
    }


def decode_flow(d: Json) -> SequenceFlow:
    return SequenceFlow(d["id"], d["source_ref"], d["target_ref"], d["name"], d["condition_expression"])


# --- modifications ----------------------------------------------------------------

_OPTIONAL_MODS = {
    "AssigneeChange": AssigneeChange,
    "DueDateChange": DueDateChange,
    "DescriptionChange": DescriptionChange,
    "FormKeyChange": FormKeyChange,
}
_SET_MODS = {"CandidateUsersChange": CandidateUsersChange, "CandidateGroupsChange": CandidateGroupsChange}


def encode_modification(m: Any) -> Json:
    name = type(m).__name__
    if name in _OPTIONAL_MODS or isinstance(m, ResultVariableChange):
        return {"type": name, "old": m.old, "new": m.new}
    if name in _SET_MODS:
        return {"type": name, "old": sorted(m.old), "new": sorted(m.new)}
    if isinstance(m, CallTypeChange):
        return {
            "type": name,
            "old_call": m.old_call.value,
            "old_target": m.old_target,
            "new_call": m.new_call.value,
            "new_target": m.new_target,
        }
    if isinstance(m, (FieldInjectionAdded, FieldInjectionRemoved)):
        return {"type": name, "injection": encode_injection(m.injection)}
    if isinstance(m, FieldInjectionModified):
        return {
            "type": name,
            "field_name": m.field_name,
            "old_kind": m.old_kind.value,
            "old_value": m.old_value,
            "new_kind": m.new_kind.value,
            "new_value": m.new_value,
        }
    raise TypeError(f"not a modification: {m!r}")


def decode_modification(d: Json) -> Any:
    t = d["type"]
    if t in _OPTIONAL_MODS:
        return _OPTIONAL_MODS[t](d["old"], d["new"])
    if t in _SET_MODS:
        return _SET_MODS[t](frozenset(d["old"]), frozenset(d["new"]))
    if t == "ResultVariableChange":
        return ResultVariableChange(d["old"], d["new"])
    if t == "CallTypeChange":
        return CallTypeChange(d["old_call"], d["old_target"], d["new_call"], d["new_target"])
    if t == "FieldInjectionAdded":
        return FieldInjectionAdded(decode_injection(d["injection"]))
    if t == "FieldInjectionRemoved":
        return FieldInjectionRemoved(decode_injection(d["injection"]))
    if t == "FieldInjectionModified":
        return FieldInjectionModified(
            d["field_name"], d["old_kind"], d["old_value"], d["new_kind"], d["new_value"]
        )
    raise CodecError(f"unknown modification type {t!r}")


# --- construct changes ------------------------------------------------------------


def _encode_task_op(op: Any) -> Json:
    if isinstance(op, (Add, Delete)):
        return {"type": type(op).__name__, "node": encode_node(op.node)}
    if isinstance(op, Rename):
        return {"type": "Rename", "old_name": op.old_name, "new_name": op.new_name}
    if isinstance(op, (ModifyUserTask, ModifyJavaServiceTask)):
        return {"type": type(op).__name__, "modification": encode_modification(op.modification)}
    if isinstance(op, ModifyGeneric):
        return {"type": "ModifyGeneric", "attribute": op.attribute, "old": op.old, "new": op.new}
    raise TypeError(f"not a task op: {op!r}")


def _decode_task_op(d: Json) -> Any:
    t = d["type"]
    if t == "Add":
        return Add(decode_node(d["node"]))
    if t == "Delete":
        return Delete(decode_node(d["node"]))
    if t == "Rename":
        return Rename(d["old_name"], d["new_name"])
    if t == "ModifyUserTask":
        return ModifyUserTask(decode_modification(d["modification"]))
    if t == "ModifyJavaServiceTask":
        return ModifyJavaServiceTask(decode_modification(d["modification"]))
    if t == "ModifyGeneric":
        return ModifyGeneric(d["attribute"], d["old"], d["new"])
    raise CodecError(f"unknown task op {t!r}")


def encode_payload(payload: Any) -> Json:
    if isinstance(payload, TaskChange):
        return {
            "type": "TaskChange",
            "task_kind": payload.task_kind.value,
            "element_id": payload.element_id,
            "op": _encode_task_op(payload.op),
        }
    if isinstance(payload, (FlowAdded, FlowRemoved)):
        return {"type": type(payload).__name__, "flow": encode_flow(payload.flow)}
    if isinstance(payload, FlowModified):
        return {
            "type": "FlowModified",
            "flow_id": payload.flow_id,
            "attribute": payload.attribute,
            "old": payload.old,
            "new": payload.new,
        }
    if isinstance(payload, GenericChange):
        op = payload.op
        if isinstance(op, GenericModified):
            enc: Json = {"type": "Modified", "attribute": op.attribute, "old": op.old, "new": op.new}
        else:
            enc = {"type": "Added" if isinstance(op, GenericAdded) else "Removed", "node": encode_node(op.node)}
        return {"type": "GenericChange", "element_id": payload.element_id, "op": enc}
    raise TypeError(f"not a payload: {payload!r}")


def decode_payload(d: Json) -> Any:
    t = d["type"]
    if t == "TaskChange":
        return TaskChange(NodeKind(d["task_kind"]), d["element_id"], _decode_task_op(d["op"]))
    if t == "FlowAdded":
        return FlowAdded(decode_flow(d["flow"]))
    if t == "FlowRemoved":
        return FlowRemoved(decode_flow(d["flow"]))
    if t == "FlowModified":
        return FlowModified(d["flow_id"], d["attribute"], d["old"], d["new"])
    if t == "GenericChange":
        op = d["op"]
        if op["type"] == "Modified":
            gop: Any = GenericModified(op["attribute"], op["old"], op["new"])
        elif op["type"] == "Added":
            gop = GenericAdded(decode_node(op["node"]))
        elif op["type"] == "Removed":
            gop = GenericRemoved(decode_node(op["node"]))
        else:
            raise CodecError(f"unknown generic op {op['type']!r}")
        return GenericChange(d["element_id"], gop)
    raise CodecError(f"unknown payload type {t!r}")


def encode_change(change: ConstructChange) -> Json:
    return {"category": change.category.value, "payload": encode_payload(change.payload)}


def decode_change(d: Json) -> ConstructChange:
    return ConstructChange(Category(d["category"]), decode_payload(d["payload"]))


def encode_provenance(p: Provenance) -> Json:
    return {"agent_name": p.agent_name, "cause": p.cause, "description": p.description}


def decode_provenance(d: Json) -> Provenance:
    return Provenance(d["agent_name"], d["cause"], d["description"])


def encode_record(r: ChangeRecord) -> Json:
    return {
        "record_id": r.record_id,
        "timestamp": format_timestamp(r.timestamp),
        "provenance": encode_provenance(r.provenance),
        "change": encode_change(r.change),
    }


def decode_record(d: Json) -> ChangeRecord:
    try:
        return ChangeRecord(
            d["record_id"],
            parse_timestamp(d["timestamp"]),
            decode_provenance(d["provenance"]),
            decode_change(d["change"]),
        )
    except CodecError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CodecError(f"malformed change record: {exc!r}") from exc


# --- change sets / entry lines ----------------------------------------------------

ENTRY_KEYS = ("base_version", "committed_at", "digest", "prev_digest", "records", "result_version", "set_id")


def encode_set(
    cs: ChangeSet,
    committed_at: Optional[str] = None,
    prev_digest: Optional[str] = None,
    digest: Optional[str] = None,
) -> Json:
    return {
        "set_id": cs.set_id,
        "base_version": cs.base_version,
        "result_version": cs.result_version,
        "committed_at": committed_at,
        "records": [encode_record(r) for r in cs.records],
        "prev_digest": prev_digest,
        "digest": digest,
    }


def decode_set(d: Json) -> ChangeSet:
    try:
        return ChangeSet(
            d["set_id"],
            d["base_version"],
            d["result_version"],
            tuple(decode_record(r) for r in d["records"]),
        )
    except CodecError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CodecError(f"malformed change set: {exc!r}") from exc


def dumps_set(cs: ChangeSet) -> str:
    """One change-set line (with trailing newline), as written by ``bpcm diff``."""
    return canonical_json(encode_set(cs)) + "\n"


def loads_set(text: str) -> ChangeSet:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CodecError(f"change set is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise CodecError("change set must be a JSON object")
    return decode_set(obj)
