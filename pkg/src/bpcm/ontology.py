"""Export of change records as ontology individuals in N-Triples form.

The class hierarchy is emitted by :func:`export_schema`; each change record
becomes one individual typed with exactly one class from :data:`CLASS_PARENT`.
:func:`records_from_ntriples` is the documented inverse used to check that an
export loses nothing.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Dict, Iterable, List, NamedTuple, Optional, Tuple, Union

from .clock import format_timestamp, parse_timestamp
from .codec import decode_flow, decode_node, encode_flow, encode_node, canonical_json
from .errors import CodecError, CorruptJournal, InvalidRecord
from .journal import ChainBroken, Journal, ReplayMismatch
from .model import TASK_KINDS, CallType, FieldInjection, NodeKind, ValueKind
from .taxonomy import (
    Add,
    AssigneeChange,
    CallTypeChange,
    CandidateGroupsChange,
    CandidateUsersChange,
    Category,
    ChangeRecord,
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
    validate_record,
)

BPCM_NS = "http://example.org/bpcmont#"
RECORD_NS = "http://example.org/bpcmont/record/"
RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
RDF_JSON = "http://www.w3.org/1999/02/22-rdf-syntax-ns#JSON"
RDFS_CLASS = "http://www.w3.org/2000/01/rdf-schema#Class"
RDFS_SUBCLASS = "http://www.w3.org/2000/01/rdf-schema#subClassOf"
XSD_DATETIME = "http://www.w3.org/2001/XMLSchema#dateTime"


@dataclass(frozen=True)
class Literal:
    value: str
    datatype: Optional[str] = None


Term = Union[str, Literal]


class OntologyTriple(NamedTuple):
    subject: str
    predicate: str
    object: Term

    def to_ntriples(self) -> str:
        obj = self.object
        if isinstance(obj, Literal):
            text = f'"{_escape(obj.value)}"'
            if obj.datatype:
                text += f"^^<{obj.datatype}>"
        else:
            text = f"<{obj}>"
        return f"<{self.subject}> <{self.predicate}> {text} ."


def _escape(s: str) -> str:
    out = []
    for ch in s:
        if ch == "\\":
            out.append("\\\\")
        elif ch == '"':
            out.append('\\"')
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\r":
            out.append("\\r")
        elif ch == "\t":
            out.append("\\t")
        elif ord(ch) < 0x20 or ord(ch) == 0x7F:
            out.append(f"\\u{ord(ch):04X}")
        else:
            out.append(ch)
    return "".join(out)


# --- class hierarchy --------------------------------------------------------------

_TASK_CLASS = {
    NodeKind.USER_TASK: "UserTask_Change",
    NodeKind.JAVA_SERVICE_TASK: "Java_Service_Task_Change",
    NodeKind.WEB_SERVICE_TASK: "Web_Service_Task_Change",
    NodeKind.SCRIPT_TASK: "Script_Task_Change",
    NodeKind.EMAIL_TASK: "Email_Task_Change",
    NodeKind.JAVA_RECEIVE_TASK: "Java_Receive_Task_Change",
    NodeKind.BUSINESS_RULE_TASK: "Business_Rule_Task_Change",
    NodeKind.MULE_TASK: "Mule_Task_Change",
    NodeKind.MANUAL_TASK: "Manual_Task_Change",
    NodeKind.SHELL_TASK: "Shell_Task_Change",
    NodeKind.CAMEL_TASK: "Camel_Task_Change",
}
_CATEGORY_CLASS = {
    Category.DECLARATION: "Declaration_Change",
    Category.PROCESS_INITIALIZATION: "Process_Initialization_Change",
    Category.SEQUENCE_FLOW: "Sequence_Flow_Change",
    Category.TASK_LEVEL: "TaskLevel_Change",
    Category.CUSTOM_EXTENSION: "Custom_Extension_Change",
    Category.DATA_OBJECT: "Data_Object_Change",
    Category.GATEWAYS: "Gateways_Change",
    Category.TRANSACTION_CONCURRENCY: "Transaction_Concurrency_Change",
    Category.EVENT: "Event_Change",
}
_CALL_CLASS = {
    CallType.JAVA_CLASS: "JavaClass_CallType_Change",
    CallType.DELEGATE_EXPRESSION: "DelegateExpression_CallType_Change",
    CallType.EXPRESSION: "Expression_CallType_Change",
}


def _hierarchy() -> List[Tuple[str, Optional[str]]]:
    """(class, parent) pairs in emission order; roots have no parent."""
    pairs: List[Tuple[str, Optional[str]]] = [
        ("BPMN_Construct_Change", None),
        ("Provenance_Specs", None),
        ("Timestamp", None),
        ("AgentName", "Provenance_Specs"),
        ("Cause", "Provenance_Specs"),
        ("Description", "Provenance_Specs"),
    ]
    pairs += [(c, "BPMN_Construct_Change") for c in _CATEGORY_CLASS.values()]
    pairs += [(f"Sequence_Flow_{s}", "Sequence_Flow_Change") for s in ("Addition", "Removal", "Modification")]
    pairs += [(_TASK_CLASS[k], "TaskLevel_Change") for k in TASK_KINDS]
    pairs += [
        ("Addition_of_UserTask", "UserTask_Change"),
        ("Deletion_of_UserTask", "UserTask_Change"),
        ("Rename_of_UserTask", "UserTask_Change"),
        ("Modification_in_UserTask", "UserTask_Change"),
        ("Addition_of_JavaServiceTask", "Java_Service_Task_Change"),
        ("Deletion_of_JavaServiceTask", "Java_Service_Task_Change"),
        ("Rename_of_JavaServiceTask", "Java_Service_Task_Change"),
        ("CallType_Change", "Java_Service_Task_Change"),
        ("Field_Injection_Change", "Java_Service_Task_Change"),
        ("ResultVariable_Change", "Java_Service_Task_Change"),
    ]
    pairs += [(c, "CallType_Change") for c in _CALL_CLASS.values()]
    return pairs


CLASS_PARENT: Dict[str, Optional[str]] = dict(_hierarchy())
CLASS_COUNT = len(CLASS_PARENT)


def iri(local: str) -> str:
    return BPCM_NS + local


def export_schema() -> List[OntologyTriple]:
    """Class declarations followed by their subclass-of links, in fixed order."""
    out = []
    for cls, parent in _hierarchy():
        out.append(OntologyTriple(iri(cls), RDF_TYPE, RDFS_CLASS))
        if parent is not None:
            out.append(OntologyTriple(iri(cls), RDFS_SUBCLASS, iri(parent)))
    return out


def class_of(change: ConstructChange) -> str:
    """Local name of the single class an individual for ``change`` is typed with."""
    p = change.payload
    if isinstance(p, TaskChange):
        op = p.op
        if p.task_kind is NodeKind.USER_TASK:
            special = {
                Add: "Addition_of_UserTask",
                Delete: "Deletion_of_UserTask",
                Rename: "Rename_of_UserTask",
                ModifyUserTask: "Modification_in_UserTask",
            }
            return special.get(type(op), _TASK_CLASS[p.task_kind])
        if p.task_kind is NodeKind.JAVA_SERVICE_TASK:
            if isinstance(op, ModifyJavaServiceTask):
                m = op.modification
                if isinstance(m, CallTypeChange):
                    return _CALL_CLASS[m.new_call]
                if isinstance(m, ResultVariableChange):
                    return "ResultVariable_Change"
                return "Field_Injection_Change"
            special = {
                Add: "Addition_of_JavaServiceTask",
                Delete: "Deletion_of_JavaServiceTask",
                Rename: "Rename_of_JavaServiceTask",
            }
            return special.get(type(op), _TASK_CLASS[p.task_kind])
        return _TASK_CLASS[p.task_kind]
    if isinstance(p, FlowAdded):
        return "Sequence_Flow_Addition"
    if isinstance(p, FlowRemoved):
        return "Sequence_Flow_Removal"
    if isinstance(p, FlowModified):
        return "Sequence_Flow_Modification"
    return _CATEGORY_CLASS[change.category]


def category_of_class(local: str) -> Category:
    by_class = {v: k for k, v in _CATEGORY_CLASS.items()}
    cls: Optional[str] = local
    while cls is not None:
        if cls in by_class:
            return by_class[cls]
        cls = CLASS_PARENT[cls]
    raise CodecError(f"class {local!r} is not under BPMN_Construct_Change")


# --- record export ----------------------------------------------------------------


def _json_literal(value) -> Literal:
    return Literal(canonical_json(value), RDF_JSON)


def change_kind(change: ConstructChange) -> str:
    p = change.payload
    if isinstance(p, TaskChange):
        if isinstance(p.op, (ModifyUserTask, ModifyJavaServiceTask)):
            return type(p.op.modification).__name__
        return type(p.op).__name__
    if isinstance(p, GenericChange):
        return {GenericAdded: "Added", GenericRemoved: "Removed", GenericModified: "Modified"}[type(p.op)]
    return type(p).__name__


def _payload_properties(change: ConstructChange) -> List[Tuple[str, Term]]:
    out: List[Tuple[str, Term]] = []

    def opt(prop: str, value: Optional[str]) -> None:
        if value is not None:
            out.append((prop, Literal(value)))

    p = change.payload
    if isinstance(p, TaskChange):
        out.append(("hasTaskKind", Literal(p.task_kind.value)))
        op = p.op
        if isinstance(op, (Add, Delete)):
            out.append(("hasSnapshot", _json_literal(encode_node(op.node))))
        elif isinstance(op, Rename):
            opt("hasOldValue", op.old_name)
            opt("hasNewValue", op.new_name)
        elif isinstance(op, ModifyGeneric):
            out.append(("hasModifiedProperty", Literal(op.attribute)))
            opt("hasOldValue", op.old)
            opt("hasNewValue", op.new)
        else:
            m = op.modification
            if isinstance(m, (CandidateUsersChange, CandidateGroupsChange)):
                out.append(("hasModifiedProperty", Literal(m.field)))
                out.append(("hasOldValue", _json_literal(sorted(m.old))))
                out.append(("hasNewValue", _json_literal(sorted(m.new))))
            elif isinstance(m, (AssigneeChange, DueDateChange, DescriptionChange, FormKeyChange)):
                out.append(("hasModifiedProperty", Literal(m.field)))
                opt("hasOldValue", m.old)
                opt("hasNewValue", m.new)
            elif isinstance(m, CallTypeChange):
                out.append(("hasOldCallType", Literal(m.old_call.value)))
                out.append(("hasNewCallType", Literal(m.new_call.value)))
                out.append(("hasOldValue", Literal(m.old_target)))
                out.append(("hasNewValue", Literal(m.new_target)))
            elif isinstance(m, FieldInjectionAdded):
                out.append(("hasFieldName", Literal(m.injection.field_name)))
                out.append(("hasNewValueKind", Literal(m.injection.value_kind.value)))
                out.append(("hasNewValue", Literal(m.injection.value)))
            elif isinstance(m, FieldInjectionRemoved):
                out.append(("hasFieldName", Literal(m.injection.field_name)))
                out.append(("hasOldValueKind", Literal(m.injection.value_kind.value)))
                out.append(("hasOldValue", Literal(m.injection.value)))
            elif isinstance(m, FieldInjectionModified):
                out.append(("hasFieldName", Literal(m.field_name)))
                out.append(("hasOldValueKind", Literal(m.old_kind.value)))
                out.append(("hasNewValueKind", Literal(m.new_kind.value)))
                out.append(("hasOldValue", Literal(m.old_value)))
                out.append(("hasNewValue", Literal(m.new_value)))
            elif isinstance(m, ResultVariableChange):
                opt("hasOldValue", m.old)
                opt("hasNewValue", m.new)
    elif isinstance(p, (FlowAdded, FlowRemoved)):
        out.append(("hasSnapshot", _json_literal(encode_flow(p.flow))))
    elif isinstance(p, FlowModified):
        out.append(("hasModifiedProperty", Literal(p.attribute)))
        opt("hasOldValue", p.old)
        opt("hasNewValue", p.new)
    else:
        op = p.op
        if isinstance(op, GenericModified):
            out.append(("hasModifiedProperty", Literal(op.attribute)))
            opt("hasOldValue", op.old)
            opt("hasNewValue", op.new)
        else:
            out.append(("hasSnapshot", _json_literal(encode_node(op.node))))
    return out


def record_iri(record_id: str) -> str:
    return RECORD_NS + record_id


def export_record(record: ChangeRecord) -> List[OntologyTriple]:
    """Triples describing one change record; invalid records are refused."""
    problems = validate_record(record)
    if problems:
        raise InvalidRecord(problems)
    subject = record_iri(record.record_id)
    props: List[Tuple[str, Term]] = [
        ("changeKind", Literal(change_kind(record.change))),
        ("hasElementId", Literal(record.element_id)),
        ("hasAgentName", Literal(record.provenance.agent_name)),
        ("hasCause", Literal(record.provenance.cause)),
        ("hasDescription", Literal(record.provenance.description)),
        ("hasTimestamp", Literal(format_timestamp(record.timestamp), XSD_DATETIME)),
    ]
    props += _payload_properties(record.change)
    triples = [OntologyTriple(subject, RDF_TYPE, iri(class_of(record.change)))]
    triples += [OntologyTriple(subject, iri(prop), value) for prop, value in props]
    return triples


def to_ntriples(triples: Iterable[OntologyTriple]) -> str:
    return "".join(t.to_ntriples() + "\n" for t in triples)


def export_journal(journal: Journal) -> str:
    """Schema triples followed by every record of every entry, as N-Triples text."""
    damaged = [f for f in journal.verify() if isinstance(f, (ChainBroken, ReplayMismatch))]
    if damaged:
        raise CorruptJournal("; ".join(map(str, damaged)))
    triples = export_schema()
    for entry in journal.entries:
        for record in entry.change_set.records:
            triples += export_record(record)
    return to_ntriples(triples)


# --- inverse ----------------------------------------------------------------------

_IRI = r"<([^<>\"{}|^`\\\x00-\x20]*)>"
_LINE = re.compile(
    r"^\s*" + _IRI + r"\s+" + _IRI + r"\s+(?:" + _IRI + r'|"((?:[^"\\\n\r]|\\.)*)"(?:\^\^' + _IRI + r")?)\s*\.\s*$"
)
_ECHAR = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}


def _unescape(s: str) -> str:
    out = []
    i = 0
    while i < len(s):
        ch = s[i]
        if ch != "\\":
            out.append(ch)
            i += 1
            continue
        nxt = s[i + 1]
        if nxt in _ECHAR:
            out.append(_ECHAR[nxt])
            i += 2
        elif nxt == "u":
            out.append(chr(int(s[i + 2 : i + 6], 16)))
            i += 6
        elif nxt == "U":
            out.append(chr(int(s[i + 2 : i + 10], 16)))
            i += 10
        else:
            raise CodecError(f"bad escape \\{nxt}")
    return "".join(out)


def parse_ntriples(text: str) -> List[OntologyTriple]:
    """Parse the N-Triples subset written by this module (IRIs and literals)."""
    out = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        m = _LINE.match(line)
        if not m:
            raise CodecError(f"line {n} is not an N-Triples statement: {line!r}")
        s, p, o_iri, o_lit, dt = m.groups()
        obj: Term = o_iri if o_iri is not None else Literal(_unescape(o_lit), dt)
        out.append(OntologyTriple(s, p, obj))
    return out


_OPTIONAL_BY_FIELD = {
    "assignee": AssigneeChange,
    "due_date": DueDateChange,
    "description": DescriptionChange,
    "form_key": FormKeyChange,
}
_SET_BY_FIELD = {"candidate_users": CandidateUsersChange, "candidate_groups": CandidateGroupsChange}


def record_from_triples(triples: Iterable[OntologyTriple]) -> ChangeRecord:
    """Rebuild the :class:`ChangeRecord` described by one individual's triples."""
    triples = list(triples)
    subjects = {t.subject for t in triples}
    if len(subjects) != 1:
        raise CodecError(f"expected triples about one individual, got {len(subjects)}")
    subject = subjects.pop()
    if not subject.startswith(RECORD_NS):
        raise CodecError(f"{subject} is not a record individual")
    types = [t.object for t in triples if t.predicate == RDF_TYPE]
    if len(types) != 1 or not isinstance(types[0], str) or not types[0].startswith(BPCM_NS):
        raise CodecError("record individual must carry exactly one ontology class")
    cls = types[0][len(BPCM_NS):]
    if cls not in CLASS_PARENT:
        raise CodecError(f"unknown class {cls}")
    props: Dict[str, Literal] = {}
    for t in triples:
        if t.predicate.startswith(BPCM_NS) and isinstance(t.object, Literal):
            props[t.predicate[len(BPCM_NS):]] = t.object

    def val(name: str) -> Optional[str]:
        lit = props.get(name)
        return None if lit is None else lit.value

    def js(name: str):
        return json.loads(props[name].value)

    category = category_of_class(cls)
    kind = val("changeKind")
    element_id = val("hasElementId")
    payload: object
    if category is Category.TASK_LEVEL:
        task_kind = NodeKind(val("hasTaskKind"))
        if kind in ("Add", "Delete"):
            node = decode_node(js("hasSnapshot"))
            op: object = Add(node) if kind == "Add" else Delete(node)
        elif kind == "Rename":
            op = Rename(val("hasOldValue"), val("hasNewValue"))
        elif kind == "ModifyGeneric":
            op = ModifyGeneric(val("hasModifiedProperty"), val("hasOldValue"), val("hasNewValue"))
        elif kind in ("CandidateUsersChange", "CandidateGroupsChange"):
            mod_type = _SET_BY_FIELD[val("hasModifiedProperty")]
            op = ModifyUserTask(mod_type(frozenset(js("hasOldValue")), frozenset(js("hasNewValue"))))
        elif kind in ("AssigneeChange", "DueDateChange", "DescriptionChange", "FormKeyChange"):
            mod_type = _OPTIONAL_BY_FIELD[val("hasModifiedProperty")]
            op = ModifyUserTask(mod_type(val("hasOldValue"), val("hasNewValue")))
        elif kind == "CallTypeChange":
            op = ModifyJavaServiceTask(
                CallTypeChange(
                    CallType(val("hasOldCallType")),
                    val("hasOldValue"),
                    CallType(val("hasNewCallType")),
                    val("hasNewValue"),
                )
            )
        elif kind == "FieldInjectionAdded":
            inj = FieldInjection(val("hasFieldName"), ValueKind(val("hasNewValueKind")), val("hasNewValue"))
            op = ModifyJavaServiceTask(FieldInjectionAdded(inj))
        elif kind == "FieldInjectionRemoved":
            inj = FieldInjection(val("hasFieldName"), ValueKind(val("hasOldValueKind")), val("hasOldValue"))
            op = ModifyJavaServiceTask(FieldInjectionRemoved(inj))
        elif kind == "FieldInjectionModified":
            op = ModifyJavaServiceTask(
                FieldInjectionModified(
                    val("hasFieldName"),
                    ValueKind(val("hasOldValueKind")),
                    val("hasOldValue"),
                    ValueKind(val("hasNewValueKind")),
                    val("hasNewValue"),
                )
            )
        elif kind == "ResultVariableChange":
            op = ModifyJavaServiceTask(ResultVariableChange(val("hasOldValue"), val("hasNewValue")))
        else:
            raise CodecError(f"unknown task change kind {kind!r}")
        payload = TaskChange(task_kind, element_id, op)
    elif category is Category.SEQUENCE_FLOW:
        if kind == "FlowAdded":
            payload = FlowAdded(decode_flow(js("hasSnapshot")))
        elif kind == "FlowRemoved":
            payload = FlowRemoved(decode_flow(js("hasSnapshot")))
        elif kind == "FlowModified":
            payload = FlowModified(element_id, val("hasModifiedProperty"), val("hasOldValue"), val("hasNewValue"))
        else:
            raise CodecError(f"unknown flow change kind {kind!r}")
    else:
        if kind == "Modified":
            gop: object = GenericModified(val("hasModifiedProperty"), val("hasOldValue"), val("hasNewValue"))
        elif kind == "Added":
            gop = GenericAdded(decode_node(js("hasSnapshot")))
        elif kind == "Removed":
            gop = GenericRemoved(decode_node(js("hasSnapshot")))
        else:
            raise CodecError(f"unknown generic change kind {kind!r}")
        payload = GenericChange(element_id, gop)
    return ChangeRecord(
        subject[len(RECORD_NS):],
        parse_timestamp(val("hasTimestamp")),
        Provenance(val("hasAgentName"), val("hasCause"), val("hasDescription")),
        ConstructChange(category, payload),
    )


def records_from_ntriples(text: str) -> List[ChangeRecord]:
    """Every record individual in an export, in order of first appearance."""
    groups: Dict[str, List[OntologyTriple]] = {}
    for t in parse_ntriples(text):
        if t.subject.startswith(RECORD_NS):
            groups.setdefault(t.subject, []).append(t)
    return [record_from_triples(g) for g in groups.values()]
