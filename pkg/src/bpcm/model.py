"""In-memory BPMN 2.0 process model, its XML parser and canonical serializer.

Only a subset of BPMN is supported: the node kinds listed in :class:`NodeKind`
plus sequence flows.  Vendor attributes (assignee, due date, Java delegate
configuration, field injections) are read from the Activiti extension
namespace.  See ``FORMATS.md`` for the normative element and attribute grammar.
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple, Union

from .errors import (
    DanglingFlowRef,
    DuplicateId,
    InvalidModel,
    MalformedXml,
    UnsupportedConstruct,
)

BPMN_NS = "http://www.omg.org/spec/BPMN/20100524/MODEL"
BPMNDI_NS = "http://www.omg.org/spec/BPMN/20100524/DI"
XSI_NS = "http://www.w3.org/2001/XMLSchema-instance"
# Single point of configuration for the vendor extension namespace.
ACTIVITI_NS = "http://activiti.org/bpmn"
TARGET_NAMESPACE = "http://www.activiti.org/processdef"


class NodeKind(str, Enum):
    START_EVENT = "StartEvent"
    END_EVENT = "EndEvent"
    USER_TASK = "UserTask"
    JAVA_SERVICE_TASK = "JavaServiceTask"
    WEB_SERVICE_TASK = "WebServiceTask"
    SCRIPT_TASK = "ScriptTask"
    EMAIL_TASK = "EmailTask"
    JAVA_RECEIVE_TASK = "JavaReceiveTask"
    BUSINESS_RULE_TASK = "BusinessRuleTask"
    MULE_TASK = "MuleTask"
    MANUAL_TASK = "ManualTask"
    SHELL_TASK = "ShellTask"
    CAMEL_TASK = "CamelTask"
    EXCLUSIVE_GATEWAY = "ExclusiveGateway"
    PARALLEL_GATEWAY = "ParallelGateway"
    INTERMEDIATE_EVENT = "IntermediateEvent"
    DATA_OBJECT = "DataObject"

    def __str__(self) -> str:
        return self.value

    @property
    def is_task(self) -> bool:
        return self in TASK_KINDS


# The eleven task kinds, in the order the ontology lists them.
TASK_KINDS: Tuple[NodeKind, ...] = (
    NodeKind.USER_TASK,
    NodeKind.JAVA_SERVICE_TASK,
    NodeKind.WEB_SERVICE_TASK,
    NodeKind.SCRIPT_TASK,
    NodeKind.EMAIL_TASK,
    NodeKind.JAVA_RECEIVE_TASK,
    NodeKind.BUSINESS_RULE_TASK,
    NodeKind.MULE_TASK,
    NodeKind.MANUAL_TASK,
    NodeKind.SHELL_TASK,
    NodeKind.CAMEL_TASK,
)
EVENT_KINDS = (NodeKind.START_EVENT, NodeKind.INTERMEDIATE_EVENT, NodeKind.END_EVENT)
GATEWAY_KINDS = (NodeKind.EXCLUSIVE_GATEWAY, NodeKind.PARALLEL_GATEWAY)
DATA_KINDS = (NodeKind.DATA_OBJECT,)


class CallType(str, Enum):
    JAVA_CLASS = "JavaClass"
    DELEGATE_EXPRESSION = "DelegateExpression"
    EXPRESSION = "Expression"

    def __str__(self) -> str:
        return self.value


class ValueKind(str, Enum):
    STRING = "StringValue"
    EXPRESSION = "ExpressionValue"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class FieldInjection:
    field_name: str
    value_kind: ValueKind
    value: str

    def __post_init__(self) -> None:
        if not self.field_name:
            raise InvalidModel("field injection with empty field name")
        object.__setattr__(self, "value_kind", ValueKind(self.value_kind))


@dataclass(frozen=True)
class UserTaskDetail:
    assignee: Optional[str] = None
    candidate_users: FrozenSet[str] = frozenset()
    candidate_groups: FrozenSet[str] = frozenset()
    due_date: Optional[str] = None
    description: Optional[str] = None
    form_key: Optional[str] = None

    def __post_init__(self) -> None:
        for attr in ("candidate_users", "candidate_groups"):
            values = frozenset(getattr(self, attr))
            for v in values:
                if not v or "," in v or v != v.strip():
                    raise InvalidModel(f"{attr} entry {v!r} is empty or not a bare name")
            object.__setattr__(self, attr, values)


@dataclass(frozen=True)
class JavaServiceTaskDetail:
    call_type: CallType
    target: str
    field_injections: Tuple[FieldInjection, ...] = ()
    result_variable: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "call_type", CallType(self.call_type))
        # Injection order carries no meaning; keep them sorted by field name.
        object.__setattr__(
            self, "field_injections", tuple(sorted(self.field_injections, key=lambda f: f.field_name))
        )
        if not self.target:
            raise InvalidModel("Java service task target must be non-empty")
        names = [f.field_name for f in self.field_injections]
        if len(names) != len(set(names)):
            raise InvalidModel(f"duplicate field injection names in {names}")

    def injection(self, name: str) -> Optional[FieldInjection]:
        for f in self.field_injections:
            if f.field_name == name:
                return f
        return None


_NCNAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-]*$")

# Generic attribute keys that do not map to a plain XML attribute.
DOCUMENTATION_KEY = "bpmn:documentation"
SCRIPT_KEY = "bpmn:script"
FIELD_STRING_PREFIX = "activiti:field:"
FIELD_EXPRESSION_PREFIX = "activiti:field-expression:"

_SERVICE_TYPE = {
    NodeKind.EMAIL_TASK: "mail",
    NodeKind.MULE_TASK: "mule",
    NodeKind.SHELL_TASK: "shell",
    NodeKind.CAMEL_TASK: "camel",
}
_WEB_SERVICE_IMPL = "##WebService"


def _generic_key_error(kind: NodeKind, key: str) -> Optional[str]:
    if key in ("id", "name"):
        return "reserved attribute"
    if key == DOCUMENTATION_KEY:
        return None
    if key == SCRIPT_KEY:
        return None if kind is NodeKind.SCRIPT_TASK else "script body only allowed on script tasks"
    for prefix in (FIELD_STRING_PREFIX, FIELD_EXPRESSION_PREFIX):
        if key.startswith(prefix):
            if not kind.is_task:
                return "field injections only allowed on tasks"
            return None if _NCNAME.match(key[len(prefix):]) else "bad field name"
    if key.startswith("activiti:"):
        local = key[len("activiti:"):]
        if kind in _SERVICE_TYPE and local == "type":
            return "reserved attribute"
        return None if _NCNAME.match(local) else "bad attribute name"
    if kind is NodeKind.WEB_SERVICE_TASK and key == "implementation":
        return "reserved attribute"
    return None if _NCNAME.match(key) else "bad attribute name"


@dataclass(frozen=True)
class GenericDetail:
    """Attribute bag for node kinds whose internals are not modelled in detail."""

    attributes: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "attributes", dict(self.attributes))


Detail = Union[UserTaskDetail, JavaServiceTaskDetail, GenericDetail]


def detail_type(kind: NodeKind) -> type:
    if kind is NodeKind.USER_TASK:
        return UserTaskDetail
    if kind is NodeKind.JAVA_SERVICE_TASK:
        return JavaServiceTaskDetail
    return GenericDetail


@dataclass(frozen=True)
class FlowNode:
    id: str
    kind: NodeKind
    detail: Detail
    name: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", NodeKind(self.kind))
        if not self.id:
            raise InvalidModel("node id must be non-empty")
        if type(self.detail) is not detail_type(self.kind):
            raise InvalidModel(
                f"node {self.id!r}: {type(self.detail).__name__} does not match kind {self.kind}"
            )
        if isinstance(self.detail, GenericDetail):
            fields_seen = set()
            for key in self.detail.attributes:
                problem = _generic_key_error(self.kind, key)
                if problem:
                    raise InvalidModel(f"node {self.id!r}: attribute {key!r}: {problem}")
                for prefix in (FIELD_STRING_PREFIX, FIELD_EXPRESSION_PREFIX):
                    if key.startswith(prefix):
                        fname = key[len(prefix):]
                        if fname in fields_seen:
                            raise InvalidModel(f"node {self.id!r}: field {fname!r} given twice")
                        fields_seen.add(fname)


@dataclass(frozen=True)
class SequenceFlow:
    id: str
    source_ref: str
    target_ref: str
    name: Optional[str] = None
    condition_expression: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.id:
            raise InvalidModel("flow id must be non-empty")
        if not self.source_ref or not self.target_ref:
            raise InvalidModel(f"flow {self.id!r} has an empty source or target reference")


@dataclass(frozen=True)
class ProcessModel:
    """A single BPMN process.

    ``nodes`` and ``flows`` are keyed by element id.  ``attributes`` holds
    process-level XML attributes other than ``id`` and ``name`` (for example
    ``isExecutable``).  Instances are treated as immutable values.
    """

    process_id: str
    nodes: Mapping[str, FlowNode] = field(default_factory=dict)
    flows: Mapping[str, SequenceFlow] = field(default_factory=dict)
    process_name: Optional[str] = None
    attributes: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", dict(self.nodes))
        object.__setattr__(self, "flows", dict(self.flows))
        object.__setattr__(self, "attributes", dict(self.attributes))
        if not self.process_id:
            raise InvalidModel("process id must be non-empty")
        for key in self.attributes:
            if key in ("id", "name") or not _plain_or_activiti(key):
                raise InvalidModel(f"bad process attribute name {key!r}")
        for key, node in self.nodes.items():
            if key != node.id:
                raise InvalidModel(f"node stored under {key!r} has id {node.id!r}")
        for key, flow in self.flows.items():
            if key != flow.id:
                raise InvalidModel(f"flow stored under {key!r} has id {flow.id!r}")
            if key in self.nodes:
                raise DuplicateId(key)
            for ref in (flow.source_ref, flow.target_ref):
                if ref not in self.nodes:
                    raise DanglingFlowRef(key, ref)

    @classmethod
    def build(
        cls,
        process_id: str,
        nodes: Iterable[FlowNode] = (),
        flows: Iterable[SequenceFlow] = (),
        process_name: Optional[str] = None,
        attributes: Optional[Mapping[str, str]] = None,
    ) -> "ProcessModel":
        """Construct a model from element lists, rejecting duplicate ids."""
        node_map: Dict[str, FlowNode] = {}
        for n in nodes:
            if n.id in node_map:
                raise DuplicateId(n.id)
            node_map[n.id] = n
        flow_map: Dict[str, SequenceFlow] = {}
        for f in flows:
            if f.id in flow_map or f.id in node_map:
                raise DuplicateId(f.id)
            flow_map[f.id] = f
        return cls(process_id, node_map, flow_map, process_name, attributes or {})

    def element_ids(self) -> FrozenSet[str]:
        return frozenset(self.nodes) | frozenset(self.flows)


def _plain_or_activiti(key: str) -> bool:
    if key.startswith("activiti:"):
        return bool(_NCNAME.match(key[len("activiti:"):]))
    return bool(_NCNAME.match(key))


def model_equals(a: ProcessModel, b: ProcessModel) -> bool:
    """Field-by-field equality; sets compare as sets and maps as maps."""
    return a == b


# ---------------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------------

_TAG_KIND = {
    "startEvent": NodeKind.START_EVENT,
    "endEvent": NodeKind.END_EVENT,
    "intermediateCatchEvent": NodeKind.INTERMEDIATE_EVENT,
    "userTask": NodeKind.USER_TASK,
    "scriptTask": NodeKind.SCRIPT_TASK,
    "receiveTask": NodeKind.JAVA_RECEIVE_TASK,
    "businessRuleTask": NodeKind.BUSINESS_RULE_TASK,
    "manualTask": NodeKind.MANUAL_TASK,
    "exclusiveGateway": NodeKind.EXCLUSIVE_GATEWAY,
    "parallelGateway": NodeKind.PARALLEL_GATEWAY,
    "dataObject": NodeKind.DATA_OBJECT,
}
_KIND_TAG = {kind: tag for tag, kind in _TAG_KIND.items()}
for _k in (NodeKind.JAVA_SERVICE_TASK, NodeKind.WEB_SERVICE_TASK, *_SERVICE_TYPE):
    _KIND_TAG[_k] = "serviceTask"
_TYPE_SERVICE = {v: k for k, v in _SERVICE_TYPE.items()}

_USER_TASK_ATTRS = ("assignee", "candidateUsers", "candidateGroups", "dueDate", "formKey")
_CALL_ATTRS = {
    "class": CallType.JAVA_CLASS,
    "delegateExpression": CallType.DELEGATE_EXPRESSION,
    "expression": CallType.EXPRESSION,
}
_CALL_ATTR_OF = {v: k for k, v in _CALL_ATTRS.items()}


class _Parser:
    def __init__(self, ext_ns: str) -> None:
        self.ext_ns = ext_ns
        self.unsupported: List[str] = []

    # qualified-name helpers -----------------------------------------------------
    def _split(self, qname: str) -> Tuple[str, str]:
        if qname.startswith("{"):
            ns, local = qname[1:].split("}", 1)
            return ns, local
        return "", qname

    def _tag(self, el: ET.Element) -> str:
        ns, local = self._split(el.tag)
        if ns == BPMN_NS:
            return local
        if ns == self.ext_ns:
            return "activiti:" + local
        return el.tag

    def _attrs(self, el: ET.Element, allowed_foreign: Iterable[str] = ()) -> Dict[str, str]:
        out: Dict[str, str] = {}
        allowed = set(allowed_foreign)
        for qname, value in el.attrib.items():
            ns, local = self._split(qname)
            if ns == "":
                out[local] = value
            elif ns == self.ext_ns:
                out["activiti:" + local] = value
            elif qname in allowed:
                continue
            else:
                self.unsupported.append(f"{self._tag(el)}/@{qname}")
        return out

    def _no_attrs(self, el: ET.Element, allowed_foreign: Iterable[str] = ()) -> None:
        for extra in self._attrs(el, allowed_foreign):
            self.unsupported.append(f"{self._tag(el)}/@{extra}")

    def _reject(self, el: ET.Element, context: str) -> None:
        self.unsupported.append(f"{context}/{self._tag(el)}")

    # document -------------------------------------------------------------------
    def parse(self, xml_text: Union[str, bytes]) -> ProcessModel:
        try:
            root = ET.fromstring(xml_text)
        except ET.ParseError as exc:
            raise MalformedXml(str(exc)) from exc
        if self._tag(root) != "definitions":
            raise UnsupportedConstruct([self._tag(root)], "root element must be bpmn:definitions")
        processes = []
        for child in root:
            if not isinstance(child.tag, str):
                continue
            ns, local = self._split(child.tag)
            if ns == BPMNDI_NS:
                continue  # diagram geometry is ignored
            if ns == BPMN_NS and local == "process":
                processes.append(child)
            else:
                self._reject(child, "definitions")
        if len(processes) > 1:
            self.unsupported.append("definitions/process[2]")
        if self.unsupported:
            raise UnsupportedConstruct(self.unsupported)
        if not processes:
            raise InvalidModel("document contains no process element")
        model = self._process(processes[0])
        if self.unsupported:
            raise UnsupportedConstruct(self.unsupported)
        return model

    def _process(self, proc: ET.Element) -> ProcessModel:
        attrs = self._attrs(proc)
        pid = attrs.pop("id", "")
        pname = attrs.pop("name", None)
        nodes: Dict[str, FlowNode] = {}
        flows: Dict[str, SequenceFlow] = {}
        seen: set = set()
        for child in proc:
            if not isinstance(child.tag, str):
                continue
            tag = self._tag(child)
            if tag == "sequenceFlow":
                item = self._flow(child)
            elif tag in _TAG_KIND or tag == "serviceTask":
                item = self._node(child, tag)
            else:
                self._reject(child, "process")
                continue
            if item is None:
                continue
            if item.id in seen:
                raise DuplicateId(item.id)
            seen.add(item.id)
            if isinstance(item, SequenceFlow):
                flows[item.id] = item
            else:
                nodes[item.id] = item
        if self.unsupported:
            raise UnsupportedConstruct(self.unsupported)
        if not pid:
            raise InvalidModel("process element has no id")
        for f in flows.values():
            for ref in (f.source_ref, f.target_ref):
                if ref not in nodes:
                    raise DanglingFlowRef(f.id, ref)
        try:
            return ProcessModel(pid, nodes, flows, pname, attrs)
        except ValueError as exc:
            if isinstance(exc, InvalidModel):
                raise
            raise InvalidModel(str(exc)) from exc

    def _flow(self, el: ET.Element) -> Optional[SequenceFlow]:
        attrs = self._attrs(el)
        fid = attrs.pop("id", "")
        name = attrs.pop("name", None)
        src = attrs.pop("sourceRef", "")
        tgt = attrs.pop("targetRef", "")
        for extra in attrs:
            self.unsupported.append(f"sequenceFlow/@{extra}")
        cond: Optional[str] = None
        for child in el:
            if not isinstance(child.tag, str):
                continue
            if self._tag(child) == "conditionExpression" and cond is None:
                self._no_attrs(child, allowed_foreign=[f"{{{XSI_NS}}}type"])
                cond = _text_of(self, child)
            else:
                self._reject(child, "sequenceFlow")
        if not fid:
            raise InvalidModel("sequenceFlow without id")
        if not src or not tgt:
            raise DanglingFlowRef(fid, src or tgt)
        return SequenceFlow(fid, src, tgt, name, cond)

    def _node(self, el: ET.Element, tag: str) -> Optional[FlowNode]:
        attrs = self._attrs(el)
        nid = attrs.pop("id", "")
        if not nid:
            raise InvalidModel(f"{tag} element without id")
        name = attrs.pop("name", None)
        kind = self._kind(tag, attrs)
        if kind is None:
            self.unsupported.append(f"serviceTask[@id={nid}]")
            return None
        if kind is NodeKind.USER_TASK:
            detail: Detail = self._user_task(el, attrs)
        elif kind is NodeKind.JAVA_SERVICE_TASK:
            parsed = self._java_task(el, attrs, nid)
            if parsed is None:
                return None
            detail = parsed
        else:
            detail = self._generic(el, kind, attrs)
        return FlowNode(nid, kind, detail, name)

    def _kind(self, tag: str, attrs: Dict[str, str]) -> Optional[NodeKind]:
        if tag != "serviceTask":
            return _TAG_KIND[tag]
        stype = attrs.get("activiti:type")
        if stype is not None:
            kind = _TYPE_SERVICE.get(stype)
            if kind is not None:
                del attrs["activiti:type"]
            return kind
        if attrs.get("implementation") == _WEB_SERVICE_IMPL:
            del attrs["implementation"]
            return NodeKind.WEB_SERVICE_TASK
        return NodeKind.JAVA_SERVICE_TASK

    def _children(self, el: ET.Element) -> List[ET.Element]:
        return [c for c in el if isinstance(c.tag, str)]

    def _user_task(self, el: ET.Element, attrs: Dict[str, str]) -> UserTaskDetail:
        vals = {}
        for key in _USER_TASK_ATTRS:
            vals[key] = attrs.pop("activiti:" + key, None)
        for extra in attrs:
            self.unsupported.append(f"userTask/@{extra}")
        description = None
        for child in self._children(el):
            if self._tag(child) == "documentation" and description is None:
                self._no_attrs(child)
                description = _text_of(self, child)
            else:
                self._reject(child, "userTask")
        return UserTaskDetail(
            assignee=vals["assignee"],
            candidate_users=_split_names(vals["candidateUsers"]),
            candidate_groups=_split_names(vals["candidateGroups"]),
            due_date=vals["dueDate"],
            description=description,
            form_key=vals["formKey"],
        )

    def _java_task(
        self, el: ET.Element, attrs: Dict[str, str], nid: str
    ) -> Optional[JavaServiceTaskDetail]:
        calls = [(ct, attrs.pop("activiti:" + a)) for a, ct in _CALL_ATTRS.items() if "activiti:" + a in attrs]
        result_var = attrs.pop("activiti:resultVariableName", None)
        alias = attrs.pop("activiti:resultVariable", None)
        if result_var is None:
            result_var = alias
        for extra in attrs:
            self.unsupported.append(f"serviceTask/@{extra}")
        if len(calls) != 1 or not calls[0][1]:
            self.unsupported.append(f"serviceTask[@id={nid}]")
            return None
        injections: List[FieldInjection] = []
        for child in self._children(el):
            if self._tag(child) == "extensionElements":
                injections.extend(self._fields(child, "serviceTask"))
            else:
                self._reject(child, "serviceTask")
        names = [f.field_name for f in injections]
        if len(names) != len(set(names)):
            self.unsupported.append(f"serviceTask[@id={nid}]/activiti:field")
            return None
        return JavaServiceTaskDetail(calls[0][0], calls[0][1], tuple(injections), result_var)

    def _fields(self, ext: ET.Element, context: str) -> List[FieldInjection]:
        out = []
        for f in self._children(ext):
            if self._tag(f) != "activiti:field":
                self._reject(f, context + "/extensionElements")
                continue
            fattrs = self._attrs(f)
            fname = fattrs.pop("name", "")
            options: List[Tuple[ValueKind, str]] = []
            if "stringValue" in fattrs:
                options.append((ValueKind.STRING, fattrs.pop("stringValue")))
            if "expression" in fattrs:
                options.append((ValueKind.EXPRESSION, fattrs.pop("expression")))
            for extra in fattrs:
                self.unsupported.append(f"activiti:field/@{extra}")
            for sub in self._children(f):
                stag = self._tag(sub)
                self._no_attrs(sub)
                if stag == "activiti:string":
                    options.append((ValueKind.STRING, _text_of(self, sub)))
                elif stag == "activiti:expression":
                    options.append((ValueKind.EXPRESSION, _text_of(self, sub)))
                else:
                    self._reject(sub, "activiti:field")
            if not fname or len(options) != 1:
                self.unsupported.append(f"activiti:field[@name={fname}]")
                continue
            out.append(FieldInjection(fname, options[0][0], options[0][1]))
        return out

    def _generic(self, el: ET.Element, kind: NodeKind, attrs: Dict[str, str]) -> GenericDetail:
        tag = _KIND_TAG[kind]
        out = dict(attrs)
        for child in self._children(el):
            ctag = self._tag(child)
            if ctag == "documentation" and DOCUMENTATION_KEY not in out:
                self._no_attrs(child)
                out[DOCUMENTATION_KEY] = _text_of(self, child)
            elif ctag == "script" and kind is NodeKind.SCRIPT_TASK and SCRIPT_KEY not in out:
                self._no_attrs(child)
                out[SCRIPT_KEY] = _text_of(self, child)
            elif ctag == "extensionElements" and kind.is_task:
                for inj in self._fields(child, tag):
                    prefix = FIELD_STRING_PREFIX if inj.value_kind is ValueKind.STRING else FIELD_EXPRESSION_PREFIX
                    out[prefix + inj.field_name] = inj.value
            else:
                self._reject(child, tag)
        return GenericDetail(out)


def _text_of(parser: _Parser, el: ET.Element) -> str:
    for child in el:
        if isinstance(child.tag, str):
            parser._reject(child, parser._tag(el))
    return el.text or ""


def _split_names(value: Optional[str]) -> FrozenSet[str]:
    if value is None or value.strip() == "":
        return frozenset()
    return frozenset(part.strip() for part in value.split(","))


def parse_bpmn(xml_text: Union[str, bytes], *, extension_ns: str = ACTIVITI_NS) -> ProcessModel:
    """Parse a BPMN 2.0 XML document into a :class:`ProcessModel`.

    Parsing is strict: any element or attribute outside the supported subset
    raises :class:`UnsupportedConstruct` naming every offending item.
    Diagram-interchange (``bpmndi``) content is ignored.
    """
    return _Parser(extension_ns).parse(xml_text)


# ---------------------------------------------------------------------------------
# canonical serialization
# ---------------------------------------------------------------------------------

_GROUP_ORDER = {k: 0 for k in EVENT_KINDS}
_GROUP_ORDER.update({k: 1 for k in TASK_KINDS})
_GROUP_ORDER.update({k: 2 for k in GATEWAY_KINDS})
_GROUP_ORDER.update({k: 3 for k in DATA_KINDS})


def _esc_text(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace("\r", "&#13;")


def _esc_attr(s: str) -> str:
    return (
        _esc_text(s)
        .replace('"', "&quot;")
        .replace("\n", "&#10;")
        .replace("\t", "&#9;")
    )


def _open(tag: str, attrs: List[Tuple[str, Optional[str]]], empty: bool) -> str:
    parts = [tag] + [f'{k}="{_esc_attr(v)}"' for k, v in attrs if v is not None]
    return "<" + " ".join(parts) + ("/>" if empty else ">")


def _element(indent: str, tag: str, attrs, children: List[str], text: Optional[str] = None) -> List[str]:
    if text is not None:
        return [indent + _open(tag, attrs, False) + _esc_text(text) + f"</{tag}>"]
    if not children:
        return [indent + _open(tag, attrs, True)]
    return [indent + _open(tag, attrs, False), *children, f"{indent}</{tag}>"]


def _field_lines(indent: str, injections: Iterable[Tuple[str, ValueKind, str]]) -> List[str]:
    lines = []
    for name, vkind, value in sorted(injections, key=lambda t: t[0]):
        key = "stringValue" if vkind is ValueKind.STRING else "expression"
        lines += _element(indent + "  ", "activiti:field", [("name", name), (key, value)], [])
    if not lines:
        return []
    return [indent + "<extensionElements>", *lines, indent + "</extensionElements>"]


def _node_lines(node: FlowNode, indent: str) -> List[str]:
    tag = _KIND_TAG[node.kind]
    attrs: List[Tuple[str, Optional[str]]] = [("id", node.id), ("name", node.name)]
    inner = indent + "  "
    children: List[str] = []
    d = node.detail
    if isinstance(d, UserTaskDetail):
        attrs += [
            ("activiti:assignee", d.assignee),
            ("activiti:candidateUsers", ",".join(sorted(d.candidate_users)) or None),
            ("activiti:candidateGroups", ",".join(sorted(d.candidate_groups)) or None),
            ("activiti:dueDate", d.due_date),
            ("activiti:formKey", d.form_key),
        ]
        if d.description is not None:
            children += _element(inner, "documentation", [], [], d.description)
    elif isinstance(d, JavaServiceTaskDetail):
        attrs += [
            ("activiti:" + _CALL_ATTR_OF[d.call_type], d.target),
            ("activiti:resultVariableName", d.result_variable),
        ]
        children += _field_lines(inner, ((f.field_name, f.value_kind, f.value) for f in d.field_injections))
    else:
        if node.kind in _SERVICE_TYPE:
            attrs.append(("activiti:type", _SERVICE_TYPE[node.kind]))
        elif node.kind is NodeKind.WEB_SERVICE_TASK:
            attrs.append(("implementation", _WEB_SERVICE_IMPL))
        plain = []
        fields = []
        for key, value in d.attributes.items():
            if key.startswith(FIELD_STRING_PREFIX):
                fields.append((key[len(FIELD_STRING_PREFIX):], ValueKind.STRING, value))
            elif key.startswith(FIELD_EXPRESSION_PREFIX):
                fields.append((key[len(FIELD_EXPRESSION_PREFIX):], ValueKind.EXPRESSION, value))
            elif key not in (DOCUMENTATION_KEY, SCRIPT_KEY):
                plain.append((key, value))
        attrs += sorted(plain)
        if DOCUMENTATION_KEY in d.attributes:
            children += _element(inner, "documentation", [], [], d.attributes[DOCUMENTATION_KEY])
        children += _field_lines(inner, fields)
        if SCRIPT_KEY in d.attributes:
            children += _element(inner, "script", [], [], d.attributes[SCRIPT_KEY])
    return _element(indent, tag, attrs, children)


def _flow_lines(flow: SequenceFlow, indent: str) -> List[str]:
    attrs = [
        ("id", flow.id),
        ("name", flow.name),
        ("sourceRef", flow.source_ref),
        ("targetRef", flow.target_ref),
    ]
    children: List[str] = []
    if flow.condition_expression is not None:
        children = _element(
            indent + "  ",
            "conditionExpression",
            [("xsi:type", "tFormalExpression")],
            [],
            flow.condition_expression,
        )
    return _element(indent, "sequenceFlow", attrs, children)


def serialize_bpmn(model: ProcessModel, *, extension_ns: str = ACTIVITI_NS) -> str:
    """Emit canonical BPMN XML for ``model``.

    Nodes are grouped (events, tasks, gateways, data objects) and sorted by id
    within each group; sequence flows follow, sorted by id.  Attribute order is
    fixed per element kind.  Equal models always yield identical text.
    """
    body: List[str] = []
    ordered = sorted(model.nodes.values(), key=lambda n: (_GROUP_ORDER[n.kind], n.id))
    for node in ordered:
        body += _node_lines(node, "    ")
    for fid in sorted(model.flows):
        body += _flow_lines(model.flows[fid], "    ")
    proc_attrs = [("id", model.process_id), ("name", model.process_name)] + sorted(
        model.attributes.items()
    )
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        _open(
            "definitions",
            [
                ("xmlns", BPMN_NS),
                ("xmlns:activiti", extension_ns),
                ("xmlns:xsi", XSI_NS),
                ("targetNamespace", TARGET_NAMESPACE),
            ],
            False,
        ),
        *_element("  ", "process", proc_attrs, body),
        "</definitions>",
    ]
    return "\n".join(lines) + "\n"
