"""Apply, invert and replay change sets.

``apply`` is all-or-nothing: every record checks its stored OLD value (or
snapshot) against the working model and the first mismatch aborts with a
:class:`~bpcm.errors.ConflictError`.  The input model is never touched.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Dict, Optional, Sequence

from .clock import Clock, IdFactory, random_ids, utc_now
from .errors import (
    ConflictError,
    DuplicateAdd,
    InvalidModel,
    MissingElement,
    UnsupportedChange,
    VersionChainBroken,
)
from .model import (
    FlowNode,
    GenericDetail,
    JavaServiceTaskDetail,
    ProcessModel,
    SequenceFlow,
    UserTaskDetail,
)
from .taxonomy import (
    PLACEHOLDER_CATEGORIES,
    Add,
    CallTypeChange,
    Category,
    ChangeRecord,
    ChangeSet,
    ConstructChange,
    Delete,
    FieldInjectionAdded,
    FieldInjectionModified,
    FieldInjectionRemoved,
    FlowAdded,
    FlowModified,
    FlowRemoved,
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
    classify,
)


class _Working:
    """Mutable scratch copy of a model; discarded on failure."""

    def __init__(self, model: ProcessModel) -> None:
        self.process_id = model.process_id
        self.process_name = model.process_name
        self.attributes: Dict[str, str] = dict(model.attributes)
        self.nodes: Dict[str, FlowNode] = dict(model.nodes)
        self.flows: Dict[str, SequenceFlow] = dict(model.flows)

    def freeze(self) -> ProcessModel:
        return ProcessModel(self.process_id, self.nodes, self.flows, self.process_name, self.attributes)


def _expect(index: int, element_id: str, expected: object, found: object, what: str = "value mismatch") -> None:
    if expected != found:
        raise ConflictError(index, element_id, expected, found, what)


def _node(w: _Working, index: int, element_id: str) -> FlowNode:
    node = w.nodes.get(element_id)
    if node is None:
        raise MissingElement(index, element_id)
    return node


def _check_free(w: _Working, index: int, element_id: str) -> None:
    found = w.nodes.get(element_id) or w.flows.get(element_id)
    if found is not None:
        raise DuplicateAdd(index, element_id, found)


def _add_node(w: _Working, index: int, node: FlowNode) -> None:
    _check_free(w, index, node.id)
    w.nodes[node.id] = node


def _delete_node(w: _Working, index: int, snapshot: FlowNode) -> None:
    current = _node(w, index, snapshot.id)
    _expect(index, snapshot.id, snapshot, current, "node differs from its snapshot")
    for flow in w.flows.values():
        if snapshot.id in (flow.source_ref, flow.target_ref):
            raise ConflictError(index, snapshot.id, "no incident flows", flow.id, "node still referenced")
    del w.nodes[snapshot.id]


def _rebuild(index: int, node: FlowNode, **changes) -> FlowNode:
    try:
        return replace(node, **changes)
    except InvalidModel as exc:
        raise ConflictError(index, node.id, "valid result", str(exc), "modification yields invalid node")


def _apply_user_task(index: int, node: FlowNode, mod) -> FlowNode:
    detail: UserTaskDetail = node.detail
    _expect(index, node.id, mod.old, getattr(detail, mod.field))
    try:
        new_detail = replace(detail, **{mod.field: mod.new})
    except InvalidModel as exc:
        raise ConflictError(index, node.id, "valid result", str(exc), "modification yields invalid node")
    return _rebuild(index, node, detail=new_detail)


def _apply_java_task(index: int, node: FlowNode, mod) -> FlowNode:
    d: JavaServiceTaskDetail = node.detail
    injections = {f.field_name: f for f in d.field_injections}
    if isinstance(mod, CallTypeChange):
        _expect(index, node.id, (mod.old_call, mod.old_target), (d.call_type, d.target))
        changes = {"call_type": mod.new_call, "target": mod.new_target}
    elif isinstance(mod, FieldInjectionAdded):
        name = mod.injection.field_name
        if name in injections:
            raise DuplicateAdd(index, f"{node.id}/{name}", injections[name])
        injections[name] = mod.injection
        changes = {"field_injections": tuple(injections.values())}
    elif isinstance(mod, FieldInjectionRemoved):
        name = mod.injection.field_name
        _expect(index, node.id, mod.injection, injections.get(name))
        del injections[name]
        changes = {"field_injections": tuple(injections.values())}
    elif isinstance(mod, FieldInjectionModified):
        cur = injections.get(mod.field_name)
        found = None if cur is None else (cur.value_kind, cur.value)
        _expect(index, node.id, (mod.old_kind, mod.old_value), found)
        injections[mod.field_name] = replace(cur, value_kind=mod.new_kind, value=mod.new_value)
        changes = {"field_injections": tuple(injections.values())}
    elif isinstance(mod, ResultVariableChange):
        _expect(index, node.id, mod.old, d.result_variable)
        changes = {"result_variable": mod.new}
    else:
        raise TypeError(f"unknown Java service task modification {mod!r}")
    try:
        new_detail = replace(d, **changes)
    except InvalidModel as exc:
        raise ConflictError(index, node.id, "valid result", str(exc), "modification yields invalid node")
    return _rebuild(index, node, detail=new_detail)


def _set_attribute(index: int, node: FlowNode, attribute: str, old, new) -> FlowNode:
    if attribute == "name":
        _expect(index, node.id, old, node.name)
        return _rebuild(index, node, name=new)
    attrs = dict(node.detail.attributes)
    _expect(index, node.id, old, attrs.get(attribute))
    if new is None:
        attrs.pop(attribute, None)
    else:
        attrs[attribute] = new
    return _rebuild(index, node, detail=GenericDetail(attrs))


def _apply_task(w: _Working, index: int, tc: TaskChange) -> None:
    op = tc.op
    if isinstance(op, (Add, Delete)):
        _expect(index, tc.element_id, tc.task_kind, op.node.kind, "task kind mismatch")
        _expect(index, tc.element_id, tc.element_id, op.node.id, "snapshot id mismatch")
        if isinstance(op, Add):
            _add_node(w, index, op.node)
        else:
            _delete_node(w, index, op.node)
        return
    node = _node(w, index, tc.element_id)
    _expect(index, node.id, tc.task_kind, node.kind, "task kind mismatch")
    if isinstance(op, Rename):
        _expect(index, node.id, op.old_name, node.name)
        node = _rebuild(index, node, name=op.new_name)
    elif isinstance(op, ModifyUserTask):
        _expect(index, node.id, UserTaskDetail, type(node.detail), "task kind mismatch")
        node = _apply_user_task(index, node, op.modification)
    elif isinstance(op, ModifyJavaServiceTask):
        _expect(index, node.id, JavaServiceTaskDetail, type(node.detail), "task kind mismatch")
        node = _apply_java_task(index, node, op.modification)
    elif isinstance(op, ModifyGeneric):
        if not isinstance(node.detail, GenericDetail):
            raise ConflictError(index, node.id, "generic task", node.kind, "task kind mismatch")
        node = _set_attribute(index, node, op.attribute, op.old, op.new)
    else:
        raise TypeError(f"unknown task op {op!r}")
    w.nodes[node.id] = node


def _check_refs(w: _Working, index: int, flow: SequenceFlow) -> None:
    for ref in (flow.source_ref, flow.target_ref):
        if ref not in w.nodes:
            raise MissingElement(index, ref, expected=f"node referenced by flow {flow.id}")


def _apply_flow(w: _Working, index: int, fc) -> None:
    if isinstance(fc, FlowAdded):
        _check_free(w, index, fc.flow.id)
        _check_refs(w, index, fc.flow)
        w.flows[fc.flow.id] = fc.flow
    elif isinstance(fc, FlowRemoved):
        current = w.flows.get(fc.flow.id)
        if current is None:
            raise MissingElement(index, fc.flow.id)
        _expect(index, fc.flow.id, fc.flow, current, "flow differs from its snapshot")
        del w.flows[fc.flow.id]
    elif isinstance(fc, FlowModified):
        current = w.flows.get(fc.flow_id)
        if current is None:
            raise MissingElement(index, fc.flow_id)
        _expect(index, fc.flow_id, fc.old, getattr(current, fc.attribute))
        try:
            updated = replace(current, **{fc.attribute: fc.new})
        except (InvalidModel, TypeError) as exc:
            raise ConflictError(index, fc.flow_id, "valid result", str(exc), "modification yields invalid flow")
        _check_refs(w, index, updated)
        w.flows[fc.flow_id] = updated
    else:
        raise TypeError(f"unknown flow change {fc!r}")


def _apply_process(w: _Working, index: int, op) -> None:
    if not isinstance(op, GenericModified):
        raise ConflictError(index, w.process_id, "process attribute change", type(op).__name__, "bad payload")
    if op.attribute == "id":
        _expect(index, w.process_id, op.old, w.process_id)
        if not op.new:
            raise ConflictError(index, w.process_id, "non-empty id", op.new, "invalid process id")
        w.process_id = op.new
    elif op.attribute == "name":
        _expect(index, w.process_id, op.old, w.process_name)
        w.process_name = op.new
    else:
        _expect(index, w.process_id, op.old, w.attributes.get(op.attribute))
        if op.new is None:
            w.attributes.pop(op.attribute, None)
        else:
            w.attributes[op.attribute] = op.new


def _apply_generic(w: _Working, index: int, category: Category, gc: GenericChange) -> None:
    if category in PLACEHOLDER_CATEGORIES:
        raise UnsupportedChange(
            f"record {index}: {category} has a placeholder payload with no model semantics"
        )
    op = gc.op
    if category is Category.PROCESS_INITIALIZATION:
        _apply_process(w, index, op)
        return
    if isinstance(op, (GenericAdded, GenericRemoved)):
        _expect(index, gc.element_id, category, classify(op.node.kind), "category mismatch")
        _expect(index, gc.element_id, gc.element_id, op.node.id, "snapshot id mismatch")
        if isinstance(op, GenericAdded):
            _add_node(w, index, op.node)
        else:
            _delete_node(w, index, op.node)
        return
    node = _node(w, index, gc.element_id)
    _expect(index, node.id, category, classify(node.kind), "category mismatch")
    w.nodes[node.id] = _set_attribute(index, node, op.attribute, op.old, op.new)


def apply_change(w: _Working, index: int, change: ConstructChange) -> None:
    payload = change.payload
    if isinstance(payload, TaskChange):
        _apply_task(w, index, payload)
    elif isinstance(payload, GenericChange):
        _apply_generic(w, index, change.category, payload)
    else:
        _apply_flow(w, index, payload)


def apply(change_set: ChangeSet, model: ProcessModel) -> ProcessModel:
    """Apply every record of ``change_set`` to ``model`` and return the new model."""
    w = _Working(model)
    for index, record in enumerate(change_set.records):
        apply_change(w, index, record.change)
    return w.freeze()


# --- inversion --------------------------------------------------------------------

_INVERSE_MOD = {
    FieldInjectionAdded: FieldInjectionRemoved,
    FieldInjectionRemoved: FieldInjectionAdded,
}


def invert_modification(mod):
    if isinstance(mod, CallTypeChange):
        return CallTypeChange(mod.new_call, mod.new_target, mod.old_call, mod.old_target)
    if type(mod) in _INVERSE_MOD:
        return _INVERSE_MOD[type(mod)](mod.injection)
    if isinstance(mod, FieldInjectionModified):
        return FieldInjectionModified(mod.field_name, mod.new_kind, mod.new_value, mod.old_kind, mod.old_value)
    return type(mod)(mod.new, mod.old)


def invert_change(change: ConstructChange) -> ConstructChange:
    p = change.payload
    if isinstance(p, TaskChange):
        op = p.op
        if isinstance(op, Add):
            inv = Delete(op.node)
        elif isinstance(op, Delete):
            inv = Add(op.node)
        elif isinstance(op, Rename):
            inv = Rename(op.new_name, op.old_name)
        elif isinstance(op, ModifyUserTask):
            inv = ModifyUserTask(invert_modification(op.modification))
        elif isinstance(op, ModifyJavaServiceTask):
            inv = ModifyJavaServiceTask(invert_modification(op.modification))
        else:
            inv = ModifyGeneric(op.attribute, op.new, op.old)
        return ConstructChange(change.category, TaskChange(p.task_kind, p.element_id, inv))
    if isinstance(p, GenericChange):
        op = p.op
        if isinstance(op, GenericAdded):
            gop = GenericRemoved(op.node)
        elif isinstance(op, GenericRemoved):
            gop = GenericAdded(op.node)
        else:
            gop = GenericModified(op.attribute, op.new, op.old)
        return ConstructChange(change.category, GenericChange(p.element_id, gop))
    if isinstance(p, FlowAdded):
        return ConstructChange(change.category, FlowRemoved(p.flow))
    if isinstance(p, FlowRemoved):
        return ConstructChange(change.category, FlowAdded(p.flow))
    return ConstructChange(change.category, FlowModified(p.flow_id, p.attribute, p.new, p.old))


def invert(
    change_set: ChangeSet,
    *,
    provenance: Optional[Provenance] = None,
    clock: Clock = utc_now,
    ids: IdFactory = random_ids,
    set_id: Optional[str] = None,
) -> ChangeSet:
    """Return the set that undoes ``change_set``.

    Records come out in reverse order with old and new swapped.  Unless
    ``provenance`` is given, each inverse record keeps the original agent and
    gets the cause ``"revert of <set_id>"``.
    """
    ts = clock()
    records = []
    for rec in reversed(change_set.records):
        prov = provenance or Provenance(
            rec.provenance.agent_name,
            f"revert of {change_set.set_id}",
            f"inverse of record {rec.record_id}",
        )
        records.append(ChangeRecord(ids(ts), ts, prov, invert_change(rec.change)))
    return ChangeSet(
        set_id or ids(ts),
        change_set.result_version,
        change_set.base_version,
        tuple(records),
    )


def replay(sets: Sequence[ChangeSet], initial: ProcessModel) -> ProcessModel:
    """Left fold of :func:`apply` over ``sets`` starting from ``initial``."""
    model = initial
    previous: Optional[ChangeSet] = None
    for cs in sets:
        if previous is not None and cs.base_version != previous.result_version:
            raise VersionChainBroken(previous.result_version, cs.base_version)
        try:
            model = apply(cs, model)
        except ConflictError as exc:
            raise exc.in_set(cs.set_id) from exc
        previous = cs
    return model
