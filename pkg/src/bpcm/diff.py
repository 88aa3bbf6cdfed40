"""Semantic, id-matched differencing of two process models.

Records are emitted in the canonical apply order:

1. flow removals          5. node modifications
2. node deletions         6. flow modifications
3. node additions         7. process-level changes
4. flow additions

Within a group records are sorted by element id.  Within one element the
field order is fixed: name first, then the detail fields in the order of
:data:`~bpcm.taxonomy.USER_TASK_MODIFICATIONS` (user tasks), call type /
field injections by name / result variable (Java service tasks) or, for
generic nodes, removed attributes before kept or added ones, each by key.  Flow fields follow
:data:`~bpcm.taxonomy.FLOW_ATTRIBUTES`; process-level changes are name,
attributes by key, then id.

This ordering keeps every intermediate model free of dangling flows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

from .clock import Clock, IdFactory, random_ids, utc_now
from .errors import InvalidModel
from .model import (
    FlowNode,
    GenericDetail,
    JavaServiceTaskDetail,
    ProcessModel,
    SequenceFlow,
    UserTaskDetail,
)
from .taxonomy import (
    FLOW_ATTRIBUTES,
    USER_TASK_MODIFICATIONS,
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
    GenericModified,
    GenericRemoved,
    JavaServiceTaskModification,
    ModifyGeneric,
    ModifyJavaServiceTask,
    ModifyUserTask,
    Provenance,
    Rename,
    ResultVariableChange,
    UserTaskModification,
    classify,
    flow_change,
    generic_change,
    task_change,
    validate_provenance,
)


def next_version(tag: str) -> str:
    if not tag.startswith("v") or not tag[1:].isdigit():
        raise ValueError(f"malformed version tag {tag!r}")
    return f"v{int(tag[1:]) + 1}"


def field_diff_user_task(old: UserTaskDetail, new: UserTaskDetail) -> List[UserTaskModification]:
    """One modification per differing field, in fixed field order."""
    out = []
    for mod_type in USER_TASK_MODIFICATIONS:
        a = getattr(old, mod_type.field)
        b = getattr(new, mod_type.field)
        if a != b:
            out.append(mod_type(a, b))
    return out


def field_diff_service_task(
    old: JavaServiceTaskDetail, new: JavaServiceTaskDetail
) -> List[JavaServiceTaskModification]:
    out: List[JavaServiceTaskModification] = []
    if (old.call_type, old.target) != (new.call_type, new.target):
        out.append(CallTypeChange(old.call_type, old.target, new.call_type, new.target))
    before = {f.field_name: f for f in old.field_injections}
    after = {f.field_name: f for f in new.field_injections}
    for name in sorted(before.keys() | after.keys()):
        a, b = before.get(name), after.get(name)
        if b is None:
            out.append(FieldInjectionRemoved(a))
        elif a is None:
            out.append(FieldInjectionAdded(b))
        elif a != b:
            out.append(FieldInjectionModified(name, a.value_kind, a.value, b.value_kind, b.value))
    if old.result_variable != new.result_variable:
        out.append(ResultVariableChange(old.result_variable, new.result_variable))
    return out


def _removal(node: FlowNode) -> ConstructChange:
    if node.kind.is_task:
        return task_change(node.kind, node.id, Delete(node))
    return generic_change(classify(node.kind), node.id, GenericRemoved(node))


def _addition(node: FlowNode) -> ConstructChange:
    if node.kind.is_task:
        return task_change(node.kind, node.id, Add(node))
    return generic_change(classify(node.kind), node.id, GenericAdded(node))


def _attribute_diff(old: GenericDetail, new: GenericDetail):
    # Removed keys go first: a field injection may switch between its string
    # and expression key, and both must never be present at once.
    keys = sorted(old.attributes.keys() | new.attributes.keys(), key=lambda k: (k in new.attributes, k))
    for key in keys:
        a, b = old.attributes.get(key), new.attributes.get(key)
        if a != b:
            yield key, a, b


def _node_modifications(a: FlowNode, b: FlowNode) -> List[ConstructChange]:
    kind = a.kind
    out: List[ConstructChange] = []
    if not kind.is_task:
        category = classify(kind)
        if a.name != b.name:
            out.append(generic_change(category, a.id, GenericModified("name", a.name, b.name)))
        for key, x, y in _attribute_diff(a.detail, b.detail):
            out.append(generic_change(category, a.id, GenericModified(key, x, y)))
        return out
    if a.name != b.name:
        out.append(task_change(kind, a.id, Rename(a.name, b.name)))
    if isinstance(a.detail, UserTaskDetail):
        ops = [ModifyUserTask(m) for m in field_diff_user_task(a.detail, b.detail)]
    elif isinstance(a.detail, JavaServiceTaskDetail):
        ops = [ModifyJavaServiceTask(m) for m in field_diff_service_task(a.detail, b.detail)]
    else:
        ops = [ModifyGeneric(k, x, y) for k, x, y in _attribute_diff(a.detail, b.detail)]
    out.extend(task_change(kind, a.id, op) for op in ops)
    return out


def _flow_modifications(a: SequenceFlow, b: SequenceFlow) -> List[ConstructChange]:
    return [
        flow_change(FlowModified(a.id, attr, getattr(a, attr), getattr(b, attr)))
        for attr in FLOW_ATTRIBUTES
        if getattr(a, attr) != getattr(b, attr)
    ]


def _process_changes(old: ProcessModel, new: ProcessModel) -> List[ConstructChange]:
    pid = old.process_id
    cat = Category.PROCESS_INITIALIZATION
    out = []
    if old.process_name != new.process_name:
        out.append(generic_change(cat, pid, GenericModified("name", old.process_name, new.process_name)))
    for key in sorted(old.attributes.keys() | new.attributes.keys()):
        a, b = old.attributes.get(key), new.attributes.get(key)
        if a != b:
            out.append(generic_change(cat, pid, GenericModified(key, a, b)))
    if old.process_id != new.process_id:
        out.append(generic_change(cat, pid, GenericModified("id", old.process_id, new.process_id)))
    return out


def compute_changes(old: ProcessModel, new: ProcessModel) -> List[ConstructChange]:
    """The canonical, ordered list of construct changes turning ``old`` into ``new``."""
    if not isinstance(old, ProcessModel) or not isinstance(new, ProcessModel):
        raise InvalidModel("diff requires two ProcessModel values")
    on, nn = old.nodes, new.nodes
    replaced = {i for i in on.keys() & nn.keys() if on[i].kind is not nn[i].kind}
    deleted = (on.keys() - nn.keys()) | replaced
    added = (nn.keys() - on.keys()) | replaced

    of, nf = old.flows, new.flows
    # A surviving flow that touches a deleted node must leave before the node does.
    rerouted = {
        i for i in of.keys() & nf.keys() if of[i].source_ref in deleted or of[i].target_ref in deleted
    }
    flows_out = (of.keys() - nf.keys()) | rerouted
    flows_in = (nf.keys() - of.keys()) | rerouted

    changes: List[ConstructChange] = []
    changes += [flow_change(FlowRemoved(of[i])) for i in sorted(flows_out)]
    changes += [_removal(on[i]) for i in sorted(deleted)]
    changes += [_addition(nn[i]) for i in sorted(added)]
    changes += [flow_change(FlowAdded(nf[i])) for i in sorted(flows_in)]
    for i in sorted((on.keys() & nn.keys()) - replaced):
        changes += _node_modifications(on[i], nn[i])
    for i in sorted((of.keys() & nf.keys()) - rerouted):
        changes += _flow_modifications(of[i], nf[i])
    changes += _process_changes(old, new)
    return changes


@dataclass
class DiffRequest:
    old_model: ProcessModel
    new_model: ProcessModel
    provenance: Provenance
    clock: Clock = utc_now
    ids: IdFactory = random_ids
    base_version: str = "v0"
    result_version: Optional[str] = None
    set_id: Optional[str] = field(default=None)

    def __post_init__(self) -> None:
        problems = validate_provenance(self.provenance)
        if problems:
            raise ValueError("; ".join(map(str, problems)))


def diff(request: DiffRequest) -> ChangeSet:
    """Compute the change set transforming ``request.old_model`` into ``request.new_model``.

    All records share one timestamp drawn once from the request's clock.
    """
    changes = compute_changes(request.old_model, request.new_model)
    ts = request.clock()
    records = tuple(ChangeRecord(request.ids(ts), ts, request.provenance, c) for c in changes)
    return ChangeSet(
        request.set_id or request.ids(ts),
        request.base_version,
        request.result_version or next_version(request.base_version),
        records,
    )


def diff_models(old: ProcessModel, new: ProcessModel, provenance: Provenance, **options) -> ChangeSet:
    """Shorthand for ``diff(DiffRequest(old, new, provenance, **options))``."""
    return diff(DiffRequest(old, new, provenance, **options))
