"""Seeded random generators for process models and perturbed pairs."""

from __future__ import annotations

import random
from dataclasses import replace
from typing import Dict, List, Optional

from bpcm.model import (
    DOCUMENTATION_KEY,
    FIELD_EXPRESSION_PREFIX,
    FIELD_STRING_PREFIX,
    SCRIPT_KEY,
    CallType,
    FieldInjection,
    FlowNode,
    GenericDetail,
    JavaServiceTaskDetail,
    NodeKind,
    ProcessModel,
    SequenceFlow,
    UserTaskDetail,
    ValueKind,
)

# Values exercise XML escaping: markup characters, quotes, whitespace, non-ASCII.
TEXTS = ["alpha", "beta", "a & b", "<x/>", 'say "hi"', "it's", "tab\there", "two\nlines", "cr\r\nlf",
         "  padded  ", "", "naïve ü", "${expr}", "#{bean.run()}", "]]>"]
NAMES = ["alice", "bob", "carol", "dave", "erin", "frank"]
GROUPS = ["sales", "ops", "finance", "legal"]
FIELDS = ["to", "subject", "text", "url", "retries"]
ATTR_KEYS = ["priority", "async", "activiti:async", "activiti:exclusive", "category"]
ALL_KINDS = list(NodeKind)
# The two detailed task kinds are weighted up so their field diffs get exercised.
KIND_POOL = ALL_KINDS + [NodeKind.USER_TASK, NodeKind.JAVA_SERVICE_TASK] * 3


def _opt(rng: random.Random, pool: List[str], p_none: float = 0.4) -> Optional[str]:
    return None if rng.random() < p_none else rng.choice(pool)


def _subset(rng: random.Random, pool: List[str]) -> frozenset:
    return frozenset(x for x in pool if rng.random() < 0.3)


def user_detail(rng: random.Random) -> UserTaskDetail:
    return UserTaskDetail(
        assignee=_opt(rng, NAMES),
        candidate_users=_subset(rng, NAMES),
        candidate_groups=_subset(rng, GROUPS),
        due_date=_opt(rng, ["2024-07-01", "P3D", "${due}"]),
        description=_opt(rng, TEXTS),
        form_key=_opt(rng, ["quote.form", "review.form"]),
    )


def injection(rng: random.Random, name: str) -> FieldInjection:
    return FieldInjection(name, rng.choice(list(ValueKind)), rng.choice(TEXTS))


def java_detail(rng: random.Random) -> JavaServiceTaskDetail:
    call = rng.choice(list(CallType))
    target = {
        CallType.JAVA_CLASS: rng.choice(["com.acme.A", "com.acme.B", "org.x.Y"]),
        CallType.DELEGATE_EXPRESSION: rng.choice(["${d1}", "${d2}"]),
        CallType.EXPRESSION: rng.choice(["#{svc.run()}", "#{svc.other(x)}"]),
    }[call]
    names = [f for f in FIELDS if rng.random() < 0.3]
    return JavaServiceTaskDetail(
        call, target, tuple(injection(rng, n) for n in names), _opt(rng, ["result", "out", "score"])
    )


def generic_detail(rng: random.Random, kind: NodeKind) -> GenericDetail:
    attrs: Dict[str, str] = {}
    for key in ATTR_KEYS:
        if rng.random() < 0.25:
            attrs[key] = rng.choice(TEXTS)
    if rng.random() < 0.3:
        attrs[DOCUMENTATION_KEY] = rng.choice(TEXTS)
    if kind is NodeKind.SCRIPT_TASK and rng.random() < 0.6:
        attrs[SCRIPT_KEY] = rng.choice(TEXTS)
    if kind.is_task:
        for f in FIELDS:
            if rng.random() < 0.15:
                prefix = rng.choice([FIELD_STRING_PREFIX, FIELD_EXPRESSION_PREFIX])
                attrs[prefix + f] = rng.choice(TEXTS)
    return GenericDetail(attrs)


def detail_for(rng: random.Random, kind: NodeKind):
    if kind is NodeKind.USER_TASK:
        return user_detail(rng)
    if kind is NodeKind.JAVA_SERVICE_TASK:
        return java_detail(rng)
    return generic_detail(rng, kind)


def node(rng: random.Random, node_id: str, kind: Optional[NodeKind] = None) -> FlowNode:
    kind = kind or rng.choice(KIND_POOL)
    return FlowNode(node_id, kind, detail_for(rng, kind), _opt(rng, TEXTS, 0.2))


def flow(rng: random.Random, flow_id: str, node_ids: List[str]) -> SequenceFlow:
    return SequenceFlow(
        flow_id,
        rng.choice(node_ids),
        rng.choice(node_ids),
        _opt(rng, TEXTS, 0.6),
        _opt(rng, ["${ok}", "${amount > 100}", "a < b"], 0.6),
    )


def random_model(rng: random.Random, max_nodes: int = 30) -> ProcessModel:
    n = rng.randint(0, max_nodes)
    nodes = [node(rng, f"n{i}") for i in range(n)]
    ids = [x.id for x in nodes]
    flows = [flow(rng, f"f{i}", ids) for i in range(rng.randint(0, 2 * n) if n else 0)]
    attrs = {"isExecutable": rng.choice(["true", "false"])} if rng.random() < 0.7 else {}
    return ProcessModel.build(rng.choice(["p", "proc"]), nodes, flows, _opt(rng, TEXTS, 0.3), attrs)


def _tweak_node(rng: random.Random, n: FlowNode) -> FlowNode:
    roll = rng.random()
    if roll < 0.25:
        return replace(n, name=_opt(rng, TEXTS, 0.2))
    if roll < 0.35:  # kind change under the same id
        kind = rng.choice([k for k in ALL_KINDS if k is not n.kind])
        return node(rng, n.id, kind)
    if isinstance(n.detail, UserTaskDetail):
        field_name = rng.choice(["assignee", "candidate_users", "candidate_groups", "due_date",
                                 "description", "form_key"])
        fresh = user_detail(rng)
        return replace(n, detail=replace(n.detail, **{field_name: getattr(fresh, field_name)}))
    if isinstance(n.detail, JavaServiceTaskDetail):
        fresh = java_detail(rng)
        which = rng.random()
        if which < 0.3:
            return replace(n, detail=replace(n.detail, call_type=fresh.call_type, target=fresh.target))
        if which < 0.5:
            return replace(n, detail=replace(n.detail, result_variable=fresh.result_variable))
        inj = {f.field_name: f for f in n.detail.field_injections}
        name = rng.choice(FIELDS)
        if name in inj and rng.random() < 0.5:
            del inj[name]
        else:
            inj[name] = injection(rng, name)
        return replace(n, detail=replace(n.detail, field_injections=tuple(inj.values())))
    attrs = dict(n.detail.attributes)
    fresh = generic_detail(rng, n.kind).attributes
    if attrs and rng.random() < 0.4:
        del attrs[rng.choice(sorted(attrs))]
    for key, value in fresh.items():
        if rng.random() < 0.5:
            attrs[key] = value
    try:
        return replace(n, detail=GenericDetail(attrs))
    except ValueError:  # e.g. a field injection collided under both prefixes
        return n


def perturb(rng: random.Random, model: ProcessModel, edits: Optional[int] = None,
            max_nodes: int = 30) -> ProcessModel:
    """Return a model differing from ``model`` by a random number of edits."""
    nodes = dict(model.nodes)
    flows = dict(model.flows)
    pid, pname, pattrs = model.process_id, model.process_name, dict(model.attributes)
    counter = 0
    for _ in range(edits if edits is not None else rng.randint(0, 8)):
        op = rng.random()
        if op < 0.35 and nodes:
            nid = rng.choice(sorted(nodes))
            nodes[nid] = _tweak_node(rng, nodes[nid])
        elif op < 0.45 and len(nodes) < max_nodes:
            counter += 1
            nid = f"new{counter}_{rng.randrange(10**6)}"
            if nid not in nodes and nid not in flows:
                nodes[nid] = node(rng, nid)
        elif op < 0.55 and nodes:
            nid = rng.choice(sorted(nodes))
            del nodes[nid]
            flows = {k: f for k, f in flows.items() if nid not in (f.source_ref, f.target_ref)}
        elif op < 0.65 and nodes:
            counter += 1
            fid = f"nf{counter}_{rng.randrange(10**6)}"
            if fid not in nodes and fid not in flows:
                flows[fid] = flow(rng, fid, sorted(nodes))
        elif op < 0.72 and flows:
            del flows[rng.choice(sorted(flows))]
        elif op < 0.9 and flows and nodes:
            fid = rng.choice(sorted(flows))
            f = flows[fid]
            attr = rng.choice(["name", "source_ref", "target_ref", "condition_expression"])
            if attr in ("source_ref", "target_ref"):
                flows[fid] = replace(f, **{attr: rng.choice(sorted(nodes))})
            elif attr == "name":
                flows[fid] = replace(f, name=_opt(rng, TEXTS, 0.3))
            else:
                flows[fid] = replace(f, condition_expression=_opt(rng, ["${ok}", "${no}"], 0.3))
        elif op < 0.95:
            pname = _opt(rng, TEXTS, 0.3)
            if rng.random() < 0.5:
                pattrs = {"isExecutable": rng.choice(["true", "false"])} if rng.random() < 0.7 else {}
        else:
            pid = rng.choice(["p", "proc", "renamed"])
    return ProcessModel(pid, nodes, flows, pname, pattrs)


def model_pair(seed: int, max_nodes: int = 30):
    rng = random.Random(seed)
    a = random_model(rng, max_nodes)
    return a, perturb(rng, a, max_nodes=max_nodes)
