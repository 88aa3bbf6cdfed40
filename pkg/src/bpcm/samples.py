"""The Create Quote process used throughout the tests and demos.

Four constructs: start -> user task "Enter Quotation" -> Java service task
"Register Demand" -> end.  Ids and attribute values are fixture constants.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path
from typing import Callable, List, NamedTuple, Union

from .clock import Clock, IdFactory, random_ids, utc_now
from .diff import diff_models
from .journal import Journal
from .model import (
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
from .taxonomy import Provenance

QUOTE_DESCRIPTION = "Enter the quotation for the customer request."


def create_quote() -> ProcessModel:
    return ProcessModel.build(
        "createQuote",
        nodes=[
            FlowNode("start1", NodeKind.START_EVENT, GenericDetail(), "Start"),
            FlowNode(
                "ut1",
                NodeKind.USER_TASK,
                UserTaskDetail(assignee="alice", description=QUOTE_DESCRIPTION),
                "Enter Quotation",
            ),
            FlowNode(
                "st1",
                NodeKind.JAVA_SERVICE_TASK,
                JavaServiceTaskDetail(CallType.JAVA_CLASS, "com.acme.RegisterDemand"),
                "Register Demand",
            ),
            FlowNode("end1", NodeKind.END_EVENT, GenericDetail(), "End"),
        ],
        flows=[
            SequenceFlow("f1", "start1", "ut1"),
            SequenceFlow("f2", "ut1", "st1"),
            SequenceFlow("f3", "st1", "end1"),
        ],
        process_name="Create Quote",
        attributes={"isExecutable": "true"},
    )


def _user(model: ProcessModel, **fields) -> ProcessModel:
    node = model.nodes["ut1"]
    return replace(model, nodes={**model.nodes, "ut1": replace(node, detail=replace(node.detail, **fields))})


def _service(model: ProcessModel, **fields) -> ProcessModel:
    node = model.nodes["st1"]
    return replace(model, nodes={**model.nodes, "st1": replace(node, detail=replace(node.detail, **fields))})


class ScenarioStep(NamedTuple):
    agent: str
    cause: str
    edit: Callable[[ProcessModel], ProcessModel]


QUOTE_DELEGATE = "${registerDemandDelegate}"
CUSTOMER_FIELD = FieldInjection("customerChannel", ValueKind.STRING, "web")

# Seven commits on the Create Quote process: three on the user task, four on
# the service task.  The switch to a delegate expression also moves the
# endpoint, so one CallTypeChange covers both.
QUOTE_SCENARIO: List[ScenarioStep] = [
    ScenarioStep("alice", "assignee replaced", lambda m: _user(m, assignee="bob")),
    ScenarioStep("alice", "description clarified",
                 lambda m: _user(m, description="Enter and price the quotation for the customer request.")),
    ScenarioStep("bob", "due date extended", lambda m: _user(m, due_date="2024-07-01")),
    ScenarioStep("carol", "invoke through a delegate bean",
                 lambda m: _service(m, call_type=CallType.DELEGATE_EXPRESSION, target=QUOTE_DELEGATE)),
    ScenarioStep("carol", "pass the customer channel", lambda m: _service(m, field_injections=(CUSTOMER_FIELD,))),
    ScenarioStep("carol", "channel no longer needed", lambda m: _service(m, field_injections=())),
    ScenarioStep("bob", "keep the demand id", lambda m: _service(m, result_variable="demandId")),
]
SCENARIO_AGENTS = ("alice", "bob", "carol")


def build_quote_journal(
    path: Union[str, Path],
    *,
    clock: Clock = utc_now,
    ids: IdFactory = random_ids,
    acl=SCENARIO_AGENTS,
) -> Journal:
    """Create a journal at ``path`` and commit the seven scenario changes."""
    journal = Journal.init(path, create_quote(), acl, clock=clock)
    for step in QUOTE_SCENARIO:
        head = journal.head()
        cs = diff_models(
            head, step.edit(head), Provenance(step.agent, step.cause),
            clock=clock, ids=ids, base_version=journal.head_version,
        )
        journal.commit(cs)
    return journal
