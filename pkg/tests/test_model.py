from __future__ import annotations

import random
import xml.etree.ElementTree as ET

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _fixtures import DATA, with_user
from _gen import random_model
from bpcm.errors import DanglingFlowRef, DuplicateId, InvalidModel, MalformedXml, UnsupportedConstruct
from bpcm.model import (
    DOCUMENTATION_KEY,
    FIELD_EXPRESSION_PREFIX,
    FIELD_STRING_PREFIX,
    SCRIPT_KEY,
    TASK_KINDS,
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
    model_equals,
    parse_bpmn,
    serialize_bpmn,
)
from bpcm.samples import QUOTE_DESCRIPTION, create_quote

HEAD = (
    '<definitions xmlns="http://www.omg.org/spec/BPMN/20100524/MODEL" '
    'xmlns:activiti="http://activiti.org/bpmn" '
    'xmlns:xsi="http://www.w3.org/2001/XMLSchema-instance">'
)


def doc(body: str, process_attrs: str = 'id="p"') -> str:
    return f"{HEAD}<process {process_attrs}>{body}</process></definitions>"


def parse_body(body: str) -> ProcessModel:
    return parse_bpmn(doc(body))


class TestFixture:
    def test_fixture_has_four_nodes_and_three_flows(self):
        m = parse_bpmn((DATA / "create_quote.bpmn").read_bytes())
        assert len(m.nodes) == 4
        assert len(m.flows) == 3
        assert m.nodes["ut1"].name == "Enter Quotation"
        assert m.nodes["st1"].name == "Register Demand"

    def test_fixture_equals_sample(self):
        m = parse_bpmn((DATA / "create_quote.bpmn").read_bytes())
        assert model_equals(m, create_quote())
        assert m.nodes["ut1"].detail.description == QUOTE_DESCRIPTION
        assert m.nodes["st1"].detail.call_type is CallType.JAVA_CLASS

    def test_canonical_serialization_is_frozen(self):
        golden = (DATA / "create_quote.canonical.bpmn").read_text(encoding="utf-8")
        assert serialize_bpmn(create_quote()) == golden

    def test_round_trip(self):
        m = create_quote()
        assert model_equals(parse_bpmn(serialize_bpmn(m)), m)

    def test_reordered_document_parses_equal(self):
        # Reverse the process children in the raw document and re-parse.
        root = ET.fromstring((DATA / "create_quote.bpmn").read_bytes())
        process = root.find("{http://www.omg.org/spec/BPMN/20100524/MODEL}process")
        children = list(process)
        for child in children:
            process.remove(child)
        process.extend(reversed(children))
        m = parse_bpmn(ET.tostring(root))
        assert [c.get("id") for c in process][0] == "f2"
        assert model_equals(m, create_quote())
        assert serialize_bpmn(m) == serialize_bpmn(create_quote())


class TestEquality:
    def test_reflexive(self):
        m = create_quote()
        assert model_equals(m, m)

    def test_one_field_differs(self):
        m = create_quote()
        assert not model_equals(m, with_user(m, assignee="bob"))

    def test_sets_compare_as_sets(self):
        a = with_user(create_quote(), candidate_users=frozenset(["bob", "carol"]))
        b = parse_bpmn(serialize_bpmn(a).replace('candidateUsers="bob,carol"', 'candidateUsers="carol, bob"'))
        assert model_equals(a, b)

    def test_description_whitespace_preserved(self):
        a = with_user(create_quote(), description="  spaced\n text ")
        b = with_user(create_quote(), description="spaced text")
        assert not model_equals(a, b)
        assert parse_bpmn(serialize_bpmn(a)).nodes["ut1"].detail.description == "  spaced\n text "


class TestEmptyAndErrors:
    def test_empty_process(self):
        m = parse_body("")
        assert m.nodes == {} and m.flows == {}
        assert "<process id=\"p\"/>" in serialize_bpmn(m)

    def test_dangling_flow(self):
        with pytest.raises(DanglingFlowRef) as info:
            parse_body('<startEvent id="s"/><sequenceFlow id="f" sourceRef="s" targetRef="ghost"/>')
        assert info.value.flow_id == "f"
        assert info.value.ref == "ghost"

    def test_duplicate_id(self):
        with pytest.raises(DuplicateId):
            parse_body('<startEvent id="s"/><endEvent id="s"/>')

    def test_flow_id_clashing_with_node_id(self):
        with pytest.raises(DuplicateId):
            parse_body('<startEvent id="s"/><sequenceFlow id="s" sourceRef="s" targetRef="s"/>')

    def test_malformed(self):
        with pytest.raises(MalformedXml):
            parse_bpmn("<definitions><process")

    def test_malformed_is_value_error(self):
        with pytest.raises(ValueError):
            parse_bpmn("not xml at all")

    def test_no_process(self):
        with pytest.raises(InvalidModel):
            parse_bpmn(HEAD + "</definitions>")

    def test_unsupported_elements_are_all_listed(self):
        with pytest.raises(UnsupportedConstruct) as info:
            parse_body('<startEvent id="s"/><subProcess id="sp"/><laneSet id="ls"/>')
        assert info.value.tags == ("process/subProcess", "process/laneSet")

    def test_unsupported_attribute(self):
        with pytest.raises(UnsupportedConstruct) as info:
            parse_body('<userTask id="u" activiti:priority="5"/>')
        assert info.value.tags == ("userTask/@activiti:priority",)

    def test_unsupported_child_of_user_task(self):
        with pytest.raises(UnsupportedConstruct) as info:
            parse_body('<userTask id="u"><extensionElements/></userTask>')
        assert "userTask/extensionElements" in info.value.tags

    def test_second_process_rejected(self):
        with pytest.raises(UnsupportedConstruct):
            parse_bpmn(HEAD + '<process id="a"/><process id="b"/></definitions>')

    def test_service_task_without_call_rejected(self):
        with pytest.raises(UnsupportedConstruct):
            parse_body('<serviceTask id="s"/>')

    def test_service_task_with_two_calls_rejected(self):
        with pytest.raises(UnsupportedConstruct):
            parse_body('<serviceTask id="s" activiti:class="A" activiti:expression="#{b}"/>')

    def test_unknown_service_type_rejected(self):
        with pytest.raises(UnsupportedConstruct):
            parse_body('<serviceTask id="s" activiti:type="dmn"/>')


class TestSubset:
    def test_every_tag_maps_to_a_kind(self):
        body = (
            '<startEvent id="a"/><endEvent id="b"/><intermediateCatchEvent id="c"/>'
            '<userTask id="d"/><serviceTask id="e" activiti:class="X"/>'
            '<serviceTask id="f" implementation="##WebService"/><scriptTask id="g" scriptFormat="groovy"/>'
            '<serviceTask id="h" activiti:type="mail"/><receiveTask id="i"/><businessRuleTask id="j"/>'
            '<serviceTask id="k" activiti:type="mule"/><manualTask id="l"/>'
            '<serviceTask id="m" activiti:type="shell"/><serviceTask id="n" activiti:type="camel"/>'
            '<exclusiveGateway id="o"/><parallelGateway id="p1"/><dataObject id="q"/>'
        )
        m = parse_body(body)
        assert {n.kind for n in m.nodes.values()} == set(NodeKind)
        assert model_equals(parse_bpmn(serialize_bpmn(m)), m)

    def test_eleven_task_kinds(self):
        assert len(TASK_KINDS) == 11
        assert all(k.is_task for k in TASK_KINDS)
        assert not NodeKind.EXCLUSIVE_GATEWAY.is_task

    def test_user_task_attributes(self):
        m = parse_body(
            '<userTask id="u" activiti:assignee="alice" activiti:candidateUsers="bob, carol" '
            'activiti:candidateGroups="sales" activiti:dueDate="P3D" activiti:formKey="f.form">'
            "<documentation>doc</documentation></userTask>"
        )
        d = m.nodes["u"].detail
        assert d == UserTaskDetail("alice", frozenset({"bob", "carol"}), frozenset({"sales"}), "P3D", "doc", "f.form")
        assert 'activiti:candidateUsers="bob,carol"' in serialize_bpmn(m)

    def test_java_task_field_forms(self):
        m = parse_body(
            '<serviceTask id="s" activiti:delegateExpression="${d}" activiti:resultVariable="r">'
            "<extensionElements>"
            '<activiti:field name="b" stringValue="x"/>'
            '<activiti:field name="a"><activiti:expression>${y}</activiti:expression></activiti:field>'
            '<activiti:field name="c"><activiti:string>z</activiti:string></activiti:field>'
            "</extensionElements></serviceTask>"
        )
        d = m.nodes["s"].detail
        assert d.call_type is CallType.DELEGATE_EXPRESSION and d.target == "${d}"
        assert d.result_variable == "r"
        assert [f.field_name for f in d.field_injections] == ["a", "b", "c"]
        assert d.injection("a") == FieldInjection("a", ValueKind.EXPRESSION, "${y}")
        text = serialize_bpmn(m)
        assert 'activiti:resultVariableName="r"' in text
        assert model_equals(parse_bpmn(text), m)

    def test_generic_task_keeps_attributes_and_fields(self):
        m = parse_body(
            '<serviceTask id="m" activiti:type="mail" activiti:async="true">'
            "<documentation>note</documentation><extensionElements>"
            '<activiti:field name="to" expression="${who}"/><activiti:field name="subject" stringValue="Hi"/>'
            "</extensionElements></serviceTask>"
            '<scriptTask id="s" scriptFormat="groovy"><script>println "x &lt; y"</script></scriptTask>'
        )
        mail = m.nodes["m"].detail.attributes
        assert mail == {
            "activiti:async": "true",
            DOCUMENTATION_KEY: "note",
            FIELD_EXPRESSION_PREFIX + "to": "${who}",
            FIELD_STRING_PREFIX + "subject": "Hi",
        }
        assert m.nodes["s"].detail.attributes[SCRIPT_KEY] == 'println "x < y"'
        assert model_equals(parse_bpmn(serialize_bpmn(m)), m)

    def test_condition_expression(self):
        m = parse_body(
            '<exclusiveGateway id="g"/><endEvent id="e"/>'
            '<sequenceFlow id="f" name="big" sourceRef="g" targetRef="e">'
            '<conditionExpression xsi:type="tFormalExpression">${amount &gt; 100}</conditionExpression>'
            "</sequenceFlow>"
        )
        assert m.flows["f"] == SequenceFlow("f", "g", "e", "big", "${amount > 100}")
        assert model_equals(parse_bpmn(serialize_bpmn(m)), m)

    def test_diagram_content_ignored(self):
        text = doc('<startEvent id="s"/>').replace(
            "</definitions>",
            '<bpmndi:BPMNDiagram xmlns:bpmndi="http://www.omg.org/spec/BPMN/20100524/DI" id="d"/></definitions>',
        )
        assert set(parse_bpmn(text).nodes) == {"s"}

    def test_extension_namespace_is_configurable(self):
        text = doc('<userTask id="u" activiti:assignee="alice"/>').replace(
            "http://activiti.org/bpmn", "http://flowable.org/bpmn"
        )
        m = parse_bpmn(text, extension_ns="http://flowable.org/bpmn")
        assert m.nodes["u"].detail.assignee == "alice"
        assert 'xmlns:activiti="http://flowable.org/bpmn"' in serialize_bpmn(m, extension_ns="http://flowable.org/bpmn")
        with pytest.raises(UnsupportedConstruct):
            parse_bpmn(text)

    def test_escaping_round_trip(self):
        tricky = 'a & b <c> "d" \'e\'\ttab\r\nline ]]> ü'
        m = ProcessModel.build(
            "p",
            [FlowNode("t", NodeKind.MANUAL_TASK, GenericDetail({"category": tricky, DOCUMENTATION_KEY: tricky}), tricky)],
            process_name=tricky,
        )
        assert model_equals(parse_bpmn(serialize_bpmn(m)), m)


class TestInvariants:
    def test_empty_candidate_rejected(self):
        with pytest.raises(InvalidModel):
            UserTaskDetail(candidate_users=frozenset({""}))

    def test_comma_candidate_rejected(self):
        with pytest.raises(InvalidModel):
            UserTaskDetail(candidate_groups=frozenset({"a,b"}))

    def test_empty_target_rejected(self):
        with pytest.raises(InvalidModel):
            JavaServiceTaskDetail(CallType.JAVA_CLASS, "")

    def test_duplicate_injection_rejected(self):
        f = FieldInjection("x", ValueKind.STRING, "1")
        with pytest.raises(InvalidModel):
            JavaServiceTaskDetail(CallType.JAVA_CLASS, "A", (f, f))

    def test_empty_field_name_rejected(self):
        with pytest.raises(InvalidModel):
            FieldInjection("", ValueKind.STRING, "1")

    def test_detail_must_match_kind(self):
        with pytest.raises(InvalidModel):
            FlowNode("u", NodeKind.USER_TASK, GenericDetail())
        with pytest.raises(InvalidModel):
            FlowNode("g", NodeKind.EXCLUSIVE_GATEWAY, UserTaskDetail())

    def test_script_key_only_on_script_tasks(self):
        with pytest.raises(InvalidModel):
            FlowNode("m", NodeKind.MANUAL_TASK, GenericDetail({SCRIPT_KEY: "x"}))

    def test_field_keys_only_on_tasks(self):
        with pytest.raises(InvalidModel):
            FlowNode("g", NodeKind.PARALLEL_GATEWAY, GenericDetail({FIELD_STRING_PREFIX + "x": "1"}))

    def test_reserved_generic_keys(self):
        for key in ("id", "name"):
            with pytest.raises(InvalidModel):
                FlowNode("g", NodeKind.PARALLEL_GATEWAY, GenericDetail({key: "1"}))
        with pytest.raises(InvalidModel):
            FlowNode("m", NodeKind.EMAIL_TASK, GenericDetail({"activiti:type": "mail"}))

    def test_empty_flow_refs_rejected(self):
        with pytest.raises(InvalidModel):
            SequenceFlow("f", "", "x")

    def test_model_rejects_dangling_ref(self):
        with pytest.raises(DanglingFlowRef):
            ProcessModel.build("p", [], [SequenceFlow("f", "a", "b")])

    def test_injections_sorted_by_name(self):
        a = FieldInjection("a", ValueKind.STRING, "1")
        b = FieldInjection("b", ValueKind.STRING, "2")
        assert JavaServiceTaskDetail(CallType.JAVA_CLASS, "X", (b, a)) == JavaServiceTaskDetail(CallType.JAVA_CLASS, "X", (a, b))


class TestGeneratedModels:
    @settings(max_examples=200, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32))
    def test_round_trip_and_byte_stability(self, seed):
        m = random_model(random.Random(seed))
        text = serialize_bpmn(m)
        back = parse_bpmn(text)
        assert model_equals(back, m)
        assert serialize_bpmn(back) == text

    @settings(max_examples=100, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32))
    def test_insertion_order_does_not_matter(self, seed):
        rng = random.Random(seed)
        m = random_model(rng)
        nodes = list(m.nodes.values())
        flows = list(m.flows.values())
        rng.shuffle(nodes)
        rng.shuffle(flows)
        other = ProcessModel.build(m.process_id, nodes, flows, m.process_name, m.attributes)
        assert model_equals(other, m)
        assert serialize_bpmn(other) == serialize_bpmn(m)
