from __future__ import annotations

import json
import shutil
import subprocess
import sys

import pytest

from _fixtures import DATA, with_java, with_user
from bpcm import cli
from bpcm.codec import dumps_set, loads_set
from bpcm.diff import DiffRequest, diff
from bpcm.journal import Journal
from bpcm.model import model_equals, parse_bpmn, serialize_bpmn
from bpcm.ontology import export_journal
from bpcm.patch import apply, invert
from bpcm.samples import create_quote
from bpcm.taxonomy import Provenance

STAMP = "2024-06-01T10:00:00Z"


@pytest.fixture(autouse=True)
def fixed_clock(monkeypatch):
    monkeypatch.setenv(cli.CLOCK_ENV, STAMP)


@pytest.fixture
def run(capsys):
    def go(*argv):
        code = cli.main([str(a) for a in argv])
        out, err = capsys.readouterr()
        return code, out, err

    return go


@pytest.fixture
def models(tmp_path):
    base = create_quote()
    old = tmp_path / "old.bpmn"
    new = tmp_path / "new.bpmn"
    old.write_text(serialize_bpmn(base))
    new.write_text(serialize_bpmn(with_user(base, assignee="bob")))
    return old, new


@pytest.fixture
def change_set(run, models, tmp_path):
    old, new = models
    out = tmp_path / "set.json"
    assert run("diff", old, new, "--agent", "alice", "--cause", "reassign workload", "--out", out)[0] == 0
    return out


def init_journal(run, tmp_path, acl="alice,bob"):
    base = tmp_path / "base.bpmn"
    base.write_text(serialize_bpmn(create_quote()))
    path = tmp_path / "j"
    assert run("journal", "init", path, "--baseline", base, "--acl", acl)[0] == 0
    return path


class TestStatelessCommands:
    def test_diff_matches_library(self, run, models):
        old, new = models
        code, out, err = run("diff", old, new, "--agent", "alice", "--cause", "reassign workload")
        assert (code, err) == (0, "")
        prov = Provenance("alice", "reassign workload", "")
        old_b, new_b = old.read_bytes(), new.read_bytes()
        clock, ids = cli.runtime(b"diff", old_b, new_b, repr(prov).encode(), b"v0")
        expected = diff(DiffRequest(parse_bpmn(old_b), parse_bpmn(new_b), prov, clock=clock, ids=ids))
        assert out == dumps_set(expected)

    def test_diff_assignee_payload(self, run, models):
        old, new = models
        cs = loads_set(run("diff", old, new, "--agent", "alice", "--cause", "c")[1])
        (rec,) = cs.records
        m = rec.change.payload.op.modification
        assert (rec.element_id, m.old, m.new) == ("ut1", "alice", "bob")

    def test_diff_is_deterministic(self, run, models):
        old, new = models
        argv = ("diff", old, new, "--agent", "alice", "--cause", "c")
        assert run(*argv)[1] == run(*argv)[1]

    def test_apply_matches_library(self, run, models, change_set):
        old, new = models
        code, out, _ = run("apply", change_set, old)
        assert code == 0
        expected = apply(loads_set(change_set.read_text()), parse_bpmn(old.read_bytes()))
        assert out == serialize_bpmn(expected)
        assert model_equals(parse_bpmn(out), parse_bpmn(new.read_bytes()))

    def test_invert_then_apply_restores(self, run, models, change_set, tmp_path):
        old, new = models
        inv = tmp_path / "inv.json"
        assert run("invert", change_set, "--out", inv)[0] == 0
        code, out, _ = run("apply", inv, new)
        assert code == 0 and model_equals(parse_bpmn(out), parse_bpmn(old.read_bytes()))

    def test_invert_matches_library(self, run, change_set):
        raw = change_set.read_bytes()
        clock, ids = cli.runtime(b"invert", raw, repr(None).encode())
        expected = invert(loads_set(raw.decode()), clock=clock, ids=ids)
        assert run("invert", change_set)[1] == dumps_set(expected)

    def test_identical_models_give_empty_set(self, run, models):
        old, _ = models
        cs = loads_set(run("diff", old, old, "--agent", "a", "--cause", "c")[1])
        assert cs.records == ()

    def test_version_flag(self, run):
        code, out, _ = run("--version")
        assert code == 0 and "0.1.0" in out


class TestExitCodes:
    def test_missing_required_flag_is_usage(self, run, models):
        old, new = models
        code, out, err = run("diff", old, new, "--agent", "alice")
        assert code == 1 and out == "" and "--cause" in err

    def test_no_command_is_usage(self, run):
        assert run()[0] == 1

    def test_empty_cause_is_usage(self, run, models):
        old, new = models
        code, _, err = run("diff", old, new, "--agent", "alice", "--cause", "")
        assert code == 1 and "bpcm: error:" in err

    def test_bad_clock_is_usage(self, run, models, monkeypatch):
        monkeypatch.setenv(cli.CLOCK_ENV, "yesterday")
        old, new = models
        assert run("diff", old, new, "--agent", "a", "--cause", "c")[0] == 1

    def test_missing_file_is_io(self, run, tmp_path):
        code, out, err = run("apply", tmp_path / "nope.json", tmp_path / "nope.bpmn")
        assert code == 2 and out == "" and "I/O error" in err

    def test_malformed_bpmn_is_parse(self, run, models, tmp_path):
        old, _ = models
        bad = tmp_path / "bad.bpmn"
        bad.write_text("<definitions>")
        assert run("diff", old, bad, "--agent", "a", "--cause", "c")[0] == 3

    def test_unsupported_element_is_parse(self, run, models, tmp_path):
        old, _ = models
        text = old.read_text().replace("</process>", '<subProcess id="sp"/></process>')
        odd = tmp_path / "odd.bpmn"
        odd.write_text(text)
        code, _, err = run("diff", old, odd, "--agent", "a", "--cause", "c")
        assert code == 3 and "parse error" in err

    def test_malformed_set_is_parse(self, run, models, tmp_path):
        old, _ = models
        bad = tmp_path / "bad.json"
        bad.write_text('{"set_id": 1}')
        assert run("apply", bad, old)[0] == 3

    def test_conflict(self, run, change_set, tmp_path):
        drifted = tmp_path / "drift.bpmn"
        drifted.write_text(serialize_bpmn(with_user(create_quote(), assignee="carol")))
        code, out, err = run("apply", change_set, drifted)
        assert code == 4 and out == ""
        assert err == "bpcm: conflict: record 0 on 'ut1': value mismatch; expected 'alice', found 'carol'\n"

    def test_stale_commit_is_conflict(self, run, tmp_path, change_set):
        j = init_journal(run, tmp_path)
        assert run("journal", "commit", j, change_set)[0] == 0
        code, _, err = run("journal", "commit", j, change_set)
        assert code == 4 and "conflict" in err

    def test_unknown_version_is_usage(self, run, tmp_path):
        j = init_journal(run, tmp_path)
        assert run("journal", "show", j, "--version", "v9")[0] == 1

    def test_nothing_to_revert_is_usage(self, run, tmp_path):
        j = init_journal(run, tmp_path)
        assert run("journal", "revert", j, "--to", "v0", "--agent", "alice")[0] == 1

    def test_verify_findings_exit_audit(self, run, tmp_path, change_set):
        j = init_journal(run, tmp_path, acl="bob")
        run("journal", "commit", j, change_set)
        code, out, err = run("journal", "verify", j)
        assert code == 5
        assert "alice" in out and "1 finding(s)" in err

    def test_export_of_corrupt_journal_exit_audit(self, run, tmp_path, change_set):
        j = init_journal(run, tmp_path)
        run("journal", "commit", j, change_set)
        entries = j / "entries.jsonl"
        entries.write_text(entries.read_text().replace('"new":"bob"', '"new":"eve"'))
        code, out, err = run("journal", "export", j)
        assert code == 5 and out == "" and "failed audit" in err


class TestJournalCommands:
    def test_init_layout(self, run, tmp_path):
        j = init_journal(run, tmp_path)
        assert sorted(p.name for p in j.iterdir()) == ["acl.txt", "baseline.bpmn", "entries.jsonl"]
        assert Journal.open(j).acl == frozenset({"alice", "bob"})

    def test_init_twice_fails(self, run, tmp_path):
        j = init_journal(run, tmp_path)
        base = tmp_path / "base.bpmn"
        code, _, _ = run("journal", "init", j, "--baseline", base)
        assert code == 2

    def test_commit_log_show_trace(self, run, tmp_path, change_set):
        j = init_journal(run, tmp_path)
        code, out, _ = run("journal", "commit", j, change_set)
        cs = loads_set(change_set.read_text())
        assert (code, out) == (0, f"v1\t{cs.set_id}\t1\n")

        log = run("journal", "log", j)[1].splitlines()
        assert log[0] == "version\tset_id\tprovenance\ttimestamp\trecords"
        assert log[1] == f"v1\t{cs.set_id}\talice: reassign workload\t{STAMP}\t1"

        shown = run("journal", "show", j, "--version", "v1")[1]
        assert shown == serialize_bpmn(with_user(create_quote(), assignee="bob"))
        assert run("journal", "show", j)[1] == shown

        trace = run("journal", "trace", j, "ut1")[1].splitlines()
        assert trace[0] == "version\trecord_id\tcategory\tagent\tcause\ttimestamp"
        assert trace[1] == f"v1\t{cs.records[0].record_id}\tTaskLevelChange/UserTask\talice\treassign workload\t{STAMP}"
        assert run("journal", "trace", j, "end1")[1].splitlines()[1:] == []

    def test_revert(self, run, tmp_path, change_set):
        j = init_journal(run, tmp_path)
        run("journal", "commit", j, change_set)
        code, out, _ = run("journal", "revert", j, "--to", "v0", "--agent", "bob")
        assert code == 0 and out.startswith("v2\t")
        journal = Journal.open(j)
        assert model_equals(journal.head(), create_quote())
        assert journal.entries[-1].change_set.records[0].provenance == Provenance("bob", "revert to v0", "")

    def test_verify_clean(self, run, tmp_path, change_set):
        j = init_journal(run, tmp_path)
        run("journal", "commit", j, change_set)
        assert run("journal", "verify", j) == (0, "", "")

    def test_export_matches_library(self, run, tmp_path, change_set):
        j = init_journal(run, tmp_path)
        run("journal", "commit", j, change_set)
        code, out, _ = run("journal", "export", j)
        assert code == 0 and out == export_journal(Journal.open(j))

    def test_deterministic_session(self, tmp_path, capsys):
        """Two fresh journals driven by the same commands end byte-identical."""

        def session(root):
            root.mkdir()
            base, new = root / "a.bpmn", root / "b.bpmn"
            base.write_text(serialize_bpmn(create_quote()))
            new.write_text(serialize_bpmn(with_java(create_quote(), result_variable="q")))
            cli.main(["diff", str(base), str(new), "--agent", "alice", "--cause", "c", "--out", str(root / "s.json")])
            cli.main(["journal", "init", str(root / "j"), "--baseline", str(base), "--acl", "alice"])
            cli.main(["journal", "commit", str(root / "j"), str(root / "s.json")])
            cli.main(["journal", "revert", str(root / "j"), "--to", "v0", "--agent", "alice"])
            capsys.readouterr()
            return (root / "j" / "entries.jsonl").read_bytes()

        assert session(tmp_path / "one") == session(tmp_path / "two")


def test_console_script(tmp_path):
    exe = shutil.which("bpcm")
    argv = [exe] if exe else [sys.executable, "-m", "bpcm.cli"]
    src = DATA / "create_quote.bpmn"
    proc = subprocess.run([*argv, "diff", str(src), str(src), "--agent", "a", "--cause", "c"],
                          capture_output=True, text=True, env={"BPCM_CLOCK": STAMP, "PATH": "/usr/bin:/bin"})
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["records"] == []
