"""Capture, store and replay changes to BPMN 2.0 process models.

Changes are classified with a change-management taxonomy, computed by an id-matched
semantic diff, applied and inverted as patches, kept in a hash-chained
append-only journal, and exported as N-Triples.
"""

__version__ = "0.1.0"

from .diff import DiffRequest, compute_changes, diff, diff_models
from .journal import Journal
from .model import ProcessModel, model_equals, parse_bpmn, serialize_bpmn
from .ontology import export_journal, export_record, export_schema
from .patch import apply, invert, replay
from .taxonomy import ChangeRecord, ChangeSet, Provenance, classify, validate_record

__all__ = [
    "ChangeRecord",
    "ChangeSet",
    "DiffRequest",
    "Journal",
    "ProcessModel",
    "Provenance",
    "apply",
    "classify",
    "compute_changes",
    "diff",
    "diff_models",
    "export_journal",
    "export_record",
    "export_schema",
    "invert",
    "model_equals",
    "parse_bpmn",
    "replay",
    "serialize_bpmn",
    "validate_record",
]
