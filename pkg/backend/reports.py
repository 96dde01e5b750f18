# backend/reports.py
"""
Lemma reports: structured records of one numerical check, written as JSON
lines plus a CSV summary table.
"""
import csv
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from lab_config import LIB_VERSION

logger = logging.getLogger(__name__)

CSV_HEADER = ["lemma", "params", "measured", "bound", "margin", "pass"]


class LemmaReport(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    lemma: str
    inputs: Dict[str, Any] = Field(default_factory=dict)
    measured: Dict[str, Any] = Field(default_factory=dict)
    bound: Dict[str, Any] = Field(default_factory=dict)
    measured_value: float = 0.0
    bound_value: float = 0.0
    margin: float = 0.0
    slack: float = 0.0
    passed: bool = Field(default=True, alias="pass")
    notes: List[str] = Field(default_factory=list)
    config_hash: str = ""
    version: str = LIB_VERSION

    @model_validator(mode="after")
    def pass_matches_margin(self):
        expected = self.margin >= -self.slack
        if self.passed != expected:
            raise ValueError(f"pass flag {self.passed} disagrees with margin {self.margin} (slack {self.slack})")
        return self

    def with_config(self, config_hash: str) -> "LemmaReport":
        return self.model_copy(update={"config_hash": config_hash})

    def to_json_line(self) -> str:
        return self.model_dump_json(by_alias=True)


def make_report(
    lemma: str,
    inputs: Dict[str, Any],
    measured: Dict[str, Any],
    bound: Dict[str, Any],
    measured_value: float,
    bound_value: float,
    margin: float,
    slack: float = 0.0,
    notes: Optional[List[str]] = None,
) -> LemmaReport:
    """Build a report whose pass flag follows from margin >= -slack."""
    margin = float(margin)
    return LemmaReport(
        lemma=lemma,
        inputs=inputs,
        measured=measured,
        bound=bound,
        measured_value=float(measured_value),
        bound_value=float(bound_value),
        margin=margin,
        slack=float(slack),
        passed=margin >= -float(slack),
        notes=list(notes or []),
    )


def combine_reports(lemma: str, parts: List[LemmaReport], inputs: Dict[str, Any], notes: Optional[List[str]] = None) -> LemmaReport:
    """One report whose margin is the worst margin (net of slack) among parts."""
    worst = min(parts, key=lambda r: r.margin + r.slack)
    return make_report(
        lemma,
        inputs,
        measured={p.lemma: p.measured_value for p in parts},
        bound={p.lemma: p.bound_value for p in parts},
        measured_value=worst.measured_value,
        bound_value=worst.bound_value,
        margin=worst.margin + worst.slack,
        notes=notes,
    )


def config_hash(config: Dict[str, Any]) -> str:
    """First 16 hex digits of SHA-256 over the canonical JSON of the config."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def merge_reports(reports: Iterable[LemmaReport]) -> List[LemmaReport]:
    """Deterministic order: by lemma id, then by the serialized inputs."""
    return sorted(reports, key=lambda r: (r.lemma, json.dumps(r.inputs, sort_keys=True, default=str)))


def write_jsonl(reports: Iterable[LemmaReport], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [r.to_json_line() for r in reports]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    logger.info("wrote %d reports to %s", len(lines), path)
    return path


def read_jsonl(path: Union[str, Path]) -> List[LemmaReport]:
    text = Path(path).read_text(encoding="utf-8")
    return [LemmaReport.model_validate_json(line) for line in text.splitlines() if line.strip()]


def write_summary_csv(reports: Iterable[LemmaReport], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in reports:
            params = json.dumps(r.inputs, sort_keys=True, separators=(",", ":"), default=str)
            writer.writerow([r.lemma, params, repr(r.measured_value), repr(r.bound_value), repr(r.margin), str(r.passed).lower()])
    return path


def all_passed(reports: Iterable[LemmaReport]) -> bool:
    return all(r.passed for r in reports)
