"""Table definition files, scenario files, and machine-readable dumps.

Schemas are JSON; the exact field names are documented in the README. All
float output uses 17 significant digits so runs are reproducible bit for bit
from (scenario, seed) alone, and every file embeds the scenario hash and tool
version.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__ as TOOL_VERSION
from .errors import TableFormatError
from .flow import OrbitSegment
from .geometry import BilliardTable, build_cylinder, build_table, validate_table
from .hyperbolicity import SurveyResult
from .tangent import LyapunovReport


def fmt(x: float) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# Table definitions
# ---------------------------------------------------------------------------


def table_from_dict(doc: dict) -> BilliardTable:
    """Build and validate a table from its definition document."""
    if not isinstance(doc, dict):
        raise TableFormatError("table", "definition must be a JSON object")
    try:
        dim = int(doc["dimension"])
    except KeyError:
        raise TableFormatError("dimension", "missing") from None
    except (TypeError, ValueError):
        raise TableFormatError("dimension", "must be an integer") from None
    cylinders_doc = doc.get("cylinders")
    if not isinstance(cylinders_doc, list) or not cylinders_doc:
        raise TableFormatError("cylinders", "must be a nonempty list")
    cylinders = []
    for i, cyl_doc in enumerate(cylinders_doc):
        field = f"cylinders[{i}]"
        if not isinstance(cyl_doc, dict):
            raise TableFormatError(field, "must be an object")
        for key in ("generator", "translation", "radius"):
            if key not in cyl_doc:
                raise TableFormatError(f"{field}.{key}", "missing")
        generator = cyl_doc["generator"]
        if not isinstance(generator, list):
            raise TableFormatError(f"{field}.generator", "must be a list of integer vectors")
        for row in generator:
            if not isinstance(row, list) or any(not isinstance(x, int) for x in row):
                raise TableFormatError(
                    f"{field}.generator", "rows must be lists of integers"
                )
        translation = cyl_doc["translation"]
        if not isinstance(translation, list) or len(translation) != dim:
            raise TableFormatError(f"{field}.translation", f"must be a list of {dim} numbers")
        radius = cyl_doc["radius"]
        if not isinstance(radius, (int, float)) or isinstance(radius, bool) or radius <= 0:
            raise TableFormatError(f"{field}.radius", "must be a positive number")
        cylinders.append(build_cylinder(generator, translation, float(radius), dim))
    table = build_table(cylinders)
    if doc.get("check_disjointness", True):
        budget = doc.get("disjointness_budget", 200_000)
        table = validate_table(table, disjoint_budget=int(budget))
    else:
        table = validate_table(table, disjoint_budget=0)
    return table


def table_to_dict(table: BilliardTable) -> dict:
    return {
        "dimension": table.dim,
        "cylinders": [
            {
                "generator": [list(map(int, row)) for row in c.generator.integer_basis],
                "translation": [float(t) for t in c.translation],
                "radius": c.radius,
            }
            for c in table.cylinders
        ],
    }


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Scenario:
    """A resolved scenario: table plus command parameters and their hash."""

    doc: dict
    table: BilliardTable
    scenario_hash: str

    def get(self, key, default=None):
        return self.doc.get(key, default)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise TableFormatError("scenario", f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise TableFormatError("scenario", f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise TableFormatError("scenario", "must be a JSON object")
    if "table" in doc:
        table_doc = doc["table"]
    elif "table_file" in doc:
        ref = (path.parent / doc["table_file"]).resolve()
        try:
            table_doc = json.loads(ref.read_text())
        except OSError as exc:
            raise TableFormatError("table_file", f"cannot read {ref}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise TableFormatError("table_file", f"not valid JSON: {exc}") from None
    else:
        raise TableFormatError("table", "scenario needs 'table' or 'table_file'")
    table = table_from_dict(table_doc)
    resolved = dict(doc)
    resolved.pop("table_file", None)
    resolved["table"] = table_doc
    canonical = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(canonical.encode()).hexdigest()
    return Scenario(doc=resolved, table=table, scenario_hash=digest)


def scenario_hash_of(doc: dict) -> str:
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


# ---------------------------------------------------------------------------
# Output writers
# ---------------------------------------------------------------------------


def _meta_lines(meta: dict) -> list[str]:
    return [f"# tool_version={TOOL_VERSION}", f"# scenario_hash={meta.get('scenario_hash', '')}"]


def write_events_csv(segment: OrbitSegment, path, meta: dict) -> None:
    """One row per event: time, cylinder index, hit point, velocities, cos(phi)."""
    d = segment.table.dim
    header = (
        ["time", "cylinder_index"]
        + [f"q_hit_{i}" for i in range(d)]
        + [f"v_pre_{i}" for i in range(d)]
        + [f"v_post_{i}" for i in range(d)]
        + ["cos_phi"]
    )
    with open(path, "w", newline="") as fh:
        for line in _meta_lines(meta):
            fh.write(line + "\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for e in segment.events:
            writer.writerow(
                [fmt(e.time), e.cylinder_index]
                + [fmt(x) for x in e.q_hit]
                + [fmt(x) for x in e.v_pre]
                + [fmt(x) for x in e.v_post]
                + [fmt(e.cos_phi)]
            )


def segment_to_dict(segment: OrbitSegment, meta: dict) -> dict:
    flag = segment.singular_flag
    return {
        "tool_version": TOOL_VERSION,
        "scenario_hash": meta.get("scenario_hash", ""),
        "duration": segment.duration,
        "symbolic": list(segment.symbolic),
        "singular_flag": None if flag is None else {"kind": flag.kind, "event_index": flag.event_index},
        "start": {"q": list(map(float, segment.start.q)), "v": list(map(float, segment.start.v))},
        "end": {"q": list(map(float, segment.end.q)), "v": list(map(float, segment.end.v))},
        "events": [
            {
                "time": e.time,
                "cylinder_index": e.cylinder_index,
                "q_hit": list(map(float, e.q_hit)),
                "v_pre": list(map(float, e.v_pre)),
                "v_post": list(map(float, e.v_post)),
                "cos_phi": e.cos_phi,
            }
            for e in segment.events
        ],
    }


def write_qmonitor_csv(samples, path, meta: dict) -> None:
    """Rows (time, z coords, w coords, q_value) along a normal-vector run."""
    if not samples:
        raise ValueError("no samples to write")
    d = samples[0][1].z.shape[0]
    header = ["time"] + [f"z_{i}" for i in range(d)] + [f"w_{i}" for i in range(d)] + ["Q"]
    with open(path, "w", newline="") as fh:
        for line in _meta_lines(meta):
            fh.write(line + "\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for t, nv, q in samples:
            writer.writerow([fmt(t)] + [fmt(x) for x in nv.z] + [fmt(x) for x in nv.w] + [fmt(q)])


def lyapunov_to_dict(report: LyapunovReport, meta: dict) -> dict:
    return {
        "tool_version": TOOL_VERSION,
        "scenario_hash": meta.get("scenario_hash", ""),
        "exponents": list(report.exponents),
        "duration": report.duration,
        "renorm_interval": meta.get("renorm_interval"),
        "renorm_count": report.renorm_count,
        "seed": report.seed,
        "n_events": report.n_events,
    }


def write_survey_csv(result: SurveyResult, path, meta: dict) -> None:
    header = [
        "sample_id", "seed", "n_collisions", "distinct_cylinders", "span_dim",
        "codim2_ok", "full_span", "neutral_dim", "sufficient", "singular_flag",
    ]

    def cell(value):
        if value is None:
            return ""
        if isinstance(value, bool):
            return "true" if value else "false"
        return value

    with open(path, "w", newline="") as fh:
        for line in _meta_lines(meta):
            fh.write(line + "\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in result.rows:
            writer.writerow([
                r.sample_id, r.seed, r.n_collisions, r.distinct_cylinders,
                cell(r.span_dim), cell(r.codim2_ok), cell(r.full_span),
                cell(r.neutral_dim), cell(r.sufficient), r.singular_flag,
            ])


def write_json(doc: dict, path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def transitivity_to_dict(table: BilliardTable, report, meta: dict) -> dict:
    witness = None
    if report.splitting_witness is not None:
        b1, b2 = report.splitting_witness
        witness = {"B1": np.round(b1, 15).tolist(), "B2": np.round(b2, 15).tolist()}
    return {
        "tool_version": TOOL_VERSION,
        "scenario_hash": meta.get("scenario_hash", ""),
        "dimension": table.dim,
        "n_cylinders": len(table.cylinders),
        "span_dim": report.span_dim,
        "generator_intersection_dim": report.generator_intersection_dim,
        "graph_components": [list(c) for c in report.graph_components],
        "onsp_holds": report.onsp_holds,
        "transitive": report.transitive,
        "splitting_witness": witness,
        "flags": {
            "condition_1_3_disjoint": table.condition_1_3_disjoint,
            "condition_1_4_pairwise_base_intersection": table.condition_1_4_pairwise_base_intersection,
            "transitive": table.transitive,
            "interior_assumptions": table.interior_assumptions,
        },
    }
