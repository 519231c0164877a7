"""Scenario-driven command-line front end.

Subcommands: analyze, simulate, qmonitor, sufficiency, lyapunov, survey.
Exit codes: 0 ok, 2 validation failure, 3 input error, 4 singularity abort.
Stochastic commands (survey, lyapunov) require a seed; every output file
embeds the scenario hash and tool version so runs are reproducible from
(scenario, seed) alone.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__ as TOOL_VERSION
from .errors import (
    BaseDimTooSmall,
    CylBilliardsError,
    DependentBasis,
    DimensionMismatch,
    RadiusTooLarge,
    SingularityEncountered,
    SingularSegment,
    StartsInsideScatterer,
    TableFormatError,
)
from .flow import PhasePoint, evolve, random_phase_point
from .geometry import transitivity_report
from .hyperbolicity import sufficiency, survey_sufficiency
from .tableio import (
    Scenario,
    load_scenario,
    lyapunov_to_dict,
    segment_to_dict,
    transitivity_to_dict,
    write_events_csv,
    write_json,
    write_qmonitor_csv,
    write_survey_csv,
)
from .tangent import evolve_normal, lyapunov_spectrum, normal_vector

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INPUT = 3
EXIT_SINGULARITY = 4

_VALIDATION_ERRORS = (BaseDimTooSmall, RadiusTooLarge, DependentBasis, DimensionMismatch)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cylbilliards",
        description="Cylindric billiard simulation and hyperbolicity analysis",
    )
    parser.add_argument("--version", action="version", version=TOOL_VERSION)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("analyze", "validate a table and report transitivity"),
        ("simulate", "run the flow and dump the event log"),
        ("qmonitor", "track the infinitesimal Lyapunov function along a segment"),
        ("sufficiency", "neutral-space dimension and sufficiency verdict"),
        ("lyapunov", "finite-time Lyapunov spectrum"),
        ("survey", "statistical sufficiency survey"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override scenario seed")
        p.add_argument("--threads", type=int, default=1, help="worker processes (survey)")
    return parser


def _diag(code: int, message: str, **extra) -> int:
    doc = {"error": message, "exit_code": code, "tool_version": TOOL_VERSION, **extra}
    print(json.dumps(doc, sort_keys=True), file=sys.stderr)
    return code


def _resolve_seed(scenario: Scenario, args, required: bool) -> int | None:
    seed = args.seed if args.seed is not None else scenario.get("seed")
    if seed is None and required:
        raise TableFormatError("seed", "required for stochastic commands")
    return None if seed is None else int(seed)


def _resolve_start(scenario: Scenario, args) -> PhasePoint:
    doc = scenario.get("start")
    if doc is not None:
        for key in ("q", "v"):
            if key not in doc:
                raise TableFormatError(f"start.{key}", "missing")
        q = np.mod(np.asarray(doc["q"], dtype=float), 1.0)
        v = np.asarray(doc["v"], dtype=float)
        norm = float(np.linalg.norm(v))
        if norm == 0:
            raise TableFormatError("start.v", "must be nonzero")
        return PhasePoint(q, v / norm)
    seed = _resolve_seed(scenario, args, required=True)
    return random_phase_point(scenario.table, np.random.default_rng([seed, 0xC0]))


def _out_path(args, scenario: Scenario, name: str) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = scenario.get("output_stem", "")
    return out / (f"{stem}_{name}" if stem else name)


def cmd_analyze(scenario: Scenario, args) -> int:
    table = scenario.table
    report = transitivity_report([c.base for c in table.cylinders])
    doc = transitivity_to_dict(table, report, {"scenario_hash": scenario.scenario_hash})
    print(json.dumps(doc, indent=2, sort_keys=True))
    write_json(doc, _out_path(args, scenario, "analyze.json"))
    return EXIT_OK


def _evolve_from_scenario(scenario: Scenario, args) -> tuple:
    start = _resolve_start(scenario, args)
    duration = float(scenario.get("duration", 100.0))
    max_events = int(scenario.get("max_events", 10**6))
    segment = evolve(start, scenario.table, duration, max_events=max_events)
    return start, segment


def cmd_simulate(scenario: Scenario, args) -> int:
    _, segment = _evolve_from_scenario(scenario, args)
    meta = {"scenario_hash": scenario.scenario_hash}
    write_events_csv(segment, _out_path(args, scenario, "events.csv"), meta)
    write_json(segment_to_dict(segment, meta), _out_path(args, scenario, "events.json"))
    return EXIT_OK


def cmd_qmonitor(scenario: Scenario, args) -> int:
    _, segment = _evolve_from_scenario(scenario, args)
    if segment.singular_flag is not None and segment.singular_flag.kind != "budget_exceeded":
        return _diag(EXIT_SINGULARITY, f"segment flagged {segment.singular_flag.kind}")
    normal_doc = scenario.get("normal")
    if normal_doc is None:
        raise TableFormatError("normal", "qmonitor needs a normal vector {z, w}")
    for key in ("z", "w"):
        if key not in normal_doc:
            raise TableFormatError(f"normal.{key}", "missing")
    n = normal_vector(normal_doc["z"], normal_doc["w"])
    samples = evolve_normal(n, segment, rescale=bool(scenario.get("rescale", False)))
    meta = {"scenario_hash": scenario.scenario_hash}
    write_qmonitor_csv(samples, _out_path(args, scenario, "qmonitor.csv"), meta)
    return EXIT_OK


def cmd_sufficiency(scenario: Scenario, args) -> int:
    _, segment = _evolve_from_scenario(scenario, args)
    try:
        verdict = sufficiency(segment, scenario.table)
    except SingularSegment as exc:
        return _diag(EXIT_SINGULARITY, str(exc))
    doc = {
        "tool_version": TOOL_VERSION,
        "scenario_hash": scenario.scenario_hash,
        "sufficient": verdict.sufficient,
        "neutral_dim": verdict.neutral_dim,
        "neutral_basis": np.round(verdict.witness.basis, 15).tolist(),
        "advances": [list(a) for a in verdict.witness.advances],
        "method": verdict.witness.method,
        "n_collisions": segment.n_events,
        "symbolic": list(segment.symbolic),
    }
    print(json.dumps({k: doc[k] for k in ("sufficient", "neutral_dim", "n_collisions")}))
    write_json(doc, _out_path(args, scenario, "sufficiency.json"))
    return EXIT_OK


def cmd_lyapunov(scenario: Scenario, args) -> int:
    seed = _resolve_seed(scenario, args, required=True)
    start = None
    if scenario.get("start") is not None:
        start = _resolve_start(scenario, args)
    duration = float(scenario.get("duration", 1000.0))
    renorm = int(scenario.get("renorm_interval", 5))
    meta = {"scenario_hash": scenario.scenario_hash, "renorm_interval": renorm}
    try:
        report = lyapunov_spectrum(start, scenario.table, duration,
                                   renorm_interval=renorm, seed=seed,
                                   max_events=int(scenario.get("max_events", 10**6)))
    except SingularityEncountered as exc:
        if exc.partial_report is not None:
            write_json(lyapunov_to_dict(exc.partial_report, meta),
                       _out_path(args, scenario, "lyapunov_partial.json"))
        return _diag(EXIT_SINGULARITY, str(exc))
    doc = lyapunov_to_dict(report, meta)
    print(json.dumps({"top_exponent": report.top, "n_events": report.n_events}))
    write_json(doc, _out_path(args, scenario, "lyapunov.json"))
    return EXIT_OK


def cmd_survey(scenario: Scenario, args) -> int:
    seed = _resolve_seed(scenario, args, required=True)
    result = survey_sufficiency(
        scenario.table,
        sample_count=int(scenario.get("samples", 100)),
        duration=float(scenario.get("duration", 50.0)),
        seed=seed,
        mode=scenario.get("mode", "generic"),
        max_events=int(scenario.get("max_events", 10_000)),
        threads=max(1, args.threads),
    )
    meta = {"scenario_hash": scenario.scenario_hash}
    write_survey_csv(result, _out_path(args, scenario, "survey.csv"), meta)
    summary = {"tool_version": TOOL_VERSION, "scenario_hash": scenario.scenario_hash,
               **result.summary}
    print(json.dumps({k: summary.get(k) for k in
                      ("n_samples", "fraction_sufficient_full_span", "fraction_singular")}))
    write_json(summary, _out_path(args, scenario, "survey_summary.json"))
    return EXIT_OK


_COMMANDS = {
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "qmonitor": cmd_qmonitor,
    "sufficiency": cmd_sufficiency,
    "lyapunov": cmd_lyapunov,
    "survey": cmd_survey,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args.scenario)
    except TableFormatError as exc:
        return _diag(EXIT_INPUT, str(exc), field=exc.field)
    except _VALIDATION_ERRORS as exc:
        return _diag(EXIT_VALIDATION, str(exc))
    except ValueError as exc:
        return _diag(EXIT_VALIDATION, str(exc))
    try:
        return _COMMANDS[args.command](scenario, args)
    except TableFormatError as exc:
        return _diag(EXIT_INPUT, str(exc), field=exc.field)
    except StartsInsideScatterer as exc:
        return _diag(EXIT_VALIDATION, str(exc))
    except CylBilliardsError as exc:
        return _diag(EXIT_VALIDATION, str(exc))


if __name__ == "__main__":
    sys.exit(main())
