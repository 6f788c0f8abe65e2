"""Machine-readable verification reports (JSON, schema ``v1``)."""

from __future__ import annotations

import json
from dataclasses import asdict
from functools import lru_cache
from importlib import resources

from . import REPORT_SCHEMA_VERSION, __version__
from .explorer import ExploreConfig, Verdict


@lru_cache(maxsize=1)
def schema() -> dict:
    return json.loads(resources.files("symtrans").joinpath("report.schema.json").read_text())


def build_report(verdict: Verdict, program: str, domain: str, cfg: ExploreConfig | None = None,
                 replay_status: list[str] | None = None) -> dict:
    s = verdict.stats
    first = verdict.violation
    violations = []
    for i, v in enumerate(verdict.violations):
        d = v.to_json()
        if replay_status is not None:
            d["replay"] = replay_status[i]
        violations.append(d)
    doc = {
        "schema": REPORT_SCHEMA_VERSION,
        "tool": f"symtrans {__version__}",
        "program": program,
        "domain": domain,
        "verdict": verdict.result,
        "reasons": list(verdict.reasons),
        "model": first.to_json()["model"] if first else None,
        "trail": list(first.trail) if first else None,
        "states-stored": s.states_stored,
        "solver-calls": s.solver_calls,
        "prunes": s.prunes,
        "trivial-prunes": s.trivial_prunes,
        "dedup-hits": s.dedup_hits,
        "paths": s.paths,
        "wall-time": round(s.wall_time, 6),
        "violations": violations,
    }
    if cfg is not None:
        c = asdict(cfg)
        c.pop("backend_factory", None)
        doc["config"] = c
    return doc


def validate_report(doc: dict) -> None:
    """Raise ``jsonschema.ValidationError`` when ``doc`` breaks the schema."""
    import jsonschema

    jsonschema.validate(doc, schema())


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"
