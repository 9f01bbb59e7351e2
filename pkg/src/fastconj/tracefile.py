"""Lossless JSON serialization of construction traces.

Rationals are "p/q" strings and big integers decimal strings, so a trace can
be re-verified from the file alone.  Each top-level block carries a SHA-256
checksum of its canonical encoding; files are written atomically.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import fields
from fractions import Fraction

from .construction import Check, ConstructionConfig, ConstructionTrace, Constants, StageRecord
from .diophantine import LiouvilleWitness, oracle_from_spec
from .generators import StageGenerator, TypeTag
from .magnitude import Magnitude, frac_str, parse_frac
from .norms import BoundLedger, LedgerEntry

FORMAT = "fastconj-trace"
VERSION = 1


class TraceFormatError(ValueError):
    pass


def _canonical(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def checksum(obj) -> str:
    return hashlib.sha256(_canonical(obj)).hexdigest()


# ---------------------------------------------------------------- config

def config_to_record(cfg: ConstructionConfig) -> dict:
    out = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, Fraction):
            v = frac_str(v)
        elif f.name == "deltas" and v is not None:
            v = [frac_str(Fraction(d)) for d in v]
        elif f.name == "alpha_overrides":
            v = {str(k): frac_str(Fraction(a)) for k, a in v.items()}
        out[f.name] = v
    return out


def config_from_record(rec: dict) -> ConstructionConfig:
    cfg = ConstructionConfig()
    for f in fields(cfg):
        if f.name not in rec:
            continue
        v = rec[f.name]
        if f.name in ("target_product", "norm_inflation"):
            v = parse_frac(v)
        elif f.name == "deltas" and v is not None:
            v = [parse_frac(d) for d in v]
        elif f.name == "alpha_overrides":
            v = {int(k): parse_frac(a) for k, a in v.items()}
        setattr(cfg, f.name, v)
    return cfg


# ---------------------------------------------------------------- stages

def _check_from_record(rec) -> Check:
    return Check(rec["name"], bool(rec["verdict"]), rec["margin"], rec.get("detail", ""))


def stage_to_record(s: StageRecord) -> dict:
    c = s.constants
    return {
        "n": s.n, "built": s.built, "generator": s.generator.to_record(),
        "K_n": str(s.K_n), "K_prime_prev": str(s.K_prime_prev), "Q_n": str(s.Q_n),
        "witness": s.witness.to_record(), "eps": frac_str(s.eps), "N": s.N,
        "constants": {"n": c.n, "r": c.r, "order": c.order, "C_H": c.C_H.to_record(), "N_H": c.N_H,
                      "C_dist": c.C_dist.to_record(), "N_dist": c.N_dist, "ledger": c.ledger.to_record()},
        "constraints": [x.to_record() for x in s.constraints],
        "checks": [x.to_record() for x in s.checks],
    }


def stage_from_record(rec: dict) -> StageRecord:
    c = rec["constants"]
    consts = Constants(int(c["n"]), int(c["r"]), int(c["order"]), Magnitude.from_record(c["C_H"]), int(c["N_H"]),
                       Magnitude.from_record(c["C_dist"]), int(c["N_dist"]),
                       BoundLedger([LedgerEntry(e["label"], e["value"], e["provenance"]) for e in c.get("ledger", [])]))
    return StageRecord(int(rec["n"]), StageGenerator.from_record(rec["generator"]), int(rec["K_n"]),
                       int(rec["K_prime_prev"]), LiouvilleWitness.from_record(rec["witness"]), consts,
                       parse_frac(rec["eps"]), int(rec["N"]), [_check_from_record(x) for x in rec["constraints"]],
                       int(rec["Q_n"]), bool(rec["built"]), [_check_from_record(x) for x in rec["checks"]])


def trace_to_record(trace: ConstructionTrace) -> dict:
    return {
        "type": trace.type_tag.to_record(), "r": trace.r, "oracle": trace.oracle.descriptor(),
        "config": config_to_record(trace.config),
        "stages": [stage_to_record(s) for s in trace.stages],
        "planned": stage_to_record(trace.planned) if trace.planned is not None else None,
        "failure": trace.failure, "failure_kind": trace.failure_kind,
    }


def trace_from_record(rec: dict) -> ConstructionTrace:
    try:
        tr = ConstructionTrace(TypeTag.from_record(rec["type"]), int(rec["r"]), oracle_from_spec(rec["oracle"]),
                               config_from_record(rec["config"]))
        tr.stages = [stage_from_record(s) for s in rec["stages"]]
        tr.planned = stage_from_record(rec["planned"]) if rec.get("planned") else None
        tr.failure, tr.failure_kind = rec.get("failure"), rec.get("failure_kind")
    except (KeyError, TypeError, ValueError) as e:
        raise TraceFormatError(f"malformed trace record: {e!r}") from e
    return tr


def generator_mismatches(rec: dict) -> list[str]:
    """Fields of stored generator records that differ from a fresh rebuild."""
    out = []
    blocks = list(rec["stages"]) + ([rec["planned"]] if rec.get("planned") else [])
    for s in blocks:
        stored = s["generator"]
        fresh = StageGenerator.from_record(stored).to_record()
        for key in sorted(fresh):
            if stored.get(key) != fresh[key]:
                out.append(f"stage {s['n']} generator field {key}: file {stored.get(key)} vs rebuilt {fresh[key]}")
    return out


# ------------------------------------------------------------------ files

def make_document(trace: ConstructionTrace, run_config: dict | None = None, analysis: dict | None = None,
                  created: str | None = None) -> dict:
    body = trace_to_record(trace)
    analysis = analysis or {}
    return {"format": FORMAT, "version": VERSION, "created": created, "run_config": run_config or {},
            "trace": body, "analysis": analysis,
            "checksums": {"trace": checksum(body), "analysis": checksum(analysis)}}


def write_document(path, doc: dict) -> None:
    """Write atomically: temp file in the target directory, then rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".trace-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(doc, fh, sort_keys=True, indent=1)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_document(path) -> dict:
    """Parse and structurally validate a trace file (OSError propagates)."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise TraceFormatError(f"not JSON: {e}") from e
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise TraceFormatError("not a fastconj trace file")
    if doc.get("version") != VERSION:
        raise TraceFormatError(f"unsupported trace version {doc.get('version')!r}, expected {VERSION}")
    for key in ("trace", "analysis", "checksums"):
        if key not in doc:
            raise TraceFormatError(f"missing block {key!r}")
    return doc


def checksum_mismatches(doc: dict) -> list[str]:
    return [f"checksum of block {k!r} does not match its content"
            for k in ("trace", "analysis") if doc["checksums"].get(k) != checksum(doc[k])]
