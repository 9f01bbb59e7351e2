"""Batch front end: construct, verify and export traces.

    fastconj construct --config run.ini --out trace.json
    fastconj verify --trace trace.json [--suite all|integrity|stages|measures|ratio|singularity|returns]
    fastconj export --trace trace.json --what graphs,measures,returns --out DIR

Exit codes: 0 clean, 2 config error, 3 construction or verification failure,
4 budget exhausted, 5 trace format error, 6 IO error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import logging
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from mpmath import mp

from . import __version__
from .construction import ConstructionConfig, run, verify_stage, working_bits
from .diophantine import oracle_from_spec
from .ergodic import (NotFound, find_return_pair, ratio_membership, singularity_diagnostic, symbol_values,
                      xi_measure)
from .generators import GeometryInfeasible, TypeTag
from .magnitude import frac_str, parse_frac
from .tracefile import (TraceFormatError, checksum_mismatches, generator_mismatches, make_document,
                        read_document, trace_from_record, write_document)

EXIT_OK, EXIT_CONFIG, EXIT_CONSTRUCTION, EXIT_BUDGET, EXIT_FORMAT, EXIT_IO = 0, 2, 3, 4, 5, 6
SUITES = ("all", "integrity", "stages", "measures", "ratio", "singularity", "returns")
EXPORTS = ("graphs", "measures", "returns")

log = logging.getLogger("fastconj")

_TYPE_ALIASES = {"III_lambda": "III_lambda", "III_inf": "III_infty", "III_infty": "III_infty",
                 "III_0": "III_0", "II_inf": "II_infty", "II_infty": "II_infty"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    type: str = "III_lambda"
    lam: Fraction = Fraction(4)
    lambda1: Fraction = Fraction(2)
    lambda2: Fraction = Fraction(3)
    offset: int = 0
    r: int = 1
    max_stages: int = 2
    oracle: dict = field(default_factory=lambda: {"kind": "tower_series", "base": 10, "growth": 8})
    precision_bits: Optional[int] = None
    sample_points: int = 1000
    distance_grid: int = 24
    distance_samples: int = 600
    norm_inflation: Fraction = Fraction(101, 100)
    cap_digits: int = 10**6
    component_cap: int = 10**6
    orbit_cap: int = 100_000
    ratio_samples: int = 4
    target_product: Fraction = Fraction(9, 10)
    deltas: Optional[list] = None
    alpha_overrides: dict = field(default_factory=dict)
    seed: int = 0

    def validate(self) -> None:
        if self.type not in _TYPE_ALIASES.values():
            raise ConfigError(f"type must be one of {sorted(_TYPE_ALIASES)}, got {self.type!r}")
        if self.type == "III_lambda" and not self.lam > 1:
            raise ConfigError(f"lambda must be > 1, got {self.lam}")
        if self.type == "III_infty" and not (1 < self.lambda1 < self.lambda2):
            raise ConfigError(f"need 1 < lambda1 < lambda2, got {self.lambda1}, {self.lambda2}")
        if self.r < 1:
            raise ConfigError("r must be a positive integer")
        if self.max_stages < 1:
            raise ConfigError("max_stages must be a positive integer")
        if self.cap_digits < 1:
            raise ConfigError("denominator cap must be positive")
        if self.offset < 0:
            raise ConfigError("offset must be nonnegative")
        try:
            oracle_from_spec(self.oracle)
        except (KeyError, ValueError) as e:
            raise ConfigError(f"bad oracle spec {self.oracle}: {e}") from e

    def type_tag(self) -> TypeTag:
        if self.type == "III_lambda":
            return TypeTag("III_lambda", (self.lam,))
        if self.type == "III_infty":
            return TypeTag("III_infty", (self.lambda1, self.lambda2))
        if self.type == "III_0":
            return TypeTag("III_0")
        return TypeTag("II_infty", (self.offset,))

    def construction_config(self) -> ConstructionConfig:
        return ConstructionConfig(target_product=self.target_product, cap_digits=self.cap_digits,
                                  norm_inflation=self.norm_inflation, deltas=self.deltas,
                                  alpha_overrides=dict(self.alpha_overrides), sample_points=self.sample_points,
                                  distance_grid=self.distance_grid, distance_samples=self.distance_samples,
                                  direct_orbit_limit=self.orbit_cap, seed=self.seed)

    def to_record(self) -> dict:
        return {"type": self.type, "lambda": frac_str(self.lam), "lambda1": frac_str(self.lambda1),
                "lambda2": frac_str(self.lambda2), "offset": self.offset, "r": self.r,
                "max_stages": self.max_stages, "oracle": self.oracle, "precision_bits": self.precision_bits,
                "component_cap": self.component_cap, "orbit_cap": self.orbit_cap,
                "ratio_samples": self.ratio_samples, "seed": self.seed}


def _frac(section, key, default):
    try:
        return parse_frac(section.get(key, frac_str(Fraction(default))).strip())
    except (ValueError, ZeroDivisionError) as e:
        raise ConfigError(f"{key}: not a rational: {section.get(key)!r}") from e


def _int(section, key, default):
    try:
        return int(section.get(key, str(default)).strip())
    except ValueError as e:
        raise ConfigError(f"{key}: not an integer: {section.get(key)!r}") from e


def load_run_config(path) -> RunConfig:
    """Read an INI-style run configuration (sections run, oracle, precision, budgets, schedule, overrides)."""
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e
    if not cp.has_section("run"):
        raise ConfigError("missing [run] section")
    run_s = cp["run"]
    empty = configparser.SectionProxy(cp, "DEFAULT")
    prec = cp["precision"] if cp.has_section("precision") else empty
    bud = cp["budgets"] if cp.has_section("budgets") else empty
    sch = cp["schedule"] if cp.has_section("schedule") else empty
    kind = run_s.get("type", "III_lambda").strip()
    if kind not in _TYPE_ALIASES:
        raise ConfigError(f"type must be one of {sorted(_TYPE_ALIASES)}, got {kind!r}")
    rc = RunConfig(type=_TYPE_ALIASES[kind])
    rc.lam = _frac(run_s, "lambda", rc.lam)
    rc.lambda1 = _frac(run_s, "lambda1", rc.lambda1)
    rc.lambda2 = _frac(run_s, "lambda2", rc.lambda2)
    rc.offset = _int(run_s, "offset", rc.offset)
    rc.r = _int(run_s, "r", rc.r)
    rc.max_stages = _int(run_s, "max_stages", rc.max_stages)
    rc.seed = _int(run_s, "seed", rc.seed)
    if cp.has_section("oracle"):
        rc.oracle = {k: v.strip() for k, v in cp["oracle"].items()}
    if "bits" in prec:
        rc.precision_bits = _int(prec, "bits", 256)
    rc.sample_points = _int(prec, "sample_points", rc.sample_points)
    rc.distance_grid = _int(prec, "distance_grid", rc.distance_grid)
    rc.distance_samples = _int(prec, "distance_samples", rc.distance_samples)
    rc.norm_inflation = _frac(prec, "norm_inflation", rc.norm_inflation)
    rc.cap_digits = _int(bud, "denominator_cap_digits", rc.cap_digits)
    rc.component_cap = _int(bud, "component_cap", rc.component_cap)
    rc.orbit_cap = _int(bud, "orbit_cap", rc.orbit_cap)
    rc.ratio_samples = _int(bud, "ratio_samples", rc.ratio_samples)
    rc.target_product = _frac(sch, "target_product", rc.target_product)
    if sch.get("deltas", "").strip():
        try:
            rc.deltas = [parse_frac(d.strip()) for d in sch["deltas"].split(",")]
        except (ValueError, ZeroDivisionError) as e:
            raise ConfigError(f"deltas: {e}") from e
    if cp.has_section("overrides"):
        for key, val in cp["overrides"].items():
            if not key.startswith("alpha_"):
                raise ConfigError(f"unknown override {key!r} (expected alpha_<n>)")
            try:
                rc.alpha_overrides[int(key[6:])] = parse_frac(val.strip())
            except (ValueError, ZeroDivisionError) as e:
                raise ConfigError(f"{key}: {e}") from e
    rc.validate()
    return rc


# ------------------------------------------------------------- analyses

def analyze(trace, rc: RunConfig | None = None, suites=("measures", "ratio", "singularity", "returns")) -> dict:
    """Run the ergodic suites that apply to the trace type; returns a JSON-ready record."""
    out = {}
    if trace.depth == 0:
        return out
    samples = rc.ratio_samples if rc else 4
    seed = rc.seed if rc else 0
    kind = trace.type_tag.kind
    if "measures" in suites:
        out["measures"] = [xi_measure(trace, n).to_record() for n in range(1, trace.depth + 1)]
    if trace.planned is None:
        return out
    if "ratio" in suites:
        n = trace.depth
        # X^+ has a single class, so sample it more densely
        out["ratio"] = ratio_membership(trace, n, samples * 16 if kind == "II_infty" else samples,
                                        seed=seed).to_record()
    if "singularity" in suites and kind == "II_infty":
        out["singularity"] = singularity_diagnostic(trace, trace.depth).to_record()
    if "returns" in suites and kind in ("III_lambda", "III_infty"):
        vals = symbol_values(trace.type_tag)
        rows = []
        for n in range(1, trace.depth + 1):
            g = trace.stages[n - 1].generator
            target = g.s_plus / g.s_minus
            try:
                rp = find_return_pair(trace, n, target)
                rows.append({"n": n, "target": frac_str(target), "xi": frac_str(rp.xi), "i": str(rp.i),
                             "cocycle": rp.cocycle.to_record(), "same_parent": rp.same_parent})
            except NotFound as e:
                rows.append({"n": n, "target": frac_str(target), "not_found": e.diagnostic})
        out["returns"] = {"symbols": {k: frac_str(v) for k, v in vals.items()}, "pairs": rows}
    return out


def analysis_failures(analysis: dict) -> list[str]:
    bad = []
    for m in analysis.get("measures", []):
        if not (m["match"] and m["equal_measure"]):
            bad.append(f"measure identity fails at depth {m['n']}")
    rat = analysis.get("ratio")
    if rat is not None and (rat["violations"] or not rat["checked"]):
        bad.append(f"ratio membership: {len(rat['violations'])} violations over {rat['checked']} returns")
    sing = analysis.get("singularity")
    if sing is not None and not (sing["decreasing"] and sing["ratio_ok"] and sing["floor_ok"] and sing["match"]):
        bad.append("singularity diagnostic fails")
    for row in analysis.get("returns", {}).get("pairs", []):
        if "not_found" in row:
            bad.append(f"return pair at depth {row['n']}: {row['not_found']}")
    return bad


# ------------------------------------------------------------- commands

def cmd_construct(config_path, out_path) -> int:
    try:
        rc = load_run_config(config_path)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"cannot read config: {e}", file=sys.stderr)
        return EXIT_IO
    if rc.precision_bits:
        mp.prec = rc.precision_bits
    try:
        trace = run(rc.type_tag(), rc.r, rc.max_stages, oracle_from_spec(rc.oracle), rc.construction_config())
    except (GeometryInfeasible, ValueError) as e:
        print(f"construction failed: {e}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    analysis, problems = {}, []
    if trace.failure is None:
        analysis = analyze(trace, rc)
        problems = analysis_failures(analysis)
    try:
        write_document(out_path, make_document(trace, rc.to_record(), analysis))
    except OSError as e:
        print(f"cannot write trace: {e}", file=sys.stderr)
        return EXIT_IO
    for s in trace.stages:
        for c in s.constraints + s.checks:
            print(f"stage {s.n} {'PASS' if c.verdict else 'FAIL'} {c.name}: {c.margin}")
    for p in problems:
        print(f"analysis FAIL {p}")
    if trace.failure is not None:
        print(f"failure ({trace.failure_kind}): {trace.failure}", file=sys.stderr)
        return EXIT_BUDGET if trace.failure_kind == "budget" else EXIT_CONSTRUCTION
    return EXIT_OK if trace.passed and not problems else EXIT_CONSTRUCTION


def _load_trace(path):
    doc = read_document(path)
    return doc, trace_from_record(doc["trace"])


def cmd_verify(trace_path, suite: str = "all") -> int:
    if suite not in SUITES:
        print(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        doc, trace = _load_trace(trace_path)
    except TraceFormatError as e:
        print(f"trace format error: {e}", file=sys.stderr)
        return EXIT_FORMAT
    except OSError as e:
        print(f"cannot read trace: {e}", file=sys.stderr)
        return EXIT_IO
    failures = []
    if suite in ("all", "integrity"):
        failures += generator_mismatches(doc["trace"]) + checksum_mismatches(doc)
    if trace.failure is not None:
        failures.append(f"trace records a failed construction: {trace.failure}")
    if suite in ("all", "stages") and trace.planned is not None:
        with mp.workprec(working_bits(trace)):
            for n in range(1, trace.depth + 1):
                for c in verify_stage(trace, n):
                    print(f"stage {n} {'PASS' if c.verdict else 'FAIL'} {c.name}: {c.margin}")
                    if not c.verdict:
                        failures.append(f"stage {n} check {c.name}: {c.detail}")
    if suite != "integrity" and suite != "stages":
        picked = ("measures", "ratio", "singularity", "returns") if suite == "all" else (suite,)
        try:
            failures += analysis_failures(analyze(trace, None, picked))
        except (ValueError, NotFound) as e:
            failures.append(f"analysis error: {e}")
    for f in failures:
        print(f"FAIL {f}")
    if failures:
        print(f"first failing check: {failures[0]}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    print("all selected checks pass")
    return EXIT_OK


def _fmt(v) -> str:
    return mp.nstr(v, 17) if not isinstance(v, Fraction) else mp.nstr(mp.mpf(v.numerator) / v.denominator, 17)


def _graph_rows(f, lo, hi, points: int):
    for k in range(points + 1):
        x = lo + (hi - lo) * Fraction(k, points)
        yield [_fmt(x), _fmt(f.lift(x))]


def export_graphs(trace, out_dir, points: int = 400) -> list[str]:
    """x, y samples of hhat_n on [0,1), of h_n and H_n on one Q_1-cell, and of f_n on [0,1)."""
    written = []
    with mp.workprec(working_bits(trace)):
        for n in range(1, trace.depth + 1):
            s = trace.stages[n - 1]
            cell = Fraction(1, trace.stages[0].Q_n)
            for name, f, lo, hi in (("hhat", s.generator.map, Fraction(0), Fraction(1)),
                                    ("h", trace.h(n), Fraction(0), cell),
                                    ("H", trace.H(n), Fraction(0), cell)):
                path = os.path.join(out_dir, f"{name}_{n}.csv")
                _write_csv(path, ["x", "y"], _graph_rows(f, lo, hi, points))
                written.append(path)
            if trace.planned is not None or n < trace.depth:
                path = os.path.join(out_dir, f"f_{n}.csv")
                _write_csv(path, ["x", "y"], _graph_rows(trace.f(n), Fraction(0), Fraction(1), points))
                written.append(path)
    return written


def _write_csv(path, header, rows):
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow(r)
    os.replace(tmp, path)


def cmd_export(trace_path, what: str, out_dir) -> int:
    kinds = [w.strip() for w in (what or "").split(",") if w.strip()]
    bad = [k for k in kinds if k not in EXPORTS]
    if bad:
        print(f"unknown export kind(s) {bad}; choose from {', '.join(EXPORTS)}", file=sys.stderr)
        return EXIT_CONFIG
    if not kinds:
        return EXIT_OK
    try:
        doc, trace = _load_trace(trace_path)
    except TraceFormatError as e:
        print(f"trace format error: {e}", file=sys.stderr)
        return EXIT_FORMAT
    except OSError as e:
        print(f"cannot read trace: {e}", file=sys.stderr)
        return EXIT_IO
    try:
        os.makedirs(out_dir, exist_ok=True)
        if "graphs" in kinds:
            export_graphs(trace, out_dir)
        if "measures" in kinds:
            rows, prod = [], Fraction(1)
            for n in range(1, trace.depth + 1):
                dp = trace.stages[n - 1].generator.delta_prime
                prod *= 1 - dp
                m = xi_measure(trace, n)
                rows.append([n, frac_str(dp), frac_str(prod), _fmt(prod), frac_str(m.exact), frac_str(m.direct),
                             m.match])
            _write_csv(os.path.join(out_dir, "measures.csv"),
                       ["depth", "delta_prime", "product", "product_float", "xi_exact", "xi_direct", "match"], rows)
        if "returns" in kinds and trace.planned is not None:
            rc = doc.get("run_config", {})
            rep = ratio_membership(trace, trace.depth, samples=int(rc.get("ratio_samples", 4)),
                                   seed=int(rc.get("seed", 0)))
            rows = [s.row() for s in rep.samples]
            header = ["x", "i", "class_x", "class_y", "exponents", "value", "verdict"]
            _write_csv(os.path.join(out_dir, "returns.csv"), header, ([r[h] for h in header] for r in rows))
    except OSError as e:
        print(f"export failed: {e}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="fastconj", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)
    c = sub.add_parser("construct", help="build and verify a trace")
    c.add_argument("--config", required=True)
    c.add_argument("--out", required=True)
    v = sub.add_parser("verify", help="re-run checks on a trace file")
    v.add_argument("--trace", required=True)
    v.add_argument("--suite", default="all", choices=SUITES)
    e = sub.add_parser("export", help="write tabular data from a trace")
    e.add_argument("--trace", required=True)
    e.add_argument("--what", default="")
    e.add_argument("--out", required=True)
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.cmd == "construct":
        return cmd_construct(args.config, args.out)
    if args.cmd == "verify":
        return cmd_verify(args.trace, args.suite)
    return cmd_export(args.trace, args.what, args.out)


if __name__ == "__main__":
    sys.exit(main())
