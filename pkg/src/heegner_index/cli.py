"""Command line: survey, trace, nu, classnum, an.

Exit codes: 0 success, 1 usage, 2 data error, 3 counterexample found.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

import mpmath
from sympy import isprime

from . import heegner, modparam
from .curve_store import (CACHE_ENV, CurveRecord, ParseError, bundled_curve_file,
                          parse_curve_file, parse_curve_line)
from .ec_arith import DomainError, an_table
from .quadforms import HeegnerPair, class_number, heegner_forms, nu

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_COUNTEREXAMPLE = 0, 1, 2, 3

DMAX_NOTE = ("I_E is the gcd of the indexes over fundamental |D| <= {dmax}; "
             "a larger bound can only shrink it")

SURVEY_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["dmax", "precision_bits", "note", "rows"],
    "additionalProperties": False,
    "properties": {
        "dmax": {"type": "integer", "minimum": 3},
        "precision_bits": {"type": "integer", "minimum": 64},
        "note": {"type": "string"},
        "rows": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["label", "conductor", "I_E", "nu", "sha", "sha_source",
                             "verdict", "status", "pairs", "torsion_pairs", "work",
                             "precision_bits"],
                "additionalProperties": False,
                "properties": {
                    "label": {"type": "string"},
                    "conductor": {"type": ["integer", "null"]},
                    "I_E": {"type": ["integer", "null"], "minimum": 1},
                    "nu": {"type": ["integer", "null"], "minimum": 1},
                    "sha": {"type": ["integer", "null"], "minimum": 1},
                    "sha_source": {"enum": ["ingested", "absent"]},
                    "verdict": {"enum": [heegner.VACUOUS, heegner.BY_NU, heegner.BY_SHA,
                                         heegner.BY_BOTH, heegner.COUNTEREXAMPLE,
                                         heegner.INDETERMINATE, None]},
                    "status": {"type": "string"},
                    "pairs": {"type": "integer", "minimum": 0},
                    "torsion_pairs": {"type": "integer", "minimum": 0},
                    "work": {"type": "integer", "minimum": 0},
                    "precision_bits": {"type": "integer"},
                    "seconds": {"type": "number", "minimum": 0},
                },
            },
        },
    },
}

TSV_COLUMNS = ["label", "conductor", "I_E", "nu", "sha", "verdict", "status",
               "pairs", "torsion_pairs", "work", "precision_bits"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class SurveyRow:
    label: str
    conductor: Optional[int]
    I_E: Optional[int]
    nu: Optional[int]
    sha: Optional[int]
    sha_source: str
    verdict: Optional[str]
    status: str
    pairs: int
    torsion_pairs: int
    work: int
    precision_bits: int
    seconds: float = 0.0

    def sort_key(self):
        return (self.conductor if self.conductor is not None else sys.maxsize, self.label)


# ---------------------------------------------------------------------------
# survey

def load_survey_input(path):
    """Records, plus error rows for lines that fail to parse."""
    records, bad = [], []
    seen = set()
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                rec = parse_curve_line(line, lineno, path)
                if rec.label in seen:
                    raise ParseError(f"duplicate label {rec.label}", lineno, path)
            except ParseError as e:
                bad.append((line.split()[0], str(e)))
                continue
            seen.add(rec.label)
            records.append(rec)
    return records, bad


def in_survey(rec: CurveRecord) -> bool:
    return rec.rank == 1 and isprime(rec.conductor)


def survey_curve(rec: CurveRecord, dmax: int, bits: int, validate: bool = True) -> SurveyRow:
    """One survey row; failures end up in the status field."""
    t0 = time.perf_counter()
    sha_source = "ingested" if rec.sha_analytic is not None else "absent"
    row = SurveyRow(rec.label, rec.conductor, None, None, rec.sha_analytic, sha_source,
                    None, "ok", 0, 0, 0, bits)
    try:
        row.nu = nu(rec.conductor)
        ctx = heegner.CurveContext(rec)
        res = heegner.global_index(rec, dmax, bits, validate=validate, ctx=ctx)
        row.I_E = res.index
        row.pairs = len(res.traces)
        row.torsion_pairs = sum(1 for t in res.traces if t.torsion)
        row.work = work_units(res.traces, bits, validate)
        if res.degenerate:
            row.status = "degenerate: every trace is torsion"
        row.verdict = heegner.conjecture_check(rec, res.index, row.nu, rec.sha_analytic).verdict
    except Exception as e:  # isolate the row
        logging.getLogger(__name__).debug("survey of %s failed", rec.label, exc_info=True)
        row.status = f"error: {type(e).__name__}: {e}"
    row.seconds = round(time.perf_counter() - t0, 3)
    return row


def work_units(traces, bits, validate) -> int:
    """Number of q-series terms summed for these traces: a machine-independent cost."""
    total = 0
    precisions = [bits] + ([bits + heegner.VALIDATION_EXTRA_BITS] if validate else [])
    for t in traces:
        for b in precisions:
            for tau in heegner._evaluation_points(t.pair, b):
                total += modparam.terms_needed(tau.im, b)
    return total


def _survey_job(args):
    return survey_curve(*args)


def run_survey(records, bad=(), dmax=163, bits=256, jobs=1, validate=True) -> list[SurveyRow]:
    todo = [r for r in records if in_survey(r)]
    args = [(r, dmax, bits, validate) for r in todo]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_survey_job, args))
    else:
        rows = [_survey_job(a) for a in args]
    for label, msg in bad:
        rows.append(SurveyRow(label, None, None, None, None, "absent", None,
                              f"data-error: {msg}", 0, 0, 0, bits))
    rows.sort(key=SurveyRow.sort_key)
    return rows


def survey_exit_code(rows) -> int:
    if any(r.verdict == heegner.COUNTEREXAMPLE for r in rows):
        return EXIT_COUNTEREXAMPLE
    if any(r.status != "ok" for r in rows):
        return EXIT_DATA
    return EXIT_OK


def _fmt(v):
    return "-" if v is None else str(v)


def format_tsv(rows, dmax, timing=True) -> str:
    cols = TSV_COLUMNS + (["seconds"] if timing else [])
    out = ["# " + DMAX_NOTE.format(dmax=dmax),
           "# sha: analytic order as ingested from the curve file",
           "\t".join(cols)]
    for r in rows:
        d = asdict(r)
        out.append("\t".join(_fmt(d[c]) for c in cols))
    return "\n".join(out) + "\n"


def survey_document(rows, dmax, bits, timing=True) -> dict:
    out = []
    for r in rows:
        d = asdict(r)
        if not timing:
            del d["seconds"]
        out.append(d)
    return {"dmax": dmax, "precision_bits": bits, "note": DMAX_NOTE.format(dmax=dmax), "rows": out}


def format_json(rows, dmax, bits, timing=True) -> str:
    return json.dumps(survey_document(rows, dmax, bits, timing), indent=2, sort_keys=True) + "\n"


def cmd_survey(args) -> int:
    try:
        records, bad = load_survey_input(args.curves)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    rows = run_survey(records, bad, args.dmax, args.prec, args.jobs, not args.no_validate)
    timing = not args.no_timing
    if args.format == "json" or args.json:
        sys.stdout.write(format_json(rows, args.dmax, args.prec, timing))
    else:
        sys.stdout.write(format_tsv(rows, args.dmax, timing))
    return survey_exit_code(rows)


# ---------------------------------------------------------------------------
# single-value commands

def _find_curve(label, path) -> CurveRecord:
    recs = parse_curve_file(path or bundled_curve_file())
    for r in recs:
        if r.label == label:
            return r
    raise LookupError(f"no curve labelled {label!r} in {path or bundled_curve_file()}")


def cmd_trace(args) -> int:
    rec = _find_curve(args.label, args.curves)
    try:
        pair = HeegnerPair(rec.conductor, args.D, args.r)
        heegner.weight_uD(args.D, rec.conductor)
    except DomainError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    bits = args.prec
    ctx = heegner.CurveContext(rec)
    res = heegner.trace(pair, rec, bits, ctx)
    forms = heegner_forms(pair)
    pts = heegner.heegner_points(pair, bits)
    if args.json:
        doc = {"label": rec.label, "D": pair.D, "r": pair.r, "u_D": res.u_D,
               "forms": [list(f) for f in forms],
               "tau": [mpmath.nstr(h.tau.value, 20) for h in pts],
               "trace": [repr(res.trace.real), repr(res.trace.imag)],
               "point": str(res.point), "index": res.index, "torsion": res.torsion,
               "residual": res.residual, "precision_bits": res.precision_bits}
        print(json.dumps(doc, indent=2, sort_keys=True))
        return EXIT_OK
    print(f"curve      {rec.label}  N={rec.conductor}")
    print(f"pair       D={pair.D} r={pair.r} (conjugate r={pair.r_conj})  u_D={res.u_D}")
    for f, h in zip(forms, pts):
        rep = modparam.best_representative(h.tau, pair.N, bits)
        print(f"form       {f}  tau={mpmath.nstr(h.tau.value, 15)}  "
              f"evaluated at {mpmath.nstr(rep.value, 15)}")
    print(f"trace      {res.trace.real:.15g} {res.trace.imag:+.15g}i")
    print(f"point      {res.point}" + ("  (torsion)" if res.torsion else ""))
    print(f"index      {_fmt(res.index)}")
    print(f"residual   {res.residual:.3e}  at {res.precision_bits} bits")
    return EXIT_OK


def cmd_nu(args) -> int:
    value = nu(args.N)
    print(json.dumps({"N": args.N, "nu": value}) if args.json else value)
    return EXIT_OK


def cmd_classnum(args) -> int:
    value = class_number(args.disc)
    print(json.dumps({"disc": args.disc, "h": value}) if args.json else value)
    return EXIT_OK


def cmd_an(args) -> int:
    rec = _find_curve(args.label, args.curves)
    if args.M < 1:
        print("usage error: M must be positive", file=sys.stderr)
        return EXIT_USAGE
    a = an_table(rec, args.M).as_list()
    print(json.dumps({"label": rec.label, "M": args.M, "a": a}) if args.json
          else ",".join(map(str, a)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="heegner-index",
                description="Heegner point indexes of rank-one elliptic curves.",
                epilog=f"Coefficient tables are cached under ${CACHE_ENV} "
                       "(default ~/.cache/heegner_index).")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("survey", help="I_E, nu_N and verdicts for every rank-one prime-conductor curve")
    s.add_argument("--curves", required=True)
    s.add_argument("--dmax", type=int, default=163)
    s.add_argument("--prec", type=int, default=256)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--format", choices=["tsv", "json"], default="tsv")
    s.add_argument("--no-timing", action="store_true", help="omit the seconds column")
    s.add_argument("--no-validate", action="store_true",
                   help="skip recomputing each trace 64 bits higher")
    s.set_defaults(func=cmd_survey)

    t = sub.add_parser("trace", help="one Heegner trace in detail")
    t.add_argument("label")
    t.add_argument("D", type=int)
    t.add_argument("r", type=int)
    t.add_argument("--prec", type=int, default=256)
    t.add_argument("--curves")
    t.set_defaults(func=cmd_trace)

    n = sub.add_parser("nu", help="real components of X0+(N), N prime")
    n.add_argument("N", type=int)
    n.set_defaults(func=cmd_nu)

    c = sub.add_parser("classnum", help="class number of a discriminant")
    c.add_argument("disc", type=int)
    c.set_defaults(func=cmd_classnum)

    a = sub.add_parser("an", help="a(1..M) of the L-series")
    a.add_argument("label")
    a.add_argument("M", type=int)
    a.add_argument("--curves")
    a.set_defaults(func=cmd_an)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "prec", 256) < 64 or getattr(args, "dmax", 163) < 3 or getattr(args, "jobs", 1) < 1:
        print("usage error: --prec must be >= 64, --dmax >= 3, --jobs >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except DomainError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, LookupError, OSError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
