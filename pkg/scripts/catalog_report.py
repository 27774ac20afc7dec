#!/usr/bin/env python3
"""Classify every catalog entry and cross-check the expected classes.

Usage: python scripts/catalog_report.py [--tol 1e-8] [--out report.json]
"""

import argparse
import sys

from pfaffian.catalog import catalog
from pfaffian.integrability import classify
from pfaffian.reports import json_text


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tol", type=float, default=1e-8)
    ap.add_argument("--out", help="also write the JSON report here")
    args = ap.parse_args(argv)

    rows = []
    mismatches = 0
    for e in catalog():
        verdict = classify(e.form, tol=args.tol)
        match = verdict.classification == e.expected_class
        mismatches += not match
        rows.append({"name": e.name, "expected": e.expected_class,
                     "report": verdict.as_report()})
        print(f"{e.name:<17} {verdict.classification:<19} "
              f"witness {verdict.witness_value:.3e} "
              f"{'ok' if match else 'MISMATCH (expected ' + e.expected_class + ')'}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(json_text({"tolerance": args.tol, "entries": rows}))
        print(f"wrote {args.out}")
    return 1 if mismatches else 0


if __name__ == "__main__":
    sys.exit(main())
