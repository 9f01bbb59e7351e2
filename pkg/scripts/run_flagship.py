#!/usr/bin/env python3
"""Build the two-stage lambda=4 trace, verify it and export its tables.

    python3 scripts/run_flagship.py [--out DIR] [--config PATH]
"""

import argparse
import os
import sys

from fastconj.cli import main

HERE = os.path.dirname(os.path.abspath(__file__))


def parse_args():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="flagship_out")
    ap.add_argument("--config", default=os.path.join(HERE, "configs", "flagship.ini"))
    return ap.parse_args()


if __name__ == "__main__":
    args = parse_args()
    os.makedirs(args.out, exist_ok=True)
    trace = os.path.join(args.out, "trace.json")
    for argv in (["construct", "--config", args.config, "--out", trace],
                 ["verify", "--trace", trace, "--suite", "integrity"],
                 ["export", "--trace", trace, "--what", "graphs,measures,returns", "--out", args.out]):
        print("$ fastconj " + " ".join(argv), flush=True)
        code = main(argv)
        if code:
            sys.exit(code)
