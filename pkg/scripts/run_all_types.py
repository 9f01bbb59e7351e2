#!/usr/bin/env python3
"""Construct and analyse every shipped configuration, one trace per type.

    python3 scripts/run_all_types.py [--out DIR]
"""

import argparse
import glob
import os

from fastconj.cli import main

HERE = os.path.dirname(os.path.abspath(__file__))

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="traces")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    codes = {}
    for cfg in sorted(glob.glob(os.path.join(HERE, "configs", "*.ini"))):
        name = os.path.splitext(os.path.basename(cfg))[0]
        print(f"== {name}", flush=True)
        codes[name] = main(["construct", "--config", cfg, "--out", os.path.join(args.out, name + ".json")])
    for name, code in codes.items():
        print(f"{name}: exit {code}")
