#!/usr/bin/env python3
"""Run the L-shaped beam stress benchmark end to end.

Extra CLI flags are passed through, so e.g.
``python scripts/run_example2.py`` runs with the shipped config.
Outputs land under out/example2 (or $RBTOPT_OUTPUT_ROOT/out/example2).
"""
import sys
from pathlib import Path

from rbtopt.cli import main

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "example2_l_beam.toml"

if __name__ == "__main__":
    sys.exit(main(["run", str(CONFIG), *sys.argv[1:]]))
