#!/usr/bin/env python3
"""Run the rectangular half-beam compliance benchmark end to end.

Extra CLI flags are passed through, so e.g.
``python scripts/run_example1.py`` runs with the shipped config.
Outputs land under out/example1 (or $RBTOPT_OUTPUT_ROOT/out/example1).
"""
import sys
from pathlib import Path

from rbtopt.cli import main

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "example1_rect_beam.toml"

if __name__ == "__main__":
    sys.exit(main(["run", str(CONFIG), *sys.argv[1:]]))
