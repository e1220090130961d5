#!/usr/bin/env python3
"""Run the 3D box cantilever compliance benchmark end to end.

Extra CLI flags are passed through, so e.g.
``python scripts/run_example3.py`` runs with the shipped config.
Outputs land under out/example3 (or $RBTOPT_OUTPUT_ROOT/out/example3).
"""
import sys
from pathlib import Path

from rbtopt.cli import main

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "example3_box_cantilever.toml"

if __name__ == "__main__":
    sys.exit(main(["run", str(CONFIG), *sys.argv[1:]]))
