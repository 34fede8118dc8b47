#!/usr/bin/env python3
"""Rotation-family divergence experiment.

Builds a six-condition witness for the configured rotations, then runs
the depth-4 staged construction against the rotated bases and reports
exact per-rotation union masses by depth.
"""

import sys

from gridhalo.cli import main

if __name__ == "__main__":
    args = [
        "zygmund",
        "--rotations", "0,22.5,45,67.5",
        "--depth", "4",
        "--style", "deep",
        "--out", "out/zygmund",
    ]
    sys.exit(main(args + sys.argv[1:]))
