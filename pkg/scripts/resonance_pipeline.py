#!/usr/bin/env python3
"""Depth-4 staged construction for the axis basis at 2048^2, with exact
uniformity, independence, and union-mass certificates."""

import sys

from gridhalo.cli import main

if __name__ == "__main__":
    args = ["resonance", "--depth", "4", "--style", "deep", "--out", "out/resonance"]
    sys.exit(main(args + sys.argv[1:]))
