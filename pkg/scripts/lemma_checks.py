#!/usr/bin/env python3
"""Quadrature vs closed form for the log-region integral, and measured
level-set growth ratios for a small square block."""

import sys

from gridhalo.cli import main

if __name__ == "__main__":
    args = ["lemmas", "--grid", "8", "--h-list", "4,6,8", "--out", "out/lemmas"]
    sys.exit(main(args + sys.argv[1:]))
